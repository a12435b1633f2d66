#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cwc/errors.hpp"

namespace cwc {

// Dense row-major FP32 tensor (last dimension contiguous). Construction
// enforces: every dim >= 1, data length == product of dims, all values
// finite. Immutable by convention once built; kernels return new tensors.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate();
    }

    // Zero-filled tensor; shape is validated, data is trivially finite.
    static Tensor zeros(std::vector<std::size_t> shape) {
        std::size_t n = checked_elem_count(shape);
        return Tensor(std::move(shape), std::vector<float>(n, 0.0f), unchecked{});
    }

    static Tensor full(std::vector<std::size_t> shape, float value) {
        std::size_t n = checked_elem_count(shape);
        if (!std::isfinite(value)) throw DomainError("Tensor::full: non-finite fill value");
        return Tensor(std::move(shape), std::vector<float>(n, value), unchecked{});
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }

    const std::vector<float>& data() const { return data_; }
    const float* ptr() const { return data_.data(); }
    float* mutable_ptr() { return data_.data(); }

    float operator[](std::size_t i) const { return data_[i]; }

    // 2-D accessor; only meaningful for rank-2 tensors.
    float at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

    static std::size_t checked_elem_count(const std::vector<std::size_t>& shape) {
        if (shape.empty()) throw DimensionError("tensor must have at least one dimension");
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw DimensionError("tensor dimensions must be >= 1");
            if (d != 0 && n > SIZE_MAX / d) throw DimensionError("tensor element count overflows");
            n *= d;
        }
        return n;
    }

private:
    struct unchecked {};
    Tensor(std::vector<std::size_t> shape, std::vector<float> data, unchecked)
        : shape_(std::move(shape)), data_(std::move(data)) {}

    void validate() const {
        std::size_t n = checked_elem_count(shape_);
        if (n != data_.size())
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str());
        for (float v : data_)
            if (!std::isfinite(v)) throw DomainError("tensor holds a non-finite value");
    }

    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

}  // namespace cwc
