#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cwc/errors.hpp"
#include "cwc/tensor.hpp"

namespace cwc {

// Table of centroids. Centroids are kept sorted and strictly increasing so a
// codebook is a canonical representation of its value set; every index fits
// in one byte. A requested clustering always asks for >= 2 clusters, but a
// tensor with a single distinct value legitimately produces a one-entry
// exact codebook, so length 1 is admitted here.
class Codebook {
public:
    Codebook() = default;

    explicit Codebook(std::vector<float> centroids) : centroids_(std::move(centroids)) {
        if (centroids_.empty() || centroids_.size() > 256)
            throw ConfigError("codebook must hold 1..256 centroids, got " +
                              std::to_string(centroids_.size()));
        for (std::size_t i = 0; i < centroids_.size(); ++i) {
            if (!std::isfinite(centroids_[i])) throw DomainError("codebook centroid not finite");
            if (i > 0 && !(centroids_[i - 1] < centroids_[i]))
                throw ConfigError("codebook centroids must be strictly increasing");
        }
    }

    std::size_t size() const { return centroids_.size(); }
    float operator[](std::size_t i) const { return centroids_[i]; }
    const std::vector<float>& centroids() const { return centroids_; }

    // Storage cost of the table itself: 4 bytes per FP32 centroid.
    std::uint64_t byte_size() const { return 4ull * centroids_.size(); }

private:
    std::vector<float> centroids_;
};

// One u8 index per clustered scalar, pointing at its nearest centroid
// (ties resolved to the lower index).
using ClusterAssignment = std::vector<std::uint8_t>;

enum class ClusteringMode : std::uint8_t { EntireModel = 0, PerLayer = 1 };

inline const char* to_string(ClusteringMode m) {
    return m == ClusteringMode::EntireModel ? "entire" : "per_layer";
}

struct ClusteringConfig {
    std::size_t clusters = 256;
    ClusteringMode mode = ClusteringMode::PerLayer;
    std::size_t max_iters = 100;
    double rel_tol = 1e-7;  // stop when relative SSE improvement drops below this
    std::size_t restarts = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (clusters < 2 || clusters > 256)
            throw ConfigError("cluster count must be in [2,256], got " + std::to_string(clusters));
        if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
        if (restarts < 1) throw ConfigError("restarts must be >= 1");
        if (!(rel_tol >= 0.0)) throw ConfigError("rel_tol must be >= 0");
    }
};

// A tensor whose scalars live in a codebook. `own_codebook` is empty when
// the tensor references its model's shared table (entire-model mode).
struct ClusteredTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::optional<Codebook> own_codebook;
    ClusterAssignment indices;

    std::size_t elem_count() const { return Tensor::checked_elem_count(shape); }

    void validate(std::size_t resolved_codebook_len) const {
        if (indices.size() != elem_count())
            throw CorruptionError("clustered tensor '" + name + "': index count " +
                                  std::to_string(indices.size()) + " != element count");
        for (std::uint8_t ix : indices)
            if (ix >= resolved_codebook_len)
                throw CorruptionError("clustered tensor '" + name + "': index " +
                                      std::to_string(ix) + " out of range for codebook of " +
                                      std::to_string(resolved_codebook_len));
    }
};

}  // namespace cwc
