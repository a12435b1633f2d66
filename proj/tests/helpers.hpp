#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cwc/codebook.hpp"
#include "cwc/model.hpp"
#include "cwc/rng.hpp"
#include "cwc/tensor.hpp"

namespace cwct {

inline cwc::Model make_raw_model(std::vector<std::pair<std::string, cwc::Tensor>> tensors) {
    std::vector<cwc::TensorSpec> specs;
    specs.reserve(tensors.size());
    for (auto& [name, t] : tensors) specs.push_back({name, t.shape(), false});
    cwc::Model m;
    m.graph = cwc::ModelGraph::raw(std::move(specs));
    for (auto& [name, t] : tensors) m.storage.emplace_back(std::move(t));
    return m;
}

inline cwc::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                                 double range = 1.0) {
    cwc::Rng rng(seed);
    std::vector<float> data(cwc::Tensor::checked_elem_count(shape));
    for (auto& v : data) v = static_cast<float>(rng.symmetric(range));
    return cwc::Tensor(std::move(shape), std::move(data));
}

inline std::vector<float> random_values(std::size_t n, std::uint64_t seed, double range = 1.0) {
    cwc::Rng rng(seed);
    std::vector<float> vals(n);
    for (auto& v : vals) v = static_cast<float>(rng.symmetric(range));
    return vals;
}

inline std::vector<float> gaussian_values(std::size_t n, std::uint64_t seed) {
    cwc::Rng rng(seed);
    std::vector<float> vals(n);
    for (auto& v : vals) v = static_cast<float>(rng.gaussian());
    return vals;
}

// Random strictly-increasing codebook plus random indices; independent of
// any clustering code on purpose.
inline cwc::ClusteredTensor fabricate_clustered(std::size_t k, std::size_t n, std::size_t c,
                                                std::uint64_t seed, cwc::Codebook& cb_out) {
    cwc::Rng rng(seed);
    std::vector<float> centroids;
    while (centroids.size() < c) {
        centroids.push_back(static_cast<float>(rng.symmetric(1.0)));
        std::sort(centroids.begin(), centroids.end());
        centroids.erase(std::unique(centroids.begin(), centroids.end()), centroids.end());
    }
    cb_out = cwc::Codebook(centroids);
    cwc::ClusteredTensor ct;
    ct.name = "w";
    ct.shape = {k, n};
    ct.indices.resize(k * n);
    for (auto& ix : ct.indices) ix = static_cast<std::uint8_t>(rng.below(c));
    return ct;
}

// Random toy-ViT hyperparameters small enough for fast roundtrips.
inline cwc::VitHyperParams random_vit_params(cwc::Rng& rng) {
    cwc::VitHyperParams hp;
    hp.patch_size = 2 + 2 * rng.below(2);             // 2 or 4
    hp.image_size = hp.patch_size * (2 + rng.below(3));  // 2..4 patches per side
    hp.channels = 1 + 2 * rng.below(2);               // 1 or 3
    hp.heads = std::size_t{1} << rng.below(3);        // 1, 2, 4
    hp.dim = hp.heads * (4 + 4 * rng.below(3));       // divisible by heads
    hp.depth = 1 + rng.below(4);
    hp.mlp_ratio = 1 + rng.below(4);
    hp.classes = 2 + rng.below(15);
    return hp;
}

inline cwc::Model random_model(std::uint64_t seed) {
    cwc::Rng rng(seed);
    if (rng.below(2) == 0) return cwc::gen_vit_model(random_vit_params(rng), rng.next_u64());
    const std::size_t count = 1 + rng.below(5);
    std::vector<std::pair<std::string, cwc::Tensor>> tensors;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t rank = 1 + rng.below(3);
        std::vector<std::size_t> shape;
        for (std::size_t r = 0; r < rank; ++r) shape.push_back(1 + rng.below(8));
        tensors.emplace_back("t" + std::to_string(i), random_tensor(shape, rng.next_u64()));
    }
    return make_raw_model(std::move(tensors));
}

// Walks a serialized TDM1/TCM1 stream and records the offset of every header
// byte (everything except tensor names, FP32 payloads, centroid values and
// index payloads). Mirrors the format on purpose, independently of the
// writer, so layout drift shows up as a walk failure.
inline std::vector<std::size_t> header_offsets(const std::vector<std::uint8_t>& bytes) {
    std::vector<std::size_t> offs;
    auto mark = [&](std::size_t at, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) offs.push_back(at + i);
    };
    auto u16_at = [&](std::size_t at) {
        return static_cast<std::size_t>(bytes[at] | (bytes[at + 1] << 8));
    };
    auto u32_at = [&](std::size_t at) {
        std::size_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::size_t>(bytes[at + i]) << (8 * i);
        return v;
    };
    const bool clustered = bytes.size() >= 4 && bytes[0] == 'T' && bytes[1] == 'C';
    std::size_t pos = 0;
    mark(pos, 4);  // magic
    pos += 4;
    mark(pos, 4);  // version
    pos += 4;
    std::size_t mode = 1;
    if (clustered) {
        mark(pos, 1);  // mode
        mode = bytes[pos];
        pos += 1;
        if (mode == 0) {
            mark(pos, 2);  // shared codebook length
            pos += 2 + 4 * u16_at(pos);
        }
    }
    mark(pos, 4);  // tensor count
    const std::size_t count = u32_at(pos);
    pos += 4;
    for (std::size_t t = 0; t < count; ++t) {
        mark(pos, 2);  // name_len
        pos += 2 + u16_at(pos);
        mark(pos, 1);  // ndims
        const std::size_t ndims = bytes[pos];
        pos += 1;
        std::size_t elems = 1;
        for (std::size_t d = 0; d < ndims; ++d) {
            mark(pos, 4);
            elems *= u32_at(pos);
            pos += 4;
        }
        mark(pos, 1);  // dtype
        pos += 1;
        if (!clustered) {
            pos += 4 * elems;
        } else {
            mark(pos, 1);  // storage
            const std::size_t storage = bytes[pos];
            pos += 1;
            if (storage == 0) {
                pos += 4 * elems;
            } else {
                if (mode == 1) {
                    mark(pos, 2);  // codebook length
                    pos += 2 + 4 * u16_at(pos);
                }
                pos += elems;
            }
        }
    }
    if (pos != bytes.size()) throw std::runtime_error("header walk out of sync with stream");
    return offs;
}

// Entire-model uniform-grid quantizer: a valid clustered counterpart built
// without running k-means, for size/perf checks at large scale. Each scalar
// maps to its nearest grid point, so the assignment invariant holds.
inline cwc::Model grid_clustered(const cwc::Model& dense, std::size_t c) {
    float lo = 1e30f, hi = -1e30f;
    for (std::size_t i = 0; i < dense.storage.size(); ++i) {
        if (!dense.graph.tensors()[i].clusterable) continue;
        for (float v : std::get<cwc::Tensor>(dense.storage[i]).data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    std::vector<float> centroids(c);
    const double step = (static_cast<double>(hi) - lo) / static_cast<double>(c - 1);
    for (std::size_t i = 0; i < c; ++i) centroids[i] = static_cast<float>(lo + step * i);
    cwc::Model out;
    out.graph = dense.graph;
    out.mode = cwc::ClusteringMode::EntireModel;
    out.shared_codebook = cwc::Codebook(centroids);
    out.storage.resize(dense.storage.size());
    for (std::size_t i = 0; i < dense.storage.size(); ++i) {
        if (!dense.graph.tensors()[i].clusterable) {
            out.storage[i] = dense.storage[i];
            continue;
        }
        const cwc::Tensor& t = std::get<cwc::Tensor>(dense.storage[i]);
        cwc::ClusteredTensor ct;
        ct.name = dense.graph.tensors()[i].name;
        ct.shape = t.shape();
        ct.indices.resize(t.size());
        for (std::size_t j = 0; j < t.size(); ++j) {
            const double idx = std::round((t[j] - lo) / step);
            ct.indices[j] =
                static_cast<std::uint8_t>(std::min<double>(c - 1.0, std::max(0.0, idx)));
        }
        out.storage[i] = std::move(ct);
    }
    return out;
}

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        const auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate = base / ("cwc_test_" + std::to_string(rd()));
            if (std::filesystem::create_directory(candidate)) {
                path = candidate;
                return;
            }
        }
        throw std::runtime_error("cannot create temp dir");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace cwct
