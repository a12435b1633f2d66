#pragma once

#include <cstdint>

#include "cwc/model.hpp"

namespace cwc {

// Parameter-payload accounting. Container headers are excluded on purpose:
// the compression ratio is about parameter and codebook bytes, not framing.
struct SizeBreakdown {
    std::uint64_t param_bytes = 0;     // 4 B per dense-stored scalar, 1 B per clustered scalar
    std::uint64_t codebook_bytes = 0;  // 4 B per centroid, summed over tables
    std::uint64_t total = 0;           // param_bytes + codebook_bytes

    std::uint64_t clusterable_params = 0;  // scalars eligible for clustering
    std::uint64_t excluded_params = 0;     // scalars kept dense by policy
    std::uint64_t clustered_params = 0;    // scalars actually stored as indices
};

SizeBreakdown model_size_bytes(const Model& m);

// Pure-arithmetic variants for hypothetical models.
std::uint64_t dense_size_bytes(std::uint64_t total_params);
std::uint64_t clustered_size_bytes(std::uint64_t clustered_params, std::uint64_t codebooks,
                                   std::uint64_t clusters, std::uint64_t excluded_params);

// dense_total / clustered_total; both must be positive.
double compression_ratio(std::uint64_t dense_total, std::uint64_t clustered_total);

}  // namespace cwc
