#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cwc/codebook.hpp"

namespace cwc {

struct KmeansResult {
    Codebook codebook;
    ClusterAssignment assignment;  // aligned with the input order
    double sse = 0.0;              // FP64, against the returned codebook
    std::vector<double> sse_trace; // per-iteration SSE of the winning restart
    std::size_t iterations = 0;
    bool exact = false;            // k matched the distinct-value count
};

// k-means++ seeding: first seed uniform over points, each next chosen with
// probability proportional to squared distance from the nearest chosen seed.
// Returns k distinct values in selection order. Throws InfeasibleError when
// k exceeds the number of distinct values.
std::vector<float> kmeanspp_init(std::span<const float> values, std::size_t k,
                                 std::uint64_t seed);

// Lloyd's algorithm on scalars: alternate nearest-centroid assignment and
// mean updates until the relative SSE improvement drops below cfg.rel_tol or
// cfg.max_iters is reached; the best of cfg.restarts independent k-means++
// starts wins (ties to the lower restart index). Centroids are FP64 during
// iteration and cast to FP32 for the returned codebook; the returned
// assignment and SSE are recomputed against that final codebook.
KmeansResult lloyd_kmeans_1d(std::span<const float> values, const ClusteringConfig& cfg);

struct DpResult {
    Codebook codebook;
    double sse = 0.0;
};

// Exact 1-D k-means via dynamic programming over the sorted values (optimal
// clusters are contiguous in sorted order). O(k*n^2); meant for oracle-scale
// inputs, not whole models.
DpResult optimal_kmeans_1d_dp(std::span<const float> values, std::size_t k);

// FP64 sum of squared errors between values and their assigned centroids,
// accumulated in fixed-size chunks combined in ascending chunk order. Both
// the clustering report and quantization_report use this, so their numbers
// agree exactly.
double assignment_sse(std::span<const float> values, const ClusterAssignment& assignment,
                      const Codebook& cb);

std::size_t count_distinct(std::span<const float> values);

}  // namespace cwc
