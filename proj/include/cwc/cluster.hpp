#pragma once

#include <string>
#include <vector>

#include "cwc/kmeans.hpp"
#include "cwc/model.hpp"

namespace cwc {

struct TensorClusterInfo {
    std::string name;
    std::size_t elems = 0;
    bool clustered = false;
    std::size_t codebook_len = 0;  // resolved table length (shared table in entire mode)
    bool exact = false;            // distinct values <= requested clusters
    double sse = 0.0;
};

struct ClusterReport {
    ClusteringMode mode = ClusteringMode::PerLayer;
    std::size_t requested_clusters = 0;
    double total_sse = 0.0;  // sum of per-tensor SSE, in tensor order
    std::vector<TensorClusterInfo> tensors;
    std::vector<std::string> warnings;
};

struct ClusteredModelResult {
    Model model;
    ClusterReport report;
};

// Clusters every clusterable tensor of a dense model. Entire-model mode
// concatenates them (graph order) and fits one shared codebook; per-layer
// mode fits an independent codebook per tensor, each from its own seed
// substream. A tensor with fewer distinct values than cfg.clusters is stored
// exactly with a short codebook and flagged in the report.
ClusteredModelResult cluster_model(const Model& dense, const ClusteringConfig& cfg);

// Replaces every clustered tensor by its dequantized FP32 copy.
Model dequantize_model(const Model& m);

struct TensorErrorStats {
    std::string name;
    bool clustered = false;
    double sse = 0.0;
    double max_abs_err = 0.0;
    double mean_abs_err = 0.0;
};

// FP64 reconstruction errors between a dense model and its clustered
// counterpart, per tensor. The SSE column matches ClusterReport exactly.
std::vector<TensorErrorStats> quantization_report(const Model& dense, const Model& clustered);

}  // namespace cwc
