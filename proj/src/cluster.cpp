#include "cwc/cluster.hpp"

#include <algorithm>
#include <cmath>

#include "cwc/errors.hpp"
#include "cwc/kernels.hpp"
#include "cwc/rng.hpp"

namespace cwc {

namespace {

// Exact clustering for a value set with at most `limit` distinct values:
// the codebook is the distinct values themselves.
std::pair<Codebook, ClusterAssignment> exact_codebook(std::span<const float> values) {
    std::vector<float> distinct(values.begin(), values.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    Codebook cb(distinct);
    ClusterAssignment asg(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto it = std::lower_bound(distinct.begin(), distinct.end(), values[i]);
        asg[i] = static_cast<std::uint8_t>(it - distinct.begin());
    }
    return {std::move(cb), std::move(asg)};
}

// Clusters one value array with at most cfg.clusters centroids, handling the
// short-codebook cases that plain Lloyd rejects.
struct PieceResult {
    Codebook codebook;
    ClusterAssignment assignment;
    bool exact = false;
};

PieceResult cluster_values(std::span<const float> values, const ClusteringConfig& cfg,
                           std::uint64_t seed) {
    const std::size_t distinct = count_distinct(values);
    if (distinct <= cfg.clusters) {
        auto [cb, asg] = exact_codebook(values);
        return {std::move(cb), std::move(asg), true};
    }
    ClusteringConfig local = cfg;
    local.seed = seed;
    KmeansResult km = lloyd_kmeans_1d(values, local);
    return {std::move(km.codebook), std::move(km.assignment), km.exact};
}

}  // namespace

ClusteredModelResult cluster_model(const Model& dense, const ClusteringConfig& cfg) {
    cfg.validate();
    if (!dense.all_dense()) throw ConfigError("cluster_model expects a dense model");
    const auto& specs = dense.graph.tensors();
    std::vector<std::size_t> clusterable;
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (specs[i].clusterable) clusterable.push_back(i);
    if (clusterable.empty()) throw InfeasibleError("model has no clusterable tensor");

    ClusteredModelResult out;
    out.model.graph = dense.graph;
    out.model.mode = cfg.mode;
    out.model.storage.resize(specs.size());
    out.report.mode = cfg.mode;
    out.report.requested_clusters = cfg.clusters;
    if (cfg.clusters < 16)
        out.report.warnings.push_back(
            "cluster count " + std::to_string(cfg.clusters) +
            " is below 16; expect severe reconstruction error at this granularity");

    // Pass through everything that stays dense.
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (!specs[i].clusterable) out.model.storage[i] = std::get<Tensor>(dense.storage[i]);

    if (cfg.mode == ClusteringMode::EntireModel) {
        std::vector<float> all;
        all.reserve(dense.graph.clusterable_param_count());
        for (std::size_t i : clusterable) {
            const auto& d = std::get<Tensor>(dense.storage[i]).data();
            all.insert(all.end(), d.begin(), d.end());
        }
        PieceResult piece = cluster_values(all, cfg, cfg.seed);
        out.model.shared_codebook = piece.codebook;
        std::size_t offset = 0;
        for (std::size_t i : clusterable) {
            const Tensor& t = std::get<Tensor>(dense.storage[i]);
            ClusteredTensor ct;
            ct.name = specs[i].name;
            ct.shape = specs[i].shape;
            ct.indices.assign(piece.assignment.begin() + offset,
                              piece.assignment.begin() + offset + t.size());
            offset += t.size();
            out.model.storage[i] = std::move(ct);
        }
        if (piece.exact && piece.codebook.size() < cfg.clusters)
            out.report.warnings.push_back("model has only " +
                                          std::to_string(piece.codebook.size()) +
                                          " distinct clusterable values; codebook stored exactly");
    } else {
        for (std::size_t i : clusterable) {
            const Tensor& t = std::get<Tensor>(dense.storage[i]);
            PieceResult piece = cluster_values(t.data(), cfg, Rng::derive(cfg.seed, i));
            ClusteredTensor ct;
            ct.name = specs[i].name;
            ct.shape = specs[i].shape;
            ct.own_codebook = std::move(piece.codebook);
            ct.indices = std::move(piece.assignment);
            if (piece.exact && ct.own_codebook->size() < cfg.clusters)
                out.report.warnings.push_back("tensor '" + specs[i].name + "' has only " +
                                              std::to_string(ct.own_codebook->size()) +
                                              " distinct values; codebook stored exactly");
            out.model.storage[i] = std::move(ct);
        }
    }

    // Report rows for every tensor, SSE against the original dense values.
    out.report.total_sse = 0.0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        TensorClusterInfo info;
        info.name = specs[i].name;
        info.elems = Tensor::checked_elem_count(specs[i].shape);
        if (specs[i].clusterable) {
            const ClusteredTensor& ct = std::get<ClusteredTensor>(out.model.storage[i]);
            const Codebook& cb = out.model.codebook_for(ct);
            info.clustered = true;
            info.codebook_len = cb.size();
            info.sse = assignment_sse(std::get<Tensor>(dense.storage[i]).data(), ct.indices, cb);
            info.exact = cb.size() < cfg.clusters || info.sse == 0.0;
        }
        out.report.total_sse += info.sse;
        out.report.tensors.push_back(std::move(info));
    }
    return out;
}

Model dequantize_model(const Model& m) {
    Model out;
    out.graph = m.graph;
    out.mode = ClusteringMode::PerLayer;
    out.storage.reserve(m.storage.size());
    for (const TensorStorage& s : m.storage) {
        if (is_dense(s)) {
            out.storage.push_back(std::get<Tensor>(s));
        } else {
            const ClusteredTensor& ct = std::get<ClusteredTensor>(s);
            out.storage.push_back(dequantize_tensor(ct, m.codebook_for(ct)));
        }
    }
    return out;
}

std::vector<TensorErrorStats> quantization_report(const Model& dense, const Model& clustered) {
    if (!(dense.graph == clustered.graph))
        throw GraphError("quantization_report: models have different graphs");
    if (!dense.all_dense()) throw GraphError("quantization_report: baseline must be dense");
    std::vector<TensorErrorStats> rows;
    rows.reserve(dense.storage.size());
    for (std::size_t i = 0; i < dense.storage.size(); ++i) {
        TensorErrorStats row;
        row.name = dense.graph.tensors()[i].name;
        const Tensor& base = std::get<Tensor>(dense.storage[i]);
        if (!is_dense(clustered.storage[i])) {
            const ClusteredTensor& ct = std::get<ClusteredTensor>(clustered.storage[i]);
            const Codebook& cb = clustered.codebook_for(ct);
            ct.validate(cb.size());
            if (ct.shape != base.shape())
                throw GraphError("quantization_report: tensor '" + row.name + "' shape mismatch");
            row.clustered = true;
            row.sse = assignment_sse(base.data(), ct.indices, cb);
            double sum_abs = 0.0, max_abs = 0.0;
            for (std::size_t j = 0; j < base.size(); ++j) {
                const double d = std::fabs(static_cast<double>(base[j]) -
                                           static_cast<double>(cb[ct.indices[j]]));
                sum_abs += d;
                max_abs = std::max(max_abs, d);
            }
            row.max_abs_err = max_abs;
            row.mean_abs_err = sum_abs / static_cast<double>(base.size());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace cwc
