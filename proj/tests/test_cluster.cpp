#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cwc/cluster.hpp"
#include "cwc/kernels.hpp"
#include "helpers.hpp"

using namespace cwc;
using cwct::make_raw_model;
using cwct::random_tensor;
using cwct::random_values;

namespace {

std::size_t codebook_count(const Model& m) {
    std::size_t n = m.shared_codebook ? 1 : 0;
    for (const auto& s : m.storage)
        if (!is_dense(s) && std::get<ClusteredTensor>(s).own_codebook) ++n;
    return n;
}

std::size_t clusterable_count(const Model& m) {
    std::size_t n = 0;
    for (const auto& t : m.graph.tensors())
        if (t.clusterable) ++n;
    return n;
}

}  // namespace

TEST_CASE("per-layer mode keeps one codebook per clustered tensor") {
    const Model dense = gen_vit_model({}, 7);
    ClusteringConfig cfg;
    cfg.clusters = 64;
    cfg.mode = ClusteringMode::PerLayer;
    const ClusteredModelResult res = cluster_model(dense, cfg);
    CHECK(codebook_count(res.model) == clusterable_count(dense));
    CHECK(!res.model.shared_codebook.has_value());
    for (const auto& s : res.model.storage)
        if (!is_dense(s)) CHECK(std::get<ClusteredTensor>(s).own_codebook->size() <= 64);
}

TEST_CASE("entire-model mode keeps exactly one codebook") {
    const Model dense = gen_vit_model({}, 7);
    ClusteringConfig cfg;
    cfg.clusters = 64;
    cfg.mode = ClusteringMode::EntireModel;
    const ClusteredModelResult res = cluster_model(dense, cfg);
    CHECK(codebook_count(res.model) == 1);
    CHECK(res.model.shared_codebook.has_value());
    CHECK(res.model.shared_codebook->size() <= 64);
}

TEST_CASE("a two-valued model clusters exactly at c=2 in both modes") {
    Rng rng(3);
    std::vector<float> w(32 * 16);
    for (auto& v : w) v = rng.below(2) ? 1.0f : -1.0f;
    Model dense = make_raw_model({{"w0", Tensor({32, 8}, {w.begin(), w.begin() + 256})},
                                  {"w1", Tensor({16, 16}, {w.begin() + 256, w.end()})}});
    for (ClusteringMode mode : {ClusteringMode::EntireModel, ClusteringMode::PerLayer}) {
        ClusteringConfig cfg;
        cfg.clusters = 2;
        cfg.mode = mode;
        const ClusteredModelResult res = cluster_model(dense, cfg);
        CHECK(res.report.total_sse == 0.0);
        const Model back = dequantize_model(res.model);
        CHECK(models_equal(back, dense));
    }
}

TEST_CASE("dequantize_tensor basics") {
    const Codebook cb(std::vector<float>{0.5f});
    ClusteredTensor ct;
    ct.name = "t";
    ct.shape = {3};
    ct.indices = {0, 0, 0};
    const Tensor t = dequantize_tensor(ct, cb);
    CHECK(t.data() == std::vector<float>({0.5f, 0.5f, 0.5f}));

    ct.indices = {0, 1, 0};
    CHECK_THROWS_AS(dequantize_tensor(ct, cb), CorruptionError);
}

TEST_CASE("dequantized values are always codebook members") {
    const Model dense = gen_vit_model({}, 11);
    ClusteringConfig cfg;
    cfg.clusters = 16;
    const ClusteredModelResult res = cluster_model(dense, cfg);
    for (const auto& s : res.model.storage) {
        if (is_dense(s)) continue;
        const ClusteredTensor& ct = std::get<ClusteredTensor>(s);
        const Codebook& cb = res.model.codebook_for(ct);
        const Tensor t = dequantize_tensor(ct, cb);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto& c = cb.centroids();
            CHECK(std::find(c.begin(), c.end(), t[i]) != c.end());
        }
    }
}

TEST_CASE("clustering a tensor with few distinct values is lossless") {
    std::vector<float> vals(100);
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(i % 5);
    Model dense = make_raw_model({{"w", Tensor({10, 10}, vals)}});
    ClusteringConfig cfg;
    cfg.clusters = 64;
    const ClusteredModelResult res = cluster_model(dense, cfg);
    CHECK(res.report.total_sse == 0.0);
    CHECK(res.report.tensors[0].exact);
    CHECK(res.report.tensors[0].codebook_len == 5);
    CHECK(!res.report.warnings.empty());
    CHECK(models_equal(dequantize_model(res.model), dense));
}

TEST_CASE("low cluster counts carry a warning") {
    const Model dense = gen_vit_model({}, 2);
    ClusteringConfig cfg;
    cfg.clusters = 8;
    const ClusteredModelResult res = cluster_model(dense, cfg);
    REQUIRE(!res.report.warnings.empty());
    CHECK(res.report.warnings[0].find("below 16") != std::string::npos);
}

TEST_CASE("quantization_report matches the cluster report exactly") {
    const Model dense = gen_vit_model({}, 5);
    for (ClusteringMode mode : {ClusteringMode::EntireModel, ClusteringMode::PerLayer}) {
        ClusteringConfig cfg;
        cfg.clusters = 32;
        cfg.mode = mode;
        cfg.seed = 99;
        const ClusteredModelResult res = cluster_model(dense, cfg);
        const std::vector<TensorErrorStats> rows = quantization_report(dense, res.model);
        REQUIRE(rows.size() == res.report.tensors.size());
        double total = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i].sse == res.report.tensors[i].sse);  // bit-exact by construction
            CHECK(rows[i].clustered == res.report.tensors[i].clustered);
            if (rows[i].clustered) {
                CHECK(rows[i].max_abs_err >= rows[i].mean_abs_err);
            } else {
                CHECK(rows[i].sse == 0.0);
            }
            total += rows[i].sse;
        }
        CHECK(total == res.report.total_sse);
    }
}

TEST_CASE("lossless clustering reports all-zero errors") {
    std::vector<float> vals(64);
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(i % 7) - 3.0f;
    Model dense = make_raw_model({{"w", Tensor({8, 8}, vals)}});
    ClusteringConfig cfg;
    cfg.clusters = 16;
    const ClusteredModelResult res = cluster_model(dense, cfg);
    for (const auto& row : quantization_report(dense, res.model)) {
        CHECK(row.sse == 0.0);
        CHECK(row.max_abs_err == 0.0);
        CHECK(row.mean_abs_err == 0.0);
    }
}

TEST_CASE("per-layer beats entire-model on disjoint layer ranges") {
    // layer A in [0,1], layer B in [100,101]
    Rng rng(8);
    std::vector<float> a(128), b(128);
    for (auto& v : a) v = static_cast<float>(rng.unit_double());
    for (auto& v : b) v = static_cast<float>(100.0 + rng.unit_double());
    Model dense = make_raw_model({{"a", Tensor({16, 8}, a)}, {"b", Tensor({16, 8}, b)}});

    ClusteringConfig cfg;
    cfg.clusters = 16;
    cfg.mode = ClusteringMode::PerLayer;
    const double per_layer_sse = cluster_model(dense, cfg).report.total_sse;
    cfg.mode = ClusteringMode::EntireModel;
    const double global_sse = cluster_model(dense, cfg).report.total_sse;
    CHECK(per_layer_sse <= global_sse);

    // the same inequality holds for the exact optima
    std::vector<float> both = a;
    both.insert(both.end(), b.begin(), b.end());
    const double dp_per_layer =
        optimal_kmeans_1d_dp(a, 16).sse + optimal_kmeans_1d_dp(b, 16).sse;
    const double dp_global = optimal_kmeans_1d_dp(both, 16).sse;
    CHECK(dp_per_layer <= dp_global);
    // Lloyd's results are bounded below by their exact optima
    CHECK(per_layer_sse >= dp_per_layer - 1e-9);
    CHECK(global_sse >= dp_global - 1e-9);
}

TEST_CASE("cluster_model rejects clustered input and clusterless graphs") {
    const Model dense = gen_vit_model({}, 1);
    ClusteringConfig cfg;
    cfg.clusters = 16;
    const ClusteredModelResult res = cluster_model(dense, cfg);
    CHECK_THROWS_AS(cluster_model(res.model, cfg), ConfigError);

    Model biases_only = make_raw_model({{"b", Tensor({4}, {1, 2, 3, 4})}});
    CHECK_THROWS_AS(cluster_model(biases_only, cfg), InfeasibleError);
}

TEST_CASE("cluster_model is deterministic") {
    const Model dense = gen_vit_model({}, 77);
    ClusteringConfig cfg;
    cfg.clusters = 32;
    cfg.seed = 5;
    const ClusteredModelResult a = cluster_model(dense, cfg);
    const ClusteredModelResult b = cluster_model(dense, cfg);
    CHECK(models_equal(a.model, b.model));
    CHECK(a.report.total_sse == b.report.total_sse);
}

TEST_CASE("quantization_report rejects mismatched graphs") {
    const Model a = gen_vit_model({}, 1);
    VitHyperParams hp;
    hp.depth = 3;
    const Model b = gen_vit_model(hp, 1);
    ClusteringConfig cfg;
    cfg.clusters = 16;
    const ClusteredModelResult res = cluster_model(b, cfg);
    CHECK_THROWS_AS(quantization_report(a, res.model), GraphError);
}
