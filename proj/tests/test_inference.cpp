#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cwc/cluster.hpp"
#include "cwc/inference.hpp"
#include "cwc/kernels.hpp"
#include "helpers.hpp"

using namespace cwc;
using cwct::fabricate_clustered;
using cwct::random_tensor;

namespace {

bool same_bits(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
}

// Snaps weights to a coarse grid so every clusterable tensor has few distinct
// values and clustering becomes lossless.
Model snapped_vit(std::uint64_t seed) {
    Model m = gen_vit_model({}, seed);
    for (std::size_t i = 0; i < m.storage.size(); ++i) {
        if (!m.graph.tensors()[i].clusterable) continue;
        Tensor& t = std::get<Tensor>(m.storage[i]);
        std::vector<float> d = t.data();
        for (auto& v : d) v = std::round(v * 100.0f) / 100.0f;
        t = Tensor(t.shape(), std::move(d));
    }
    return m;
}

}  // namespace

TEST_CASE("keystone: clustered_matmul is bit-identical to dense over dequantized weights") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const std::size_t m = 1 + rng.below(32), k = 1 + rng.below(32), n = 1 + rng.below(32);
        const std::size_t c = 2 + rng.below(255);
        Codebook cb;
        const ClusteredTensor w = fabricate_clustered(k, n, c, seed * 7 + 1, cb);
        const Tensor x = random_tensor({m, k}, seed * 7 + 2);
        const Tensor dense = matmul(x, dequantize_tensor(w, cb));
        const Tensor fused = clustered_matmul(x, w, cb);
        CHECK(same_bits(dense, fused));
        CHECK(same_bits(dense, ref::clustered_matmul(x, w, cb)));
    }
}

TEST_CASE("clustered_matmul with a zero codebook yields the zero matrix") {
    const Codebook cb(std::vector<float>{0.0f});
    ClusteredTensor w;
    w.name = "w";
    w.shape = {4, 3};
    w.indices.assign(12, 0);
    const Tensor y = clustered_matmul(random_tensor({2, 4}, 1), w, cb);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0f);
}

TEST_CASE("clustered_matmul rejects corrupt indices and bad shapes") {
    Codebook cb;
    ClusteredTensor w = fabricate_clustered(4, 3, 8, 5, cb);
    w.indices[5] = 200;  // past the 8-entry codebook
    CHECK_THROWS_AS(clustered_matmul(random_tensor({2, 4}, 1), w, cb), CorruptionError);
    ClusteredTensor ok = fabricate_clustered(4, 3, 8, 5, cb);
    CHECK_THROWS_AS(clustered_matmul(random_tensor({2, 5}, 1), ok, cb), DimensionError);
}

TEST_CASE("synthetic datasets are seeded and in range") {
    const SyntheticDataset a = gen_dataset(9, 8, 16, 1, 10);
    const SyntheticDataset b = gen_dataset(9, 8, 16, 1, 10);
    CHECK(a.images.data() == b.images.data());
    CHECK(a.labels == b.labels);
    CHECK(a.images.shape() == std::vector<std::size_t>({8, 16, 16, 1}));
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i] >= 0.0f);
        CHECK(a.images[i] < 1.0f);
    }
    for (auto l : a.labels) CHECK(l < 10);
    CHECK(gen_dataset(10, 8, 16, 1).images.data() != a.images.data());
}

TEST_CASE("blob import checks divisibility") {
    std::vector<float> blob(2 * 16 * 16, 0.5f);
    const SyntheticDataset ds = dataset_from_blob(blob, 16, 1);
    CHECK(ds.count() == 2);
    CHECK_THROWS_AS(dataset_from_blob(std::vector<float>(100, 0.0f), 16, 1), DimensionError);
}

TEST_CASE("vit_forward shape contract and input validation") {
    const Model m = gen_vit_model({}, 4);
    const SyntheticDataset ds = gen_dataset(1, 5, 16, 1);
    const Tensor logits = vit_forward(m, ds.images);
    CHECK(logits.shape() == std::vector<std::size_t>({5, 10}));
    CHECK_THROWS_AS(vit_forward(m, random_tensor({2, 8, 8, 1}, 1)), DimensionError);
    Model raw = cwct::make_raw_model({{"w", random_tensor({4, 4}, 2)}});
    CHECK_THROWS_AS(vit_forward(raw, ds.images), ConfigError);
}

TEST_CASE("vit_forward is deterministic and batch-invariant") {
    const Model m = gen_vit_model({}, 7);
    const SyntheticDataset ds = gen_dataset(3, 6, 16, 1);
    const Tensor a = vit_forward(m, ds.images);
    const Tensor b = vit_forward(m, ds.images);
    CHECK(same_bits(a, b));
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const Tensor c = vit_forward(m, ds.images);
    omp_set_num_threads(saved);
    CHECK(same_bits(a, c));
#endif
    // each image's logits match a single-image run bit-for-bit
    for (std::size_t i = 0; i < ds.count(); ++i) {
        std::vector<float> one(16 * 16);
        std::memcpy(one.data(), ds.images.ptr() + i * one.size(), one.size() * sizeof(float));
        const Tensor li = vit_forward(m, Tensor({1, 16, 16, 1}, one));
        for (std::size_t j = 0; j < 10; ++j) CHECK(li.at(0, j) == a.at(i, j));
    }
}

TEST_CASE("lossless clustering preserves logits bit-for-bit") {
    const Model dense = snapped_vit(11);
    ClusteringConfig cfg;
    cfg.clusters = 128;
    for (ClusteringMode mode : {ClusteringMode::PerLayer, ClusteringMode::EntireModel}) {
        cfg.mode = mode;
        const ClusteredModelResult res = cluster_model(dense, cfg);
        if (mode == ClusteringMode::PerLayer) CHECK(res.report.total_sse == 0.0);
        if (res.report.total_sse != 0.0) continue;  // entire-model may exceed 128 distinct
        const SyntheticDataset ds = gen_dataset(2, 4, 16, 1);
        CHECK(same_bits(vit_forward(dense, ds.images), vit_forward(res.model, ds.images)));
    }
}

TEST_CASE("fidelity of a model against itself is perfect") {
    const Model m = gen_vit_model({}, 13);
    const SyntheticDataset ds = gen_dataset(4, 8, 16, 1);
    const FidelityResult fr = fidelity_eval(m, m, ds);
    CHECK(fr.top1_agreement == 1.0);
    CHECK(fr.mean_logit_l2 == 0.0);
}

TEST_CASE("fidelity rejects class-count mismatches") {
    VitHyperParams hp;
    hp.classes = 7;
    const Model a = gen_vit_model({}, 1);
    const Model b = gen_vit_model(hp, 1);
    const SyntheticDataset ds = gen_dataset(4, 2, 16, 1);
    CHECK_THROWS_AS(fidelity_eval(a, b, ds), DimensionError);
}

TEST_CASE("clustered fidelity at c=256 stays near the baseline") {
    const Model dense = gen_vit_model({}, 7);
    ClusteringConfig cfg;
    cfg.clusters = 256;
    cfg.mode = ClusteringMode::PerLayer;
    cfg.restarts = 2;
    const ClusteredModelResult res = cluster_model(dense, cfg);
    const SyntheticDataset ds = gen_dataset(21, 64, 16, 1);
    const FidelityResult fr = fidelity_eval(dense, res.model, ds);
    CHECK(fr.top1_agreement >= 0.99);
    CHECK(fr.mean_logit_l2 < 0.05);
}

TEST_CASE("accuracy: one-hot logits score perfectly") {
    std::vector<std::uint32_t> labels = {3, 1, 4, 0};
    std::vector<float> lg(4 * 6, 0.0f);
    for (std::size_t i = 0; i < 4; ++i) lg[i * 6 + labels[i]] = 1.0f;
    const AccuracyResult r = accuracy_from_logits(Tensor({4, 6}, lg), labels);
    CHECK(r.top1 == 1.0);
    CHECK(r.top5 == 1.0);
}

TEST_CASE("accuracy: top5 tracks the binomial expectation on random labels") {
    const std::size_t n = 10000, classes = 10;
    const Tensor logits = random_tensor({n, classes}, 17);
    Rng rng(18);
    std::vector<std::uint32_t> labels(n);
    for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(classes));
    const AccuracyResult r = accuracy_from_logits(logits, labels);
    CHECK(r.top5 >= r.top1);
    CHECK(r.top5 == doctest::Approx(0.5).epsilon(0.05));
    CHECK(r.top1 == doctest::Approx(0.1).epsilon(0.35));
}

TEST_CASE("accuracy input validation") {
    const Tensor logits = random_tensor({4, 10}, 1);
    CHECK_THROWS_AS(accuracy_from_logits(logits, {}), DomainError);
    CHECK_THROWS_AS(accuracy_from_logits(logits, {1, 2}), DimensionError);
    CHECK_THROWS_AS(accuracy_from_logits(random_tensor({2, 3}, 1), {0, 1}), ConfigError);
    CHECK_THROWS_AS(accuracy_from_logits(logits, {1, 2, 3, 99}), DomainError);
}

TEST_CASE("accuracy_eval runs a labeled dataset through the model") {
    const Model m = gen_vit_model({}, 19);
    const SyntheticDataset ds = gen_dataset(3, 32, 16, 1, 10);
    const AccuracyResult r = accuracy_eval(m, ds);
    CHECK(r.top5 >= r.top1);
    CHECK(r.top1 >= 0.0);
    CHECK(r.top5 <= 1.0);
    const SyntheticDataset unlabeled = gen_dataset(3, 4, 16, 1);
    CHECK_THROWS_AS(accuracy_eval(m, unlabeled), DomainError);
}

TEST_CASE("argmax ties break toward the lower class") {
    const Tensor logits({1, 4}, {1.0f, 2.0f, 2.0f, 0.0f});
    CHECK(argmax_row(logits, 0) == 1);
    // top-k ranking prefers the lower index among ties as well
    const AccuracyResult r = accuracy_from_logits(Tensor({1, 5}, {1, 1, 1, 1, 1}),
                                                  std::vector<std::uint32_t>{0});
    CHECK(r.top1 == 1.0);
}
