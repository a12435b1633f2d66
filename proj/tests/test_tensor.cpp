#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cwc/kernels.hpp"
#include "helpers.hpp"

using namespace cwc;
using cwct::random_tensor;

namespace {

// Independent oracle: the textbook definition with the contract's FP32
// ascending-t accumulation, written separately from the library loops.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<float> out(m * n, 0.0f);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t = 0; t < k; ++t) out[i * n + j] += a.at(i, t) * b.at(t, j);
    return Tensor({m, n}, std::move(out));
}

bool same_bits(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace

TEST_CASE("tensor construction invariants") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f, 3.0f}), DimensionError);
    CHECK_THROWS_AS(Tensor({0}, {}), DimensionError);
    CHECK_THROWS_AS(Tensor({}, {}), DimensionError);
    CHECK_THROWS_AS(Tensor({1}, {NAN}), DomainError);
    CHECK_THROWS_AS(Tensor({1}, {INFINITY}), DomainError);
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.at(1, 2) == 6.0f);
}

TEST_CASE("matmul hand-evaluated example") {
    const Tensor a({2, 2}, {1, 2, 3, 4});
    const Tensor b({2, 2}, {5, 6, 7, 8});
    const Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 19.0f);
    CHECK(c.at(0, 1) == 22.0f);
    CHECK(c.at(1, 0) == 43.0f);
    CHECK(c.at(1, 1) == 50.0f);
}

TEST_CASE("matmul identity passes input through bit-for-bit") {
    const Tensor identity({2, 2}, {1, 0, 0, 1});
    const Tensor b = random_tensor({2, 2}, 42);
    CHECK(same_bits(matmul(identity, b), b));
}

TEST_CASE("matmul zero annihilates") {
    const Tensor zero = Tensor::zeros({3, 4});
    const Tensor b = random_tensor({4, 2}, 7);
    const Tensor c = matmul(zero, b);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == 0.0f);
}

TEST_CASE("matmul shape mismatch reports both shapes") {
    const Tensor a = random_tensor({2, 3}, 1);
    const Tensor b = random_tensor({4, 2}, 2);
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("matmul agrees with the naive oracle bit-for-bit") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 100);
        const std::size_t m = 1 + rng.below(16), k = 1 + rng.below(16), n = 1 + rng.below(16);
        const Tensor a = random_tensor({m, k}, seed * 3 + 1);
        const Tensor b = random_tensor({k, n}, seed * 3 + 2);
        CHECK(same_bits(matmul(a, b), naive_matmul(a, b)));
        CHECK(same_bits(ref::matmul(a, b), naive_matmul(a, b)));
    }
}

TEST_CASE("matmul is bit-deterministic across runs and thread counts") {
    const Tensor a = random_tensor({33, 17}, 5);
    const Tensor b = random_tensor({17, 29}, 6);
    const Tensor first = matmul(a, b);
    CHECK(same_bits(first, matmul(a, b)));
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const Tensor single = matmul(a, b);
    omp_set_num_threads(saved);
    CHECK(same_bits(first, single));
#endif
    CHECK(same_bits(first, ref::matmul(a, b)));
}

TEST_CASE("matmul associativity within FP tolerance") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const std::size_t m = 1 + rng.below(16), k = 1 + rng.below(16);
        const std::size_t n = 1 + rng.below(16), p = 1 + rng.below(16);
        const Tensor a = random_tensor({m, k}, seed * 7 + 1);
        const Tensor b = random_tensor({k, n}, seed * 7 + 2);
        const Tensor c = random_tensor({n, p}, seed * 7 + 3);
        CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <= 1e-3);
    }
}

TEST_CASE("softmax uniform row") {
    const Tensor x({1, 4}, {0, 0, 0, 0});
    const Tensor y = softmax_rows(x);
    for (std::size_t j = 0; j < 4; ++j) CHECK(y[j] == 0.25f);
}

TEST_CASE("softmax survives extreme values via max subtraction") {
    const Tensor x({1, 2}, {1000.0f, 0.0f});
    const Tensor y = softmax_rows(x);
    CHECK(y[0] == 1.0f);
    CHECK(y[1] == 0.0f);
}

TEST_CASE("softmax rows sum to one") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor x = random_tensor({8, 16}, seed + 50, 1e4);
        const Tensor y = softmax_rows(x);
        for (std::size_t i = 0; i < 8; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 16; ++j) {
                sum += static_cast<double>(y.at(i, j));
                CHECK(y.at(i, j) >= 0.0f);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
        CHECK(same_bits(y, ref::softmax_rows(x)));
    }
}

TEST_CASE("layer_norm constant slice collapses to beta") {
    const Tensor x = Tensor::full({2, 4}, 3.25f);
    const Tensor gamma = Tensor::full({4}, 1.0f);
    const Tensor beta = Tensor::zeros({4});
    const Tensor y = layer_norm(x, gamma, beta, 1e-6f);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0f);

    const Tensor beta2 = Tensor::full({4}, -2.5f);
    const Tensor gamma0 = Tensor::zeros({4});
    const Tensor y2 = layer_norm(random_tensor({2, 4}, 3), gamma0, beta2, 1e-6f);
    for (std::size_t i = 0; i < y2.size(); ++i) CHECK(y2[i] == -2.5f);
}

TEST_CASE("layer_norm hand case [1,3] -> [-1,1]") {
    const Tensor x({1, 2}, {1.0f, 3.0f});
    const Tensor y = layer_norm(x, Tensor::full({2}, 1.0f), Tensor::zeros({2}), 1e-12f);
    CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm standardizes slices") {
    const Tensor x = random_tensor({16, 32}, 11);
    const Tensor y = layer_norm(x, Tensor::full({32}, 1.0f), Tensor::zeros({32}), 1e-9f);
    for (std::size_t i = 0; i < 16; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 32; ++j) mean += y.at(i, j);
        mean /= 32.0;
        for (std::size_t j = 0; j < 32; ++j) {
            const double d = y.at(i, j) - mean;
            var += d * d;
        }
        var /= 32.0;
        CHECK(std::fabs(mean) <= 1e-5);
        CHECK(std::fabs(var - 1.0) <= 1e-3);
    }
}

TEST_CASE("layer_norm rejects mismatched gamma/beta and bad eps") {
    const Tensor x = random_tensor({2, 4}, 1);
    CHECK_THROWS_AS(layer_norm(x, Tensor::zeros({3}), Tensor::zeros({4}), 1e-6f), DimensionError);
    CHECK_THROWS_AS(layer_norm(x, Tensor::zeros({4}), Tensor::zeros({3}), 1e-6f), DimensionError);
    CHECK_THROWS_AS(layer_norm(x, Tensor::zeros({4}), Tensor::zeros({4}), 0.0f), DomainError);
}

TEST_CASE("gelu fixed points and tails") {
    const Tensor zero({1}, {0.0f});
    CHECK(gelu(zero)[0] == 0.0f);
    const Tensor six({1}, {6.0f});
    CHECK(std::fabs(gelu(six)[0] - 6.0f) <= 1e-3);
    // gelu(-x) = gelu(x) - x
    const Tensor pos({1}, {1.0f});
    const Tensor neg({1}, {-1.0f});
    CHECK(gelu(neg)[0] == doctest::Approx(gelu(pos)[0] - 1.0f).epsilon(1e-6));
}

TEST_CASE("mha single token returns v") {
    const Tensor q = random_tensor({1, 8}, 21);
    const Tensor k = random_tensor({1, 8}, 22);
    const Tensor v = random_tensor({1, 8}, 23);
    CHECK(same_bits(mha_attention(q, k, v, 2), v));
}

TEST_CASE("mha matches hand-evaluated single-head attention") {
    const Tensor q({2, 2}, {0.5f, -1.0f, 2.0f, 0.25f});
    const Tensor k({2, 2}, {1.0f, 0.0f, -0.5f, 1.5f});
    const Tensor v({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    const Tensor out = mha_attention(q, k, v, 1);
    const double inv = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < 2; ++i) {
        double s0 = (q.at(i, 0) * k.at(0, 0) + q.at(i, 1) * k.at(0, 1)) * inv;
        double s1 = (q.at(i, 0) * k.at(1, 0) + q.at(i, 1) * k.at(1, 1)) * inv;
        const double mx = std::max(s0, s1);
        const double e0 = std::exp(s0 - mx), e1 = std::exp(s1 - mx);
        const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
        for (std::size_t j = 0; j < 2; ++j) {
            const double expect = p0 * v.at(0, j) + p1 * v.at(1, j);
            CHECK(out.at(i, j) == doctest::Approx(expect).epsilon(1e-5));
        }
    }
}

TEST_CASE("mha is equivariant to joint permutation of k,v tokens") {
    const Tensor q = random_tensor({3, 8}, 31);
    const Tensor k = random_tensor({3, 8}, 32);
    const Tensor v = random_tensor({3, 8}, 33);
    // swap tokens 0 and 2 of both k and v
    auto swapped = [&](const Tensor& t) {
        std::vector<float> d = t.data();
        for (std::size_t j = 0; j < 8; ++j) std::swap(d[0 * 8 + j], d[2 * 8 + j]);
        return Tensor({3, 8}, std::move(d));
    };
    const Tensor a = mha_attention(q, k, v, 2);
    const Tensor b = mha_attention(q, swapped(k), swapped(v), 2);
    CHECK(max_abs_diff(a, b) <= 1e-5);
}

TEST_CASE("mha rejects indivisible head count") {
    const Tensor q = random_tensor({2, 6}, 1);
    CHECK_THROWS_AS(mha_attention(q, q, q, 4), ConfigError);
}
