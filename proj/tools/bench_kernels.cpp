// Compares the OpenMP kernels against the serial reference implementations:
// same bits required, wall-clock ratio reported.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cwc/codebook.hpp"
#include "cwc/kernels.hpp"
#include "cwc/kmeans.hpp"
#include "cwc/rng.hpp"

using namespace cwc;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
    Rng rng(seed);
    std::size_t n = Tensor::checked_elem_count(shape);
    std::vector<float> data(n);
    for (auto& v : data) v = static_cast<float>(rng.symmetric(1.0));
    return Tensor(std::move(shape), std::move(data));
}

ClusteredTensor random_clustered(std::size_t k, std::size_t n, std::size_t c,
                                 std::uint64_t seed, Codebook& cb_out) {
    Rng rng(seed);
    std::vector<float> centroids;
    while (centroids.size() < c) {
        const float v = static_cast<float>(rng.symmetric(1.0));
        centroids.push_back(v);
        std::sort(centroids.begin(), centroids.end());
        centroids.erase(std::unique(centroids.begin(), centroids.end()), centroids.end());
    }
    cb_out = Codebook(centroids);
    ClusteredTensor ct;
    ct.name = "bench";
    ct.shape = {k, n};
    ct.indices.resize(k * n);
    for (auto& ix : ct.indices) ix = static_cast<std::uint8_t>(rng.below(c));
    return ct;
}

bool same_bits(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
}

template <typename F>
double time_best_of(F&& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_s();
        fn();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

void report(const char* name, double flops, double t_serial, double t_parallel, bool bits_ok) {
    std::printf("%-24s serial %8.2f ms (%6.2f GFLOP/s)   omp %8.2f ms (%6.2f GFLOP/s)   "
                "speedup %.2fx   bits %s\n",
                name, t_serial * 1e3, flops / t_serial * 1e-9, t_parallel * 1e3,
                flops / t_parallel * 1e-9, t_serial / t_parallel, bits_ok ? "identical" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t dim = 512;
    int reps = 3;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--quick") {
            dim = 128;
            reps = 1;
        } else if (arg == "--size" && i + 1 < argc) {
            dim = std::stoul(argv[++i]);
        } else if (arg == "--reps" && i + 1 < argc) {
            reps = std::stoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--quick] [--size N] [--reps R]\n", argv[0]);
            return 2;
        }
    }
#ifdef _OPENMP
    std::printf("openmp: %d threads\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled at build time\n");
#endif

    const Tensor a = random_tensor({dim, dim}, 1);
    const Tensor b = random_tensor({dim, dim}, 2);
    const double mm_flops = 2.0 * dim * dim * dim;

    Tensor out_serial, out_parallel;
    const double ts = time_best_of([&] { out_serial = ref::matmul(a, b); }, reps);
    const double tp = time_best_of([&] { out_parallel = matmul(a, b); }, reps);
    report("matmul", mm_flops, ts, tp, same_bits(out_serial, out_parallel));

    Codebook cb;
    const ClusteredTensor w = random_clustered(dim, dim, 256, 3, cb);
    const double tcs = time_best_of([&] { out_serial = ref::clustered_matmul(a, w, cb); }, reps);
    const double tcp = time_best_of([&] { out_parallel = clustered_matmul(a, w, cb); }, reps);
    report("clustered_matmul", mm_flops, tcs, tcp, same_bits(out_serial, out_parallel));

    const Tensor sm = random_tensor({dim * 8, dim}, 4);
    const double sm_flops = 5.0 * sm.size();
    const double ss = time_best_of([&] { out_serial = ref::softmax_rows(sm); }, reps);
    const double sp = time_best_of([&] { out_parallel = softmax_rows(sm); }, reps);
    report("softmax_rows", sm_flops, ss, sp, same_bits(out_serial, out_parallel));

    // Lloyd on one thread vs all threads; same bits required either way.
    {
        Rng rng(5);
        std::vector<float> vals(65536);
        for (auto& v : vals) v = static_cast<float>(rng.gaussian());
        ClusteringConfig cfg;
        cfg.clusters = 64;
        cfg.restarts = 4;
        cfg.seed = 7;
        KmeansResult r1, rn;
#ifdef _OPENMP
        const int max_threads = omp_get_max_threads();
        omp_set_num_threads(1);
#endif
        const double t1 = time_best_of([&] { r1 = lloyd_kmeans_1d(vals, cfg); }, reps);
#ifdef _OPENMP
        omp_set_num_threads(max_threads);
#endif
        const double tn = time_best_of([&] { rn = lloyd_kmeans_1d(vals, cfg); }, reps);
        const bool ok = r1.codebook.centroids() == rn.codebook.centroids() &&
                        r1.assignment == rn.assignment && r1.sse == rn.sse;
        std::printf("%-24s 1 thread %6.2f ms   all threads %6.2f ms   speedup %.2fx   bits %s\n",
                    "lloyd_kmeans_1d", t1 * 1e3, tn * 1e3, t1 / tn, ok ? "identical" : "DIFFER");
        if (!ok) return 1;
    }

    if (!same_bits(out_serial, out_parallel)) return 1;
    return 0;
}
