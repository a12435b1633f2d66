#include "cwc/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cwc/errors.hpp"
#include "cwc/rng.hpp"

namespace cwc {

namespace {

// Fixed reduction granularity. Partial FP64 sums are produced per chunk and
// combined in ascending chunk order, so results do not depend on how many
// threads ran the chunk loop.
constexpr std::size_t kChunk = 4096;

void check_finite(std::span<const float> values) {
    if (values.empty()) throw DomainError("clustering input is empty");
    for (float v : values)
        if (!std::isfinite(v)) throw DomainError("clustering input holds a non-finite value");
}

struct SortedValues {
    std::vector<float> vals;                // ascending
    std::vector<std::uint32_t> sorted_pos;  // original index -> position in vals
    std::size_t distinct = 0;
};

SortedValues sort_values(std::span<const float> values) {
    const std::size_t n = values.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return values[a] < values[b] || (values[a] == values[b] && a < b);
    });
    SortedValues out;
    out.vals.resize(n);
    out.sorted_pos.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        out.vals[r] = values[order[r]];
        out.sorted_pos[order[r]] = static_cast<std::uint32_t>(r);
    }
    out.distinct = 1;
    for (std::size_t r = 1; r < n; ++r)
        if (out.vals[r] != out.vals[r - 1]) ++out.distinct;
    return out;
}

// Index of the nearest centroid, ties to the lower index. Centroids are
// sorted ascending; distances away from v are monotone under rounding, so an
// equal-distance run is contiguous and the walk below terminates immediately
// in the common case.
std::size_t nearest_idx(const std::vector<double>& c, double v) {
    const auto it = std::lower_bound(c.begin(), c.end(), v);
    std::size_t idx;
    if (it == c.begin()) {
        idx = 0;
    } else if (it == c.end()) {
        idx = c.size() - 1;
    } else {
        const std::size_t hi = static_cast<std::size_t>(it - c.begin());
        idx = (v - c[hi - 1] <= c[hi] - v) ? hi - 1 : hi;
    }
    const double dmin = std::fabs(v - c[idx]);
    while (idx > 0 && std::fabs(v - c[idx - 1]) <= dmin) --idx;
    return idx;
}

struct PassResult {
    ClusterAssignment asg;
    std::vector<double> sum;        // per-cluster value sums
    std::vector<std::uint64_t> cnt; // per-cluster sizes
    double sse = 0.0;
};

PassResult assign_and_stats(const std::vector<float>& vals, const std::vector<double>& centroids) {
    const std::size_t n = vals.size();
    const std::size_t k = centroids.size();
    const std::size_t nchunks = (n + kChunk - 1) / kChunk;
    PassResult out;
    out.asg.resize(n);
    std::vector<double> csum(nchunks * k, 0.0);
    std::vector<std::uint64_t> ccnt(nchunks * k, 0);
    std::vector<double> csse(nchunks, 0.0);
#pragma omp parallel for schedule(static) if (nchunks > 1)
    for (std::size_t ch = 0; ch < nchunks; ++ch) {
        const std::size_t lo = ch * kChunk;
        const std::size_t hi = std::min(lo + kChunk, n);
        double* sum = csum.data() + ch * k;
        std::uint64_t* cnt = ccnt.data() + ch * k;
        double sse = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double v = static_cast<double>(vals[i]);
            const std::size_t idx = nearest_idx(centroids, v);
            out.asg[i] = static_cast<std::uint8_t>(idx);
            sum[idx] += v;
            cnt[idx] += 1;
            const double d = v - centroids[idx];
            sse += d * d;
        }
        csse[ch] = sse;
    }
    out.sum.assign(k, 0.0);
    out.cnt.assign(k, 0);
    out.sse = 0.0;
    for (std::size_t ch = 0; ch < nchunks; ++ch) {
        for (std::size_t j = 0; j < k; ++j) {
            out.sum[j] += csum[ch * k + j];
            out.cnt[j] += ccnt[ch * k + j];
        }
        out.sse += csse[ch];
    }
    return out;
}

// Per-cluster sums/counts for a fixed assignment, chunked exactly like
// assign_and_stats so means computed from either path agree bitwise.
void stats_for_assignment(const std::vector<float>& vals, const ClusterAssignment& asg,
                          std::size_t k, std::vector<double>& sum,
                          std::vector<std::uint64_t>& cnt) {
    const std::size_t n = vals.size();
    const std::size_t nchunks = (n + kChunk - 1) / kChunk;
    std::vector<double> csum(nchunks * k, 0.0);
    std::vector<std::uint64_t> ccnt(nchunks * k, 0);
    for (std::size_t ch = 0; ch < nchunks; ++ch) {
        const std::size_t lo = ch * kChunk;
        const std::size_t hi = std::min(lo + kChunk, n);
        for (std::size_t i = lo; i < hi; ++i) {
            csum[ch * k + asg[i]] += static_cast<double>(vals[i]);
            ccnt[ch * k + asg[i]] += 1;
        }
    }
    sum.assign(k, 0.0);
    cnt.assign(k, 0);
    for (std::size_t ch = 0; ch < nchunks; ++ch)
        for (std::size_t j = 0; j < k; ++j) {
            sum[j] += csum[ch * k + j];
            cnt[j] += ccnt[ch * k + j];
        }
}

// k-means++ over an explicit value array with an explicit RNG.
std::vector<float> kmeanspp(const std::vector<float>& vals, std::size_t k, Rng& rng) {
    const std::size_t n = vals.size();
    std::vector<float> seeds;
    seeds.reserve(k);
    std::vector<double> d2(n);
    const float first = vals[rng.below(n)];
    seeds.push_back(first);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(vals[i]) - static_cast<double>(first);
        d2[i] = d * d;
    }
    while (seeds.size() < k) {
        double total = 0.0;
        for (double w : d2) total += w;
        if (!(total > 0.0))
            throw InfeasibleError("k-means++ ran out of distinct candidate seeds");
        const double r = rng.unit_double() * total;
        double cum = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            cum += d2[i];
            if (cum > r) {
                pick = i;
                break;
            }
        }
        if (pick == n) {  // r landed on the accumulated rounding tail
            pick = n - 1;
            for (std::size_t i = n; i-- > 0;)
                if (d2[i] > 0.0) {
                    pick = i;
                    break;
                }
        }
        const float s = vals[pick];
        seeds.push_back(s);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(vals[i]) - static_cast<double>(s);
            d2[i] = std::min(d2[i], d * d);
        }
    }
    return seeds;
}

// Picks up to `need` reseed values: points farthest from their assigned
// centroid, distinct from each other and from `taken`. Ties go to the lower
// point index.
std::vector<double> farthest_points(const std::vector<float>& vals, const ClusterAssignment& asg,
                                    const std::vector<double>& centroids, std::size_t need,
                                    std::vector<double> taken) {
    std::vector<double> out;
    for (std::size_t round = 0; round < need; ++round) {
        double best_d2 = -1.0;
        double best_v = 0.0;
        bool found = false;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double v = static_cast<double>(vals[i]);
            if (std::find(taken.begin(), taken.end(), v) != taken.end()) continue;
            const double d = v - centroids[asg[i]];
            const double d2 = d * d;
            if (d2 > best_d2) {
                best_d2 = d2;
                best_v = v;
                found = true;
            }
        }
        if (!found || best_d2 <= 0.0) break;
        out.push_back(best_v);
        taken.push_back(best_v);
    }
    return out;
}

struct IterationState {
    std::vector<double> centroids;
    ClusterAssignment asg;
    double sse = std::numeric_limits<double>::infinity();
};

struct RestartOutcome {
    IterationState best;
    std::vector<double> trace;
    std::size_t iterations = 0;
};

RestartOutcome run_restart(const std::vector<float>& vals, const ClusteringConfig& cfg,
                           std::uint64_t restart_seed) {
    Rng rng(restart_seed);
    std::vector<float> seeds = kmeanspp(vals, cfg.clusters, rng);
    std::vector<double> centroids(seeds.begin(), seeds.end());
    std::sort(centroids.begin(), centroids.end());

    RestartOutcome out;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        PassResult pass = assign_and_stats(vals, centroids);
        out.iterations = iter + 1;
        if (pass.sse < out.best.sse) {
            out.best.centroids = centroids;
            out.best.asg = pass.asg;
            out.best.sse = pass.sse;
        }
        if (pass.sse <= prev) out.trace.push_back(pass.sse);
        if (iter > 0) {
            const double improvement = prev - pass.sse;
            if (!(improvement > cfg.rel_tol * prev)) break;
        }
        prev = pass.sse;

        // Mean update; empty clusters are reseeded at the farthest point.
        std::vector<double> next;
        next.reserve(centroids.size());
        std::size_t empties = 0;
        for (std::size_t j = 0; j < centroids.size(); ++j) {
            if (pass.cnt[j] > 0)
                next.push_back(pass.sum[j] / static_cast<double>(pass.cnt[j]));
            else
                ++empties;
        }
        if (empties > 0) {
            for (double v : farthest_points(vals, pass.asg, centroids, empties, next))
                next.push_back(v);
        }
        std::sort(next.begin(), next.end());
        // Two means can collide numerically; keep one and backfill if possible.
        next.erase(std::unique(next.begin(), next.end()), next.end());
        while (next.size() < centroids.size()) {
            std::vector<double> extra =
                farthest_points(vals, pass.asg, centroids, centroids.size() - next.size(), next);
            if (extra.empty()) break;
            next.insert(next.end(), extra.begin(), extra.end());
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
        }
        if (next == centroids) break;
        centroids = std::move(next);
    }
    return out;
}

// Casts FP64 centroids to the FP32 codebook, merges cast collisions, and
// recomputes assignment + SSE against the final table. Shared by Lloyd and
// the DP oracle so equal partitions produce bit-equal results.
void finalize_codebook(const std::vector<float>& vals, const std::vector<double>& centroids,
                       Codebook& cb_out, ClusterAssignment& asg_out, double& sse_out) {
    std::vector<float> floats;
    floats.reserve(centroids.size());
    for (double c : centroids) floats.push_back(static_cast<float>(c));
    std::sort(floats.begin(), floats.end());
    floats.erase(std::unique(floats.begin(), floats.end()), floats.end());
    cb_out = Codebook(floats);
    const std::vector<double> cds(floats.begin(), floats.end());
    PassResult pass = assign_and_stats(vals, cds);
    asg_out = std::move(pass.asg);
    sse_out = pass.sse;
}

// Self-consistent centroids for a fixed assignment: per-cluster means of the
// clusters that are actually populated.
std::vector<double> means_of_assignment(const std::vector<float>& vals,
                                        const ClusterAssignment& asg, std::size_t k) {
    std::vector<double> sum;
    std::vector<std::uint64_t> cnt;
    stats_for_assignment(vals, asg, k, sum, cnt);
    std::vector<double> means;
    means.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
        if (cnt[j] > 0) means.push_back(sum[j] / static_cast<double>(cnt[j]));
    return means;
}

// Exact codebook for inputs whose distinct-value count equals k.
KmeansResult exact_result(const SortedValues& sv) {
    std::vector<float> distinct;
    distinct.reserve(sv.distinct);
    for (std::size_t r = 0; r < sv.vals.size(); ++r)
        if (r == 0 || sv.vals[r] != sv.vals[r - 1]) distinct.push_back(sv.vals[r]);
    KmeansResult res;
    res.codebook = Codebook(distinct);
    res.assignment.resize(sv.vals.size());
    std::vector<std::uint8_t> rank_of(sv.vals.size());
    std::uint8_t rank = 0;
    for (std::size_t r = 0; r < sv.vals.size(); ++r) {
        if (r > 0 && sv.vals[r] != sv.vals[r - 1]) ++rank;
        rank_of[r] = rank;
    }
    for (std::size_t i = 0; i < sv.vals.size(); ++i)
        res.assignment[i] = rank_of[sv.sorted_pos[i]];
    res.sse = 0.0;
    res.exact = true;
    res.sse_trace = {0.0};
    return res;
}

}  // namespace

std::vector<float> kmeanspp_init(std::span<const float> values, std::size_t k,
                                 std::uint64_t seed) {
    check_finite(values);
    if (k == 0) throw ConfigError("k-means++ needs k >= 1");
    const std::size_t distinct = count_distinct(values);
    if (k > distinct)
        throw InfeasibleError("k=" + std::to_string(k) + " exceeds " + std::to_string(distinct) +
                              " distinct values");
    std::vector<float> vals(values.begin(), values.end());
    Rng rng(seed);
    return kmeanspp(vals, k, rng);
}

KmeansResult lloyd_kmeans_1d(std::span<const float> values, const ClusteringConfig& cfg) {
    cfg.validate();
    check_finite(values);
    const SortedValues sv = sort_values(values);
    if (cfg.clusters > sv.distinct)
        throw InfeasibleError("k=" + std::to_string(cfg.clusters) + " exceeds " +
                              std::to_string(sv.distinct) + " distinct values");
    if (cfg.clusters == sv.distinct) return exact_result(sv);

    std::vector<RestartOutcome> outcomes(cfg.restarts);
#pragma omp parallel for schedule(dynamic, 1) if (cfg.restarts > 1)
    for (std::size_t r = 0; r < cfg.restarts; ++r)
        outcomes[r] = run_restart(sv.vals, cfg, Rng::derive(cfg.seed, r));

    std::size_t winner = 0;
    for (std::size_t r = 1; r < cfg.restarts; ++r)
        if (outcomes[r].best.sse < outcomes[winner].best.sse) winner = r;
    RestartOutcome& won = outcomes[winner];

    // Half-step to self-consistency, then freeze to FP32.
    const std::vector<double> means =
        means_of_assignment(sv.vals, won.best.asg, won.best.centroids.size());
    KmeansResult res;
    ClusterAssignment asg_sorted;
    finalize_codebook(sv.vals, means, res.codebook, asg_sorted, res.sse);
    res.assignment.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        res.assignment[i] = asg_sorted[sv.sorted_pos[i]];
    res.sse_trace = std::move(won.trace);
    res.iterations = won.iterations;
    return res;
}

DpResult optimal_kmeans_1d_dp(std::span<const float> values, std::size_t k) {
    check_finite(values);
    if (k == 0) throw ConfigError("dp k-means needs k >= 1");
    const SortedValues sv = sort_values(values);
    if (k > sv.distinct)
        throw InfeasibleError("k=" + std::to_string(k) + " exceeds " + std::to_string(sv.distinct) +
                              " distinct values");
    const std::size_t n = sv.vals.size();
    std::vector<double> pre(n + 1, 0.0), pre2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(sv.vals[i]);
        pre[i + 1] = pre[i] + v;
        pre2[i + 1] = pre2[i] + v * v;
    }
    // Cost of grouping sorted[i..j] around its mean; clamped against the
    // cancellation of the prefix identity on constant runs.
    auto cost = [&](std::size_t i, std::size_t j) {
        const double s = pre[j + 1] - pre[i];
        const double ss = pre2[j + 1] - pre2[i];
        const double m = static_cast<double>(j - i + 1);
        return std::max(0.0, ss - (s * s) / m);
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev_row(n, 0.0), row(n, 0.0);
    std::vector<std::vector<std::uint32_t>> from(k, std::vector<std::uint32_t>(n, 0));
    for (std::size_t j = 0; j < n; ++j) prev_row[j] = cost(0, j);
    for (std::size_t c = 1; c < k; ++c) {
        for (std::size_t j = 0; j < n; ++j) {
            double best = inf;
            std::uint32_t best_t = 0;
            if (j >= c) {
                // first index of cluster c ranges over [c, j]
                for (std::size_t t = c; t <= j; ++t) {
                    const double cand = prev_row[t - 1] + cost(t, j);
                    if (cand < best) {
                        best = cand;
                        best_t = static_cast<std::uint32_t>(t);
                    }
                }
            }
            row[j] = best;
            from[c][j] = best_t;
        }
        std::swap(prev_row, row);
    }

    // Backtrack boundaries into an assignment over the sorted order.
    ClusterAssignment asg(n);
    std::size_t end = n - 1;
    for (std::size_t c = k; c-- > 0;) {
        const std::size_t start = (c == 0) ? 0 : from[c][end];
        for (std::size_t i = start; i <= end; ++i) asg[i] = static_cast<std::uint8_t>(c);
        if (c == 0) break;
        end = start - 1;
    }

    const std::vector<double> means = means_of_assignment(sv.vals, asg, k);
    DpResult res;
    ClusterAssignment unused;
    finalize_codebook(sv.vals, means, res.codebook, unused, res.sse);
    return res;
}

double assignment_sse(std::span<const float> values, const ClusterAssignment& assignment,
                      const Codebook& cb) {
    if (values.size() != assignment.size())
        throw DimensionError("assignment_sse: value/assignment length mismatch");
    for (std::uint8_t ix : assignment)
        if (ix >= cb.size()) throw CorruptionError("assignment index out of codebook range");
    const std::size_t n = values.size();
    const std::size_t nchunks = (n + kChunk - 1) / kChunk;
    std::vector<double> csse(nchunks, 0.0);
#pragma omp parallel for schedule(static) if (nchunks > 1)
    for (std::size_t ch = 0; ch < nchunks; ++ch) {
        const std::size_t lo = ch * kChunk;
        const std::size_t hi = std::min(lo + kChunk, n);
        double sse = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double d =
                static_cast<double>(values[i]) - static_cast<double>(cb[assignment[i]]);
            sse += d * d;
        }
        csse[ch] = sse;
    }
    double total = 0.0;
    for (double s : csse) total += s;
    return total;
}

std::size_t count_distinct(std::span<const float> values) {
    std::vector<float> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace cwc
