#include "cwc/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cwc {

namespace {

// Accumulates c[i][j] += sum_{t in [t0,t1)} a[i][t] * w_rows[(t-t0)*n + j]
// for one output row i. Both the dense and the clustered path funnel through
// this loop, which is what makes their outputs bit-identical: the exact same
// multiply/add sequence runs on the exact same values.
inline void accumulate_row_strip(float* c_row, const float* a_row, const float* w_rows,
                                 std::size_t n, std::size_t t0, std::size_t t1) {
    for (std::size_t t = t0; t < t1; ++t) {
        const float av = a_row[t];
        const float* w_row = w_rows + (t - t0) * n;
        for (std::size_t j = 0; j < n; ++j) c_row[j] += av * w_row[j];
    }
}

void check_matmul_shapes(const Tensor& a, std::size_t w_rows, std::size_t /*w_cols*/,
                         const char* who, const std::string& w_shape) {
    if (a.rank() != 2)
        throw DimensionError(std::string(who) + ": left operand must be rank 2, got " +
                             a.shape_str());
    if (a.dim(1) != w_rows)
        throw DimensionError(std::string(who) + ": inner dimensions differ, " + a.shape_str() +
                             " vs " + w_shape);
}

std::string shape2_str(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

// Dequantizes rows [t0,t1) of a [k x n] clustered weight matrix into `buf`.
void dequant_strip(float* buf, const ClusteredTensor& w, const Codebook& cb, std::size_t n,
                   std::size_t t0, std::size_t t1) {
    const std::size_t len = cb.size();
    for (std::size_t t = t0; t < t1; ++t)
        for (std::size_t j = 0; j < n; ++j) {
            const std::uint8_t ix = w.indices[t * n + j];
            if (ix >= len)
                throw CorruptionError("clustered weight '" + w.name + "': index " +
                                      std::to_string(ix) + " out of range");
            buf[(t - t0) * n + j] = cb[ix];
        }
}

constexpr std::size_t kStripRows = 64;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (b.rank() != 2) throw DimensionError("matmul: right operand must be rank 2, got " + b.shape_str());
    check_matmul_shapes(a, b.dim(0), b.dim(1), "matmul", b.shape_str());
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c = Tensor::zeros({m, n});
    float* cd = c.mutable_ptr();
    const float* ad = a.ptr();
    const float* bd = b.ptr();
#pragma omp parallel for schedule(static) if (m > 1)
    for (std::size_t i = 0; i < m; ++i)
        accumulate_row_strip(cd + i * n, ad + i * k, bd, n, 0, k);
    return c;
}

Tensor clustered_matmul(const Tensor& x, const ClusteredTensor& w, const Codebook& cb) {
    if (w.shape.size() != 2)
        throw DimensionError("clustered_matmul: weight must be rank 2, got " +
                             std::to_string(w.shape.size()) + " dims");
    const std::size_t k = w.shape[0], n = w.shape[1];
    check_matmul_shapes(x, k, n, "clustered_matmul", shape2_str(k, n));
    if (w.indices.size() != k * n)
        throw CorruptionError("clustered weight '" + w.name + "': index buffer size mismatch");
    const std::size_t m = x.dim(0);
    Tensor c = Tensor::zeros({m, n});
    float* cd = c.mutable_ptr();
    const float* xd = x.ptr();

    // Resolve at most kStripRows weight rows at a time; never a full dense copy.
    std::vector<float> strip(std::min(kStripRows, k) * n);
    for (std::size_t t0 = 0; t0 < k; t0 += kStripRows) {
        const std::size_t t1 = std::min(t0 + kStripRows, k);
        dequant_strip(strip.data(), w, cb, n, t0, t1);
#pragma omp parallel for schedule(static) if (m > 1)
        for (std::size_t i = 0; i < m; ++i)
            accumulate_row_strip(cd + i * n, xd + i * k, strip.data(), n, t0, t1);
    }
    return c;
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("softmax_rows: input must be rank 2, got " + x.shape_str());
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor y = Tensor::zeros({m, n});
    float* yd = y.mutable_ptr();
    const float* xd = x.ptr();
#pragma omp parallel for schedule(static) if (m > 1)
    for (std::size_t i = 0; i < m; ++i) {
        const float* row = xd + i * n;
        float mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        float* out = yd + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = std::exp(row[j] - mx);
            sum += static_cast<double>(out[j]);
        }
        const float inv = static_cast<float>(1.0 / sum);
        for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
    }
    return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    if (!(eps > 0.0f)) throw DomainError("layer_norm: eps must be > 0");
    const std::size_t d = x.shape().back();
    if (gamma.rank() != 1 || gamma.dim(0) != d)
        throw DimensionError("layer_norm: gamma length " + gamma.shape_str() +
                             " does not match last axis " + std::to_string(d));
    if (beta.rank() != 1 || beta.dim(0) != d)
        throw DimensionError("layer_norm: beta length " + beta.shape_str() +
                             " does not match last axis " + std::to_string(d));
    const std::size_t slices = x.size() / d;
    Tensor y = Tensor::zeros(x.shape());
    float* yd = y.mutable_ptr();
    const float* xd = x.ptr();
    const float* g = gamma.ptr();
    const float* b = beta.ptr();
    for (std::size_t s = 0; s < slices; ++s) {
        const float* row = xd + s * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += static_cast<double>(row[j]);
        mean /= static_cast<double>(d);
        double var = 0.0;  // population variance
        for (std::size_t j = 0; j < d; ++j) {
            const double dv = static_cast<double>(row[j]) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        float* out = yd + s * d;
        for (std::size_t j = 0; j < d; ++j)
            out[j] = static_cast<float>((static_cast<double>(row[j]) - mean) * inv) * g[j] + b[j];
    }
    return y;
}

Tensor gelu(const Tensor& x) {
    Tensor y = Tensor::zeros(x.shape());
    float* yd = y.mutable_ptr();
    const float* xd = x.ptr();
    const std::size_t n = x.size();
    constexpr double kSqrt2OverPi = 0.7978845608028654;
#pragma omp parallel for schedule(static) if (n > 4096)
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(xd[i]);
        yd[i] = static_cast<float>(0.5 * v *
                                   (1.0 + std::tanh(kSqrt2OverPi * (v + 0.044715 * v * v * v))));
    }
    return y;
}

namespace {

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t w) {
    const std::size_t s = x.dim(0), d = x.dim(1);
    Tensor out = Tensor::zeros({s, w});
    for (std::size_t i = 0; i < s; ++i)
        std::memcpy(out.mutable_ptr() + i * w, x.ptr() + i * d + c0, w * sizeof(float));
    return out;
}

Tensor transpose(const Tensor& x) {
    const std::size_t r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.mutable_ptr()[j * r + i] = x.ptr()[i * c + j];
    return out;
}

Tensor scale(const Tensor& x, float f) {
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.mutable_ptr()[i] = x.ptr()[i] * f;
    return out;
}

}  // namespace

Tensor mha_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
    if (q.rank() != 2 || !q.same_shape(k) || !q.same_shape(v))
        throw DimensionError("mha_attention: q,k,v must share a [s x d] shape");
    if (heads == 0) throw ConfigError("mha_attention: heads must be >= 1");
    const std::size_t s = q.dim(0), d = q.dim(1);
    if (d % heads != 0)
        throw ConfigError("mha_attention: width " + std::to_string(d) +
                          " not divisible by heads " + std::to_string(heads));
    const std::size_t dh = d / heads;
    const float inv_sqrt = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)));

    Tensor out = Tensor::zeros({s, d});
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor qh = slice_cols(q, h * dh, dh);
        const Tensor kh = slice_cols(k, h * dh, dh);
        const Tensor vh = slice_cols(v, h * dh, dh);
        const Tensor probs = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
        const Tensor ctx = matmul(probs, vh);
        for (std::size_t i = 0; i < s; ++i)
            std::memcpy(out.mutable_ptr() + i * d + h * dh, ctx.ptr() + i * dh, dh * sizeof(float));
    }
    return out;
}

Tensor dequantize_tensor(const ClusteredTensor& t, const Codebook& cb) {
    t.validate(cb.size());
    std::vector<float> vals(t.indices.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = cb[t.indices[i]];
    return Tensor(t.shape, std::move(vals));
}

namespace ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (b.rank() != 2) throw DimensionError("matmul: right operand must be rank 2, got " + b.shape_str());
    check_matmul_shapes(a, b.dim(0), b.dim(1), "matmul", b.shape_str());
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (std::size_t t = 0; t < k; ++t) acc += a.ptr()[i * k + t] * b.ptr()[t * n + j];
            c.mutable_ptr()[i * n + j] = acc;
        }
    return c;
}

Tensor clustered_matmul(const Tensor& x, const ClusteredTensor& w, const Codebook& cb) {
    if (w.shape.size() != 2)
        throw DimensionError("clustered_matmul: weight must be rank 2");
    const std::size_t k = w.shape[0], n = w.shape[1];
    check_matmul_shapes(x, k, n, "clustered_matmul", shape2_str(k, n));
    w.validate(cb.size());
    const std::size_t m = x.dim(0);
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (std::size_t t = 0; t < k; ++t)
                acc += x.ptr()[i * k + t] * cb[w.indices[t * n + j]];
            c.mutable_ptr()[i * n + j] = acc;
        }
    return c;
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("softmax_rows: input must be rank 2, got " + x.shape_str());
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor y = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const float* row = x.ptr() + i * n;
        float mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        float* out = y.mutable_ptr() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = std::exp(row[j] - mx);
            sum += static_cast<double>(out[j]);
        }
        const float inv = static_cast<float>(1.0 / sum);
        for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
    }
    return y;
}

}  // namespace ref

}  // namespace cwc
