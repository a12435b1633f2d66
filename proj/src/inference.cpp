#include "cwc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cwc/errors.hpp"
#include "cwc/kernels.hpp"
#include "cwc/rng.hpp"

namespace cwc {

namespace {

constexpr float kLayerNormEps = 1e-6f;

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.mutable_ptr()[i] = a[i] + b[i];
    return out;
}

Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (bias.rank() != 1 || bias.dim(0) != n)
        throw DimensionError("bias length does not match row width");
    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.mutable_ptr()[i * n + j] = x.at(i, j) + bias[j];
    return out;
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t w) {
    const std::size_t s = x.dim(0), d = x.dim(1);
    Tensor out = Tensor::zeros({s, w});
    for (std::size_t i = 0; i < s; ++i)
        std::memcpy(out.mutable_ptr() + i * w, x.ptr() + i * d + c0, w * sizeof(float));
    return out;
}

Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t rows) {
    const std::size_t n = x.dim(1);
    Tensor out = Tensor::zeros({rows, n});
    std::memcpy(out.mutable_ptr(), x.ptr() + r0 * n, rows * n * sizeof(float));
    return out;
}

// Weight dispatch: the one place where dense and clustered models diverge.
Tensor apply_weight(const Model& m, const Tensor& x, const std::string& name) {
    const TensorStorage& s = m.entry(name);
    if (is_dense(s)) return matmul(x, std::get<Tensor>(s));
    const ClusteredTensor& ct = std::get<ClusteredTensor>(s);
    return clustered_matmul(x, ct, m.codebook_for(ct));
}

Tensor linear(const Model& m, const Tensor& x, const std::string& prefix) {
    return add_bias_rows(apply_weight(m, x, prefix + ".weight"), m.dense(prefix + ".bias"));
}

Tensor norm(const Model& m, const Tensor& x, const std::string& prefix) {
    return layer_norm(x, m.dense(prefix + ".gamma"), m.dense(prefix + ".beta"), kLayerNormEps);
}

// [n,H,W,ch] -> [n*patches, patch_dim]; patches row-major over the grid,
// each patch flattened (dy, dx, channel).
Tensor patchify(const Tensor& images, const VitHyperParams& hp) {
    const std::size_t n = images.dim(0);
    const std::size_t ps = hp.patch_size, grid = hp.patches_per_side(), ch = hp.channels;
    const std::size_t np = hp.num_patches(), pd = hp.patch_dim();
    const std::size_t img_stride = hp.image_size * hp.image_size * ch;
    Tensor out = Tensor::zeros({n * np, pd});
    float* od = out.mutable_ptr();
    const float* id = images.ptr();
    for (std::size_t img = 0; img < n; ++img) {
        const float* base = id + img * img_stride;
        for (std::size_t pr = 0; pr < grid; ++pr)
            for (std::size_t pc = 0; pc < grid; ++pc) {
                float* dst = od + (img * np + pr * grid + pc) * pd;
                for (std::size_t dy = 0; dy < ps; ++dy)
                    for (std::size_t dx = 0; dx < ps; ++dx)
                        for (std::size_t c = 0; c < ch; ++c)
                            *dst++ = base[((pr * ps + dy) * hp.image_size + (pc * ps + dx)) * ch + c];
            }
    }
    return out;
}

}  // namespace

SyntheticDataset gen_dataset(std::uint64_t seed, std::size_t n, std::size_t image_size,
                             std::size_t channels, std::size_t classes) {
    if (n == 0 || image_size == 0 || channels == 0)
        throw ConfigError("dataset needs n, image size and channels >= 1");
    SyntheticDataset ds;
    ds.seed = seed;
    Rng rng(seed);
    std::vector<float> data(n * image_size * image_size * channels);
    for (auto& v : data) v = rng.unit_float();
    ds.images = Tensor({n, image_size, image_size, channels}, std::move(data));
    if (classes > 0) {
        Rng lrng(Rng::derive(seed, 0x1abe15));
        ds.labels.resize(n);
        for (auto& l : ds.labels) l = static_cast<std::uint32_t>(lrng.below(classes));
    }
    return ds;
}

SyntheticDataset dataset_from_blob(const std::vector<float>& blob, std::size_t image_size,
                                   std::size_t channels) {
    const std::size_t per = image_size * image_size * channels;
    if (per == 0 || blob.size() % per != 0 || blob.empty())
        throw DimensionError("image blob size " + std::to_string(blob.size()) +
                             " is not a multiple of " + std::to_string(per) + " floats");
    SyntheticDataset ds;
    ds.images = Tensor({blob.size() / per, image_size, image_size, channels}, blob);
    return ds;
}

Tensor vit_forward(const Model& m, const Tensor& images) {
    const VitHyperParams& hp = m.graph.vit_params();
    m.validate();
    Tensor batch = images;
    if (batch.rank() == 3)
        batch = Tensor({1, images.dim(0), images.dim(1), images.dim(2)}, images.data());
    if (batch.rank() != 4 || batch.dim(1) != hp.image_size || batch.dim(2) != hp.image_size ||
        batch.dim(3) != hp.channels)
        throw DimensionError("input " + batch.shape_str() + " does not match a " +
                             std::to_string(hp.image_size) + "x" + std::to_string(hp.image_size) +
                             "x" + std::to_string(hp.channels) + " model");
    const std::size_t n = batch.dim(0), s = hp.seq_len(), d = hp.dim, np = hp.num_patches();

    const Tensor embedded = linear(m, patchify(batch, hp), "patch_embed");

    // Tokens: class token first, then the embedded patches, plus positional
    // embeddings; every image contributes s consecutive rows.
    const Tensor& cls = m.dense("cls_token");
    const Tensor& pos = m.dense("pos_embed");
    Tensor tokens = Tensor::zeros({n * s, d});
    for (std::size_t img = 0; img < n; ++img) {
        float* rows = tokens.mutable_ptr() + img * s * d;
        for (std::size_t j = 0; j < d; ++j) rows[j] = cls[j] + pos[j];
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t j = 0; j < d; ++j)
                rows[(p + 1) * d + j] = embedded.at(img * np + p, j) + pos.at(p + 1, j);
    }

    for (std::size_t blk = 0; blk < hp.depth; ++blk) {
        const std::string p = "blocks." + std::to_string(blk);
        const Tensor qkv = linear(m, norm(m, tokens, p + ".norm1"), p + ".qkv");
        Tensor attn = Tensor::zeros({n * s, d});
#pragma omp parallel for schedule(static) if (n > 1)
        for (std::size_t img = 0; img < n; ++img) {
            const Tensor qkv_img = slice_rows(qkv, img * s, s);
            const Tensor out = mha_attention(slice_cols(qkv_img, 0, d),
                                             slice_cols(qkv_img, d, d),
                                             slice_cols(qkv_img, 2 * d, d), hp.heads);
            std::memcpy(attn.mutable_ptr() + img * s * d, out.ptr(), s * d * sizeof(float));
        }
        tokens = add(tokens, linear(m, attn, p + ".proj"));
        const Tensor h = norm(m, tokens, p + ".norm2");
        tokens = add(tokens, linear(m, gelu(linear(m, h, p + ".mlp.fc1")), p + ".mlp.fc2"));
    }

    const Tensor final_norm = norm(m, tokens, "norm");
    Tensor cls_rows = Tensor::zeros({n, d});
    for (std::size_t img = 0; img < n; ++img)
        std::memcpy(cls_rows.mutable_ptr() + img * d, final_norm.ptr() + img * s * d,
                    d * sizeof(float));
    return linear(m, cls_rows, "head");
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t c = logits.dim(1);
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
        if (logits.at(row, j) > logits.at(row, best)) best = j;
    return best;
}

FidelityResult fidelity_from_logits(const Tensor& base_logits, const Tensor& variant_logits) {
    if (!base_logits.same_shape(variant_logits))
        throw DimensionError("fidelity: logit shapes differ, " + base_logits.shape_str() +
                             " vs " + variant_logits.shape_str());
    const std::size_t n = base_logits.dim(0), c = base_logits.dim(1);
    std::size_t agree = 0;
    double l2_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (argmax_row(base_logits, i) == argmax_row(variant_logits, i)) ++agree;
        double sq = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = static_cast<double>(base_logits.at(i, j)) -
                             static_cast<double>(variant_logits.at(i, j));
            sq += d * d;
        }
        l2_sum += std::sqrt(sq);
    }
    return {static_cast<double>(agree) / static_cast<double>(n),
            l2_sum / static_cast<double>(n)};
}

FidelityResult fidelity_eval(const Model& base, const Model& variant,
                             const SyntheticDataset& data) {
    if (base.graph.vit_params().classes != variant.graph.vit_params().classes)
        throw DimensionError("fidelity: class counts differ");
    return fidelity_from_logits(vit_forward(base, data.images),
                                vit_forward(variant, data.images));
}

AccuracyResult accuracy_from_logits(const Tensor& logits,
                                    const std::vector<std::uint32_t>& labels) {
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    if (labels.empty()) throw DomainError("accuracy: dataset has no labels");
    if (labels.size() != n) throw DimensionError("accuracy: label count != input count");
    if (c < 5) throw ConfigError("top-5 accuracy needs at least 5 classes");
    std::size_t hit1 = 0, hit5 = 0;
    std::vector<std::size_t> order(c);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t label = labels[i];
        if (label >= c) throw DomainError("label " + std::to_string(label) + " out of range");
        for (std::size_t j = 0; j < c; ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const float la = logits.at(i, a), lb = logits.at(i, b);
            return la > lb || (la == lb && a < b);
        });
        if (order[0] == label) ++hit1;
        for (std::size_t r = 0; r < 5; ++r)
            if (order[r] == label) {
                ++hit5;
                break;
            }
    }
    return {static_cast<double>(hit1) / static_cast<double>(n),
            static_cast<double>(hit5) / static_cast<double>(n)};
}

AccuracyResult accuracy_eval(const Model& m, const SyntheticDataset& data) {
    return accuracy_from_logits(vit_forward(m, data.images), data.labels);
}

}  // namespace cwc
