#include "cwc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cwc/errors.hpp"
#include "cwc/rng.hpp"

namespace cwc {

void VitHyperParams::validate() const {
    if (depth < 1) throw ConfigError("vit: depth must be >= 1");
    if (image_size < 1 || channels < 1 || patch_size < 1 || dim < 1 || heads < 1 ||
        mlp_ratio < 1 || classes < 1)
        throw ConfigError("vit: all hyperparameters must be >= 1");
    if (image_size % patch_size != 0)
        throw ConfigError("vit: image size " + std::to_string(image_size) +
                          " not divisible by patch size " + std::to_string(patch_size));
    if (dim % heads != 0)
        throw ConfigError("vit: dim " + std::to_string(dim) + " not divisible by heads " +
                          std::to_string(heads));
}

ModelGraph ModelGraph::vit(VitHyperParams hp) {
    hp.validate();
    ModelGraph g;
    g.kind_ = Kind::Vit;
    g.vit_ = hp;
    const std::size_t d = hp.dim, s = hp.seq_len(), pd = hp.patch_dim(), md = hp.mlp_dim();

    auto add = [&](LayerDesc& layer, std::string name, std::vector<std::size_t> shape,
                   bool clusterable) {
        layer.tensor_names.push_back(name);
        g.tensors_.push_back({std::move(name), std::move(shape), clusterable});
    };

    LayerDesc meta{LayerKind::Meta, "meta", {}};
    add(meta, "arch", {8}, false);
    g.layers_.push_back(std::move(meta));

    LayerDesc embed{LayerKind::PatchEmbed, "patch_embed", {}};
    add(embed, "patch_embed.weight", {pd, d}, true);
    add(embed, "patch_embed.bias", {d}, false);
    add(embed, "cls_token", {d}, false);
    add(embed, "pos_embed", {s, d}, false);
    g.layers_.push_back(std::move(embed));

    for (std::size_t i = 0; i < hp.depth; ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".";
        LayerDesc blk{LayerKind::EncoderBlock, "blocks." + std::to_string(i), {}};
        add(blk, p + "norm1.gamma", {d}, false);
        add(blk, p + "norm1.beta", {d}, false);
        add(blk, p + "qkv.weight", {d, 3 * d}, true);
        add(blk, p + "qkv.bias", {3 * d}, false);
        add(blk, p + "proj.weight", {d, d}, true);
        add(blk, p + "proj.bias", {d}, false);
        add(blk, p + "norm2.gamma", {d}, false);
        add(blk, p + "norm2.beta", {d}, false);
        add(blk, p + "mlp.fc1.weight", {d, md}, true);
        add(blk, p + "mlp.fc1.bias", {md}, false);
        add(blk, p + "mlp.fc2.weight", {md, d}, true);
        add(blk, p + "mlp.fc2.bias", {d}, false);
        g.layers_.push_back(std::move(blk));
    }

    LayerDesc head{LayerKind::Classifier, "head", {}};
    add(head, "norm.gamma", {d}, false);
    add(head, "norm.beta", {d}, false);
    add(head, "head.weight", {d, hp.classes}, true);
    add(head, "head.bias", {hp.classes}, false);
    g.layers_.push_back(std::move(head));

    g.index_tensors();
    return g;
}

ModelGraph ModelGraph::raw(std::vector<TensorSpec> specs) {
    if (specs.empty()) throw ConfigError("raw graph needs at least one tensor");
    ModelGraph g;
    g.kind_ = Kind::Raw;
    for (auto& spec : specs) {
        spec.clusterable = spec.shape.size() >= 2;
        g.layers_.push_back({LayerKind::Raw, spec.name, {spec.name}});
        g.tensors_.push_back(std::move(spec));
    }
    g.index_tensors();
    return g;
}

void ModelGraph::index_tensors() {
    by_name_.clear();
    by_name_.reserve(tensors_.size());
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        Tensor::checked_elem_count(tensors_[i].shape);
        by_name_.emplace_back(tensors_[i].name, i);
    }
    std::sort(by_name_.begin(), by_name_.end());
    for (std::size_t i = 1; i < by_name_.size(); ++i)
        if (by_name_[i].first == by_name_[i - 1].first)
            throw GraphError("duplicate tensor name '" + by_name_[i].first + "'");
}

const VitHyperParams& ModelGraph::vit_params() const {
    if (!vit_) throw ConfigError("model has no vit architecture");
    return *vit_;
}

std::size_t ModelGraph::index_of(const std::string& name) const {
    const auto it = std::lower_bound(by_name_.begin(), by_name_.end(),
                                     std::make_pair(name, std::size_t{0}));
    if (it == by_name_.end() || it->first != name)
        throw GraphError("unknown tensor '" + name + "'");
    return it->second;
}

const TensorSpec& ModelGraph::spec(const std::string& name) const {
    return tensors_[index_of(name)];
}

std::size_t ModelGraph::clusterable_param_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_)
        if (t.clusterable) n += Tensor::checked_elem_count(t.shape);
    return n;
}

std::size_t ModelGraph::dense_only_param_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_)
        if (!t.clusterable) n += Tensor::checked_elem_count(t.shape);
    return n;
}

const Tensor& Model::dense(const std::string& name) const {
    const TensorStorage& s = entry(name);
    if (!is_dense(s)) throw GraphError("tensor '" + name + "' is not dense");
    return std::get<Tensor>(s);
}

const Codebook& Model::codebook_for(const ClusteredTensor& t) const {
    if (t.own_codebook) return *t.own_codebook;
    if (!shared_codebook)
        throw CorruptionError("tensor '" + t.name + "' references a missing shared codebook");
    return *shared_codebook;
}

bool Model::all_dense() const {
    return std::all_of(storage.begin(), storage.end(),
                       [](const TensorStorage& s) { return is_dense(s); });
}

void Model::validate() const {
    if (storage.size() != graph.tensors().size())
        throw GraphError("model storage does not cover the graph");
    for (std::size_t i = 0; i < storage.size(); ++i) {
        const TensorSpec& spec = graph.tensors()[i];
        if (is_dense(storage[i])) {
            const Tensor& t = std::get<Tensor>(storage[i]);
            if (t.shape() != spec.shape)
                throw GraphError("tensor '" + spec.name + "' shape mismatch");
        } else {
            const ClusteredTensor& ct = std::get<ClusteredTensor>(storage[i]);
            if (ct.shape != spec.shape)
                throw GraphError("tensor '" + spec.name + "' shape mismatch");
            ct.validate(codebook_for(ct).size());
        }
    }
}

namespace {

Tensor gen_tensor(const TensorSpec& spec, std::uint64_t seed) {
    const std::size_t n = Tensor::checked_elem_count(spec.shape);
    std::vector<float> data(n);
    Rng rng(seed);
    const std::string& name = spec.name;
    const bool is_weight = spec.shape.size() == 2 && spec.clusterable;
    if (is_weight) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(spec.shape[0]));
        for (auto& v : data) v = static_cast<float>(rng.symmetric(scale));
    } else if (name == "cls_token" || name == "pos_embed") {
        for (auto& v : data) v = static_cast<float>(rng.symmetric(0.02));
    } else if (name.ends_with(".gamma")) {
        std::fill(data.begin(), data.end(), 1.0f);
    } else {
        std::fill(data.begin(), data.end(), 0.0f);  // biases, beta
    }
    return Tensor(spec.shape, std::move(data));
}

}  // namespace

Model gen_vit_model(const VitHyperParams& hp, std::uint64_t seed) {
    Model m;
    m.graph = ModelGraph::vit(hp);
    m.storage.reserve(m.graph.tensors().size());
    for (std::size_t i = 0; i < m.graph.tensors().size(); ++i) {
        const TensorSpec& spec = m.graph.tensors()[i];
        if (spec.name == "arch") {
            std::vector<float> a = {
                static_cast<float>(hp.image_size), static_cast<float>(hp.channels),
                static_cast<float>(hp.patch_size), static_cast<float>(hp.dim),
                static_cast<float>(hp.depth),      static_cast<float>(hp.heads),
                static_cast<float>(hp.mlp_ratio),  static_cast<float>(hp.classes)};
            m.storage.emplace_back(Tensor({8}, std::move(a)));
        } else {
            m.storage.emplace_back(gen_tensor(spec, Rng::derive(seed, i)));
        }
    }
    return m;
}

ModelGraph graph_from_tensors(const std::vector<std::string>& names,
                              const std::vector<std::vector<std::size_t>>& shapes,
                              const std::vector<const Tensor*>& dense_values) {
    if (!names.empty() && names[0] == "arch" && shapes[0] == std::vector<std::size_t>{8} &&
        dense_values[0] != nullptr) {
        const Tensor& a = *dense_values[0];
        std::size_t v[8];
        for (std::size_t i = 0; i < 8; ++i) {
            const float f = a[i];
            if (!(f >= 1.0f) || f != std::floor(f) || f > 1e6f)
                throw GraphError("arch tensor holds a non-integral or out-of-range entry");
            v[i] = static_cast<std::size_t>(f);
        }
        VitHyperParams hp{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
        hp.validate();
        ModelGraph g = ModelGraph::vit(hp);
        if (g.tensors().size() != names.size())
            throw GraphError("vit file lists " + std::to_string(names.size()) +
                             " tensors, architecture requires " +
                             std::to_string(g.tensors().size()));
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (g.tensors()[i].name != names[i])
                throw GraphError("vit tensor " + std::to_string(i) + " named '" + names[i] +
                                 "', expected '" + g.tensors()[i].name + "'");
            if (g.tensors()[i].shape != shapes[i])
                throw GraphError("vit tensor '" + names[i] + "' has an unexpected shape");
        }
        return g;
    }
    std::vector<TensorSpec> specs;
    specs.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) specs.push_back({names[i], shapes[i], false});
    return ModelGraph::raw(std::move(specs));
}

namespace {

bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

bool codebooks_equal(const std::optional<Codebook>& a, const std::optional<Codebook>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || bits_equal(a->centroids(), b->centroids());
}

}  // namespace

bool models_equal(const Model& a, const Model& b) {
    if (!(a.graph == b.graph) || a.mode != b.mode) return false;
    if (!codebooks_equal(a.shared_codebook, b.shared_codebook)) return false;
    if (a.storage.size() != b.storage.size()) return false;
    for (std::size_t i = 0; i < a.storage.size(); ++i) {
        if (is_dense(a.storage[i]) != is_dense(b.storage[i])) return false;
        if (is_dense(a.storage[i])) {
            const Tensor& x = std::get<Tensor>(a.storage[i]);
            const Tensor& y = std::get<Tensor>(b.storage[i]);
            if (x.shape() != y.shape() || !bits_equal(x.data(), y.data())) return false;
        } else {
            const ClusteredTensor& x = std::get<ClusteredTensor>(a.storage[i]);
            const ClusteredTensor& y = std::get<ClusteredTensor>(b.storage[i]);
            if (x.name != y.name || x.shape != y.shape || x.indices != y.indices) return false;
            std::optional<Codebook> xc = x.own_codebook, yc = y.own_codebook;
            if (!codebooks_equal(xc, yc)) return false;
        }
    }
    return true;
}

}  // namespace cwc
