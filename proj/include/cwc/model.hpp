#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cwc/codebook.hpp"
#include "cwc/tensor.hpp"

namespace cwc {

struct VitHyperParams {
    std::size_t image_size = 16;
    std::size_t channels = 1;
    std::size_t patch_size = 4;
    std::size_t dim = 64;
    std::size_t depth = 2;
    std::size_t heads = 4;
    std::size_t mlp_ratio = 4;
    std::size_t classes = 10;

    void validate() const;
    std::size_t patches_per_side() const { return image_size / patch_size; }
    std::size_t num_patches() const { return patches_per_side() * patches_per_side(); }
    std::size_t seq_len() const { return num_patches() + 1; }  // +1 class token
    std::size_t patch_dim() const { return patch_size * patch_size * channels; }
    std::size_t mlp_dim() const { return dim * mlp_ratio; }

    bool operator==(const VitHyperParams&) const = default;
};

enum class LayerKind : std::uint8_t { Meta, PatchEmbed, EncoderBlock, Classifier, Raw };

struct TensorSpec {
    std::string name;
    std::vector<std::size_t> shape;
    bool clusterable = false;

    bool operator==(const TensorSpec&) const = default;
};

struct LayerDesc {
    LayerKind kind;
    std::string name;
    std::vector<std::string> tensor_names;
};

// Ordered description of a model: layer descriptors plus the flat tensor
// list they reference. Either a toy ViT (hyperparameters known, forward pass
// runnable) or a raw tensor container (clustering and size accounting only).
class ModelGraph {
public:
    enum class Kind : std::uint8_t { Vit, Raw };

    static ModelGraph vit(VitHyperParams hp);
    // Raw container: rank>=2 tensors are treated as clusterable weight
    // matrices, rank-1 tensors stay dense.
    static ModelGraph raw(std::vector<TensorSpec> specs);

    Kind kind() const { return kind_; }
    const VitHyperParams& vit_params() const;
    const std::vector<LayerDesc>& layers() const { return layers_; }
    const std::vector<TensorSpec>& tensors() const { return tensors_; }
    const TensorSpec& spec(const std::string& name) const;
    std::size_t index_of(const std::string& name) const;

    std::size_t clusterable_param_count() const;
    std::size_t dense_only_param_count() const;

    bool operator==(const ModelGraph& o) const {
        return kind_ == o.kind_ && vit_ == o.vit_ && tensors_ == o.tensors_;
    }

private:
    void index_tensors();

    Kind kind_ = Kind::Raw;
    std::optional<VitHyperParams> vit_;
    std::vector<LayerDesc> layers_;
    std::vector<TensorSpec> tensors_;
    std::vector<std::pair<std::string, std::size_t>> by_name_;  // sorted
};

using TensorStorage = std::variant<Tensor, ClusteredTensor>;

inline bool is_dense(const TensorStorage& s) { return std::holds_alternative<Tensor>(s); }

// A model is a graph plus one storage slot per tensor, in graph order.
// All-dense models are the FP32 baseline; clustered models carry per-tensor
// codebooks (per-layer mode) or one shared codebook (entire-model mode).
struct Model {
    ModelGraph graph;
    ClusteringMode mode = ClusteringMode::PerLayer;
    std::optional<Codebook> shared_codebook;
    std::vector<TensorStorage> storage;  // aligned with graph.tensors()

    const TensorStorage& entry(const std::string& name) const {
        return storage[graph.index_of(name)];
    }
    const Tensor& dense(const std::string& name) const;
    const Codebook& codebook_for(const ClusteredTensor& t) const;
    bool all_dense() const;
    void validate() const;
};

// Deterministic toy-ViT weights: weight matrices uniform in +-1/sqrt(fan_in),
// positional embeddings and class token uniform in +-0.02, biases zero,
// norm gamma one / beta zero. Every tensor draws from its own substream of
// `seed`, and the first tensor ("arch", 8 entries) records the
// hyperparameters so a saved file reconstructs the same graph.
Model gen_vit_model(const VitHyperParams& hp, std::uint64_t seed);

// Rebuilds a graph from loaded tensors: an "arch" metadata tensor at
// position 0 announces a ViT; anything else is a raw container.
ModelGraph graph_from_tensors(const std::vector<std::string>& names,
                              const std::vector<std::vector<std::size_t>>& shapes,
                              const std::vector<const Tensor*>& dense_values);

// Bitwise equality (float payloads compared as bits).
bool models_equal(const Model& a, const Model& b);

}  // namespace cwc
