#pragma once

#include <cstdint>
#include <vector>

#include "cwc/model.hpp"

namespace cwc {

// Seeded stand-in for a real validation set: images uniform in [0,1),
// optional uniform labels. A given (seed, n, dims, classes) always produces
// the same bytes.
struct SyntheticDataset {
    Tensor images;                      // [n, H, W, ch]
    std::vector<std::uint32_t> labels;  // empty when unlabeled
    std::uint64_t seed = 0;

    std::size_t count() const { return images.dim(0); }
};

SyntheticDataset gen_dataset(std::uint64_t seed, std::size_t n, std::size_t image_size,
                             std::size_t channels, std::size_t classes = 0);

// Wraps a raw FP32 image blob (n*H*W*ch floats) as a dataset.
SyntheticDataset dataset_from_blob(const std::vector<float>& blob, std::size_t image_size,
                                   std::size_t channels);

// Full forward pass: patchify, linear embed, class token, positional
// embeddings, pre-norm encoder blocks, final norm, classifier head.
// Dense and clustered models run the same code path; each weight matrix
// dispatches to matmul or clustered_matmul based on its storage. Accepts
// [n,H,W,ch] batches or a single [H,W,ch] image; returns [n, classes].
Tensor vit_forward(const Model& m, const Tensor& images);

struct FidelityResult {
    double top1_agreement = 0.0;  // fraction of argmax matches, ties to lower class
    double mean_logit_l2 = 0.0;   // mean over inputs of ||delta logits||_2
};

FidelityResult fidelity_eval(const Model& base, const Model& variant,
                             const SyntheticDataset& data);

// Same comparison on precomputed logits.
FidelityResult fidelity_from_logits(const Tensor& base_logits, const Tensor& variant_logits);

struct AccuracyResult {
    double top1 = 0.0;
    double top5 = 0.0;
};

// Standard top-k accuracy; a hit means the true label ranks among the k
// highest logits (ties broken toward the lower class index).
AccuracyResult accuracy_eval(const Model& m, const SyntheticDataset& data);
AccuracyResult accuracy_from_logits(const Tensor& logits,
                                    const std::vector<std::uint32_t>& labels);

std::size_t argmax_row(const Tensor& logits, std::size_t row);

}  // namespace cwc
