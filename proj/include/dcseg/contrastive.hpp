#pragma once

#include <cstdint>
#include <vector>

#include "dcseg/tensor.hpp"

namespace dcseg {

/// Multi-viewed batch of 2N image-level embeddings. Consecutive indices
/// (2k, 2k+1) share a source; `pairing[i]` is the other view of anchor i.
struct EmbeddingBatch {
    Tensor embeddings;             // [2N, D]
    std::vector<int> pairing;      // involution without fixed points
    std::vector<int> image_labels; // condition class ids
    double temperature = 0.07;
    bool normalized = false;
};

enum class PoolPolicy { BatchWide, SameImage };

/// Sampled pixel pool for pixel-level contrast. Void-labeled pixels are
/// excluded before construction.
struct PixelContrastBatch {
    Tensor embeddings;               // [M, D_pix], rows unit-norm
    std::vector<int> labels;         // semantic class ids
    std::vector<int> image_of_pixel; // source view ids
    std::vector<int> pool_indices;   // row index in the source pixel map
    PoolPolicy policy = PoolPolicy::BatchWide;
};

struct ContrastResult {
    double loss = 0.0;
    Tensor grad; // same shape as the input embeddings
    int anchors_used = 0;
    int anchors_skipped = 0;
};

/// Row-wise L2 normalization. Errors on rows with norm below 1e-12.
Tensor normalize_embeddings(const Tensor& raw);

/// Pulls a gradient w.r.t. normalized rows back through the normalization
/// (tangent-space projection scaled by 1/norm).
Tensor normalize_embeddings_backward(const Tensor& raw, const Tensor& grad_normalized);

/// Sum over anchors of -log softmax(z_i . z_{j(i)} / tau) over A(i) = I \ {i}.
ContrastResult self_contrast(const EmbeddingBatch& batch);

/// Supervised variant: positives are all other views sharing the anchor's
/// image-level label, averaged per anchor outside the log. Anchors with no
/// positives are skipped and counted.
ContrastResult image_supcon(const EmbeddingBatch& batch);

/// Pixel-level supervised contrast over the sampled pool; the batch loss is
/// the mean over anchors with a non-empty positive set.
ContrastResult pixel_supcon(const PixelContrastBatch& batch, double temperature);

/// Deterministic class-stratified anchor sampling from one view's pixel
/// embedding map. `features` is [H'*W', D_pix] row-per-pixel, `labels` the
/// aligned flat label map (void = 255).
PixelContrastBatch sample_pixel_anchors(const Tensor& features, const std::vector<uint8_t>& labels,
                                        int cap_per_image, std::uint64_t seed);

constexpr int kVoidLabel = 255;

}  // namespace dcseg
