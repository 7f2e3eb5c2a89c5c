#pragma once

#include "dcseg/contrastive.hpp"

namespace dcseg {

// Serial reference implementations: literal nested loops with direct
// exponentials, no log-sum-exp, no gradients. Kept as the comparison
// baselines for the fast kernels (tests and the bench harness).

double self_contrast_ref(const EmbeddingBatch& batch);
double image_supcon_ref(const EmbeddingBatch& batch);
double pixel_supcon_ref(const PixelContrastBatch& batch, double temperature);

}  // namespace dcseg
