#include "dcseg/contrastive_ref.hpp"

#include <cmath>
#include <stdexcept>

namespace dcseg {

namespace {

double dot_rows(const Tensor& z, int i, int a) {
    double s = 0.0;
    for (int k = 0; k < z.shape[1]; ++k) s += z.at(i, k) * z.at(a, k);
    return s;
}

}  // namespace

double self_contrast_ref(const EmbeddingBatch& batch) {
    const Tensor& z = batch.embeddings;
    const int n = z.shape[0];
    if (n < 2) throw std::invalid_argument("self_contrast_ref: need at least 2 embeddings");
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double denom = 0.0;
        for (int a = 0; a < n; ++a)
            if (a != i) denom += std::exp(dot_rows(z, i, a) / batch.temperature);
        const double num = std::exp(dot_rows(z, i, batch.pairing[i]) / batch.temperature);
        loss += -std::log(num / denom);
    }
    return loss;
}

double image_supcon_ref(const EmbeddingBatch& batch) {
    const Tensor& z = batch.embeddings;
    const int n = z.shape[0];
    double loss = 0.0;
    int used = 0;
    for (int i = 0; i < n; ++i) {
        int npos = 0;
        for (int a = 0; a < n; ++a)
            if (a != i && batch.image_labels[a] == batch.image_labels[i]) ++npos;
        if (npos == 0) continue;
        ++used;
        double denom = 0.0;
        for (int a = 0; a < n; ++a)
            if (a != i) denom += std::exp(dot_rows(z, i, a) / batch.temperature);
        double anchor = 0.0;
        for (int p = 0; p < n; ++p) {
            if (p == i || batch.image_labels[p] != batch.image_labels[i]) continue;
            anchor += std::log(std::exp(dot_rows(z, i, p) / batch.temperature) / denom);
        }
        loss += -anchor / npos;
    }
    if (used == 0) throw std::runtime_error("image_supcon_ref: no positive pairs in batch");
    return loss;
}

double pixel_supcon_ref(const PixelContrastBatch& batch, double temperature) {
    const Tensor& z = batch.embeddings;
    const int m = z.shape[0];
    if (m < 2) throw std::invalid_argument("pixel_supcon_ref: need at least 2 pixels");
    const bool same_image = batch.policy == PoolPolicy::SameImage;
    double loss = 0.0;
    int used = 0;
    for (int i = 0; i < m; ++i) {
        double denom = 0.0;
        int npos = 0;
        for (int a = 0; a < m; ++a) {
            if (a == i) continue;
            if (same_image && batch.image_of_pixel[a] != batch.image_of_pixel[i]) continue;
            denom += std::exp(dot_rows(z, i, a) / temperature);
            if (batch.labels[a] == batch.labels[i]) ++npos;
        }
        if (npos == 0) continue;
        ++used;
        double anchor = 0.0;
        for (int p = 0; p < m; ++p) {
            if (p == i || batch.labels[p] != batch.labels[i]) continue;
            if (same_image && batch.image_of_pixel[p] != batch.image_of_pixel[i]) continue;
            anchor += std::log(std::exp(dot_rows(z, i, p) / temperature) / denom);
        }
        loss += -anchor / npos;
    }
    if (used == 0) throw std::runtime_error("pixel_supcon_ref: no positive pairs in pool");
    return loss / used;
}

}  // namespace dcseg
