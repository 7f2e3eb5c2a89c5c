#include "dcseg/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dcseg/rng.hpp"

namespace dcseg {

namespace {

void check_batch(const EmbeddingBatch& b) {
    if (b.embeddings.rank() != 2)
        throw std::invalid_argument("contrast: embeddings must be [2N,D], got " +
                                    b.embeddings.shape_str());
    const int n = b.embeddings.shape[0];
    if (n < 2) throw std::invalid_argument("contrast: need at least 2 embeddings");
    if (!b.normalized)
        throw std::invalid_argument("contrast: batch not normalized; call normalize_embeddings first");
    if (static_cast<int>(b.pairing.size()) != n)
        throw std::invalid_argument("contrast: pairing size mismatch");
    for (int i = 0; i < n; ++i) {
        const int j = b.pairing[i];
        if (j < 0 || j >= n || j == i || b.pairing[j] != i)
            throw std::invalid_argument("contrast: pairing is not a fixed-point-free involution");
    }
    if (b.temperature <= 0.0) throw std::invalid_argument("contrast: temperature must be > 0");
}

// Similarity matrix z_i . z_a / tau.
Tensor similarities(const Tensor& z, double tau) {
    const int n = z.shape[0], d = z.shape[1];
    Tensor s({n, n});
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < n; ++a) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += z.at(i, k) * z.at(a, k);
            s.at(i, a) = acc / tau;
        }
    return s;
}

// log sum_{a in A(i)} exp(s_ia) with max subtraction; A(i) excludes i and,
// under SameImage policy, pixels from other views.
double row_lse(const Tensor& s, int i, const std::vector<int>& candidates) {
    double mx = -1e300;
    for (int a : candidates) mx = std::max(mx, s.at(i, a));
    double acc = 0.0;
    for (int a : candidates) acc += std::exp(s.at(i, a) - mx);
    return mx + std::log(acc);
}

// grad w.r.t. embeddings from per-pair gradient matrix G over s:
// dL/dz = (G + G^T) Z / tau.
Tensor grad_from_pair_grads(const Tensor& g, const Tensor& z, double tau) {
    const int n = z.shape[0], d = z.shape[1];
    Tensor out({n, d});
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < n; ++a) {
            const double c = (g.at(i, a) + g.at(a, i)) / tau;
            if (c == 0.0) continue;
            for (int k = 0; k < d; ++k) out.at(i, k) += c * z.at(a, k);
        }
    return out;
}

}  // namespace

Tensor normalize_embeddings(const Tensor& raw) {
    if (raw.rank() != 2) throw std::invalid_argument("normalize_embeddings: expected [N,D]");
    Tensor out = raw;
    const int rows = raw.shape[0], cols = raw.shape[1];
    for (int r = 0; r < rows; ++r) {
        double norm = 0.0;
        for (int c = 0; c < cols; ++c) norm += raw.at(r, c) * raw.at(r, c);
        norm = std::sqrt(norm);
        if (norm < 1e-12)
            throw std::invalid_argument("normalize_embeddings: near-zero row " + std::to_string(r));
        for (int c = 0; c < cols; ++c) out.at(r, c) /= norm;
    }
    return out;
}

Tensor normalize_embeddings_backward(const Tensor& raw, const Tensor& grad_normalized) {
    if (!raw.same_shape(grad_normalized))
        throw std::invalid_argument("normalize_embeddings_backward: shape mismatch");
    const int rows = raw.shape[0], cols = raw.shape[1];
    Tensor out({rows, cols});
    for (int r = 0; r < rows; ++r) {
        double norm = 0.0;
        for (int c = 0; c < cols; ++c) norm += raw.at(r, c) * raw.at(r, c);
        norm = std::sqrt(norm);
        double gdotu = 0.0;
        for (int c = 0; c < cols; ++c) gdotu += grad_normalized.at(r, c) * raw.at(r, c) / norm;
        for (int c = 0; c < cols; ++c)
            out.at(r, c) = (grad_normalized.at(r, c) - gdotu * raw.at(r, c) / norm) / norm;
    }
    return out;
}

ContrastResult self_contrast(const EmbeddingBatch& batch) {
    check_batch(batch);
    const Tensor& z = batch.embeddings;
    const int n = z.shape[0];
    const Tensor s = similarities(z, batch.temperature);

    std::vector<double> per_anchor(n, 0.0);
    Tensor pair_grads({n, n});
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        std::vector<int> cand;
        cand.reserve(n - 1);
        for (int a = 0; a < n; ++a)
            if (a != i) cand.push_back(a);
        const double lse = row_lse(s, i, cand);
        per_anchor[i] = -(s.at(i, batch.pairing[i]) - lse);
        for (int a : cand) pair_grads.at(i, a) = std::exp(s.at(i, a) - lse);
        pair_grads.at(i, batch.pairing[i]) -= 1.0;
    }

    ContrastResult r;
    for (int i = 0; i < n; ++i) r.loss += per_anchor[i];
    r.grad = grad_from_pair_grads(pair_grads, z, batch.temperature);
    r.anchors_used = n;
    if (!std::isfinite(r.loss) || !r.grad.all_finite())
        throw std::runtime_error("self_contrast: non-finite result");
    return r;
}

ContrastResult image_supcon(const EmbeddingBatch& batch) {
    check_batch(batch);
    if (batch.image_labels.size() != static_cast<std::size_t>(batch.embeddings.shape[0]))
        throw std::invalid_argument("image_supcon: image_labels size mismatch");
    const Tensor& z = batch.embeddings;
    const int n = z.shape[0];
    const Tensor s = similarities(z, batch.temperature);

    std::vector<double> per_anchor(n, 0.0);
    std::vector<int> used(n, 0);
    Tensor pair_grads({n, n});
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        std::vector<int> cand, pos;
        for (int a = 0; a < n; ++a) {
            if (a == i) continue;
            cand.push_back(a);
            if (batch.image_labels[a] == batch.image_labels[i]) pos.push_back(a);
        }
        if (pos.empty()) continue;
        used[i] = 1;
        const double lse = row_lse(s, i, cand);
        const double inv_p = 1.0 / static_cast<double>(pos.size());
        double acc = 0.0;
        for (int p : pos) acc += s.at(i, p) - lse;
        per_anchor[i] = -inv_p * acc;
        for (int a : cand) pair_grads.at(i, a) = std::exp(s.at(i, a) - lse);
        for (int p : pos) pair_grads.at(i, p) -= inv_p;
    }

    ContrastResult r;
    for (int i = 0; i < n; ++i) {
        r.loss += per_anchor[i];
        r.anchors_used += used[i];
    }
    r.anchors_skipped = n - r.anchors_used;
    if (r.anchors_used == 0) throw std::runtime_error("image_supcon: no positive pairs in batch");
    r.grad = grad_from_pair_grads(pair_grads, z, batch.temperature);
    if (!std::isfinite(r.loss) || !r.grad.all_finite())
        throw std::runtime_error("image_supcon: non-finite result");
    return r;
}

ContrastResult pixel_supcon(const PixelContrastBatch& batch, double temperature) {
    if (batch.embeddings.rank() != 2)
        throw std::invalid_argument("pixel_supcon: embeddings must be [M,D]");
    const int m = batch.embeddings.shape[0];
    if (m < 2) throw std::invalid_argument("pixel_supcon: need at least 2 pixels");
    if (temperature <= 0.0) throw std::invalid_argument("pixel_supcon: temperature must be > 0");
    if (batch.labels.size() != static_cast<std::size_t>(m) ||
        batch.image_of_pixel.size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("pixel_supcon: labels/image ids size mismatch");
    for (int l : batch.labels)
        if (l == kVoidLabel) throw std::invalid_argument("pixel_supcon: void pixel in pool");

    const Tensor& z = batch.embeddings;
    const Tensor s = similarities(z, temperature);
    const bool same_image = batch.policy == PoolPolicy::SameImage;

    std::vector<double> per_anchor(m, 0.0);
    std::vector<int> used(m, 0);
    Tensor pair_grads({m, m});
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        std::vector<int> cand, pos;
        for (int a = 0; a < m; ++a) {
            if (a == i) continue;
            if (same_image && batch.image_of_pixel[a] != batch.image_of_pixel[i]) continue;
            cand.push_back(a);
            if (batch.labels[a] == batch.labels[i]) pos.push_back(a);
        }
        if (pos.empty() || cand.empty()) continue;
        used[i] = 1;
        const double lse = row_lse(s, i, cand);
        const double inv_p = 1.0 / static_cast<double>(pos.size());
        double acc = 0.0;
        for (int p : pos) acc += s.at(i, p) - lse;
        per_anchor[i] = -inv_p * acc;
        for (int a : cand) pair_grads.at(i, a) = std::exp(s.at(i, a) - lse);
        for (int p : pos) pair_grads.at(i, p) -= inv_p;
    }

    ContrastResult r;
    for (int i = 0; i < m; ++i) {
        r.loss += per_anchor[i];
        r.anchors_used += used[i];
    }
    r.anchors_skipped = m - r.anchors_used;
    if (r.anchors_used == 0) throw std::runtime_error("pixel_supcon: no positive pairs in pool");
    // Mean over contributing anchors keeps the magnitude independent of the
    // sampling cap; the per-pair grads are scaled to match.
    const double scale = 1.0 / static_cast<double>(r.anchors_used);
    r.loss *= scale;
    for (double& v : pair_grads.data) v *= scale;
    r.grad = grad_from_pair_grads(pair_grads, z, temperature);
    if (!std::isfinite(r.loss) || !r.grad.all_finite())
        throw std::runtime_error("pixel_supcon: non-finite result");
    return r;
}

PixelContrastBatch sample_pixel_anchors(const Tensor& features, const std::vector<uint8_t>& labels,
                                        int cap_per_image, std::uint64_t seed) {
    if (features.rank() != 2) throw std::invalid_argument("sample_pixel_anchors: expected [P,D]");
    const int p = features.shape[0], d = features.shape[1];
    if (static_cast<int>(labels.size()) != p)
        throw std::invalid_argument("sample_pixel_anchors: label map not aligned with features");
    if (cap_per_image < 2) throw std::invalid_argument("sample_pixel_anchors: cap must be >= 2");

    // Bucket non-void pixels by class, in pixel order.
    std::vector<int> class_ids;
    std::vector<std::vector<int>> buckets;
    for (int i = 0; i < p; ++i) {
        if (labels[i] == kVoidLabel) continue;
        auto it = std::find(class_ids.begin(), class_ids.end(), static_cast<int>(labels[i]));
        if (it == class_ids.end()) {
            class_ids.push_back(labels[i]);
            buckets.emplace_back();
            it = class_ids.end() - 1;
        }
        buckets[static_cast<std::size_t>(it - class_ids.begin())].push_back(i);
    }
    if (class_ids.empty()) throw std::runtime_error("sample_pixel_anchors: all pixels void");

    Rng rng(seed);
    std::vector<int> chosen;
    int total_nonvoid = 0;
    for (const auto& b : buckets) total_nonvoid += static_cast<int>(b.size());
    if (cap_per_image >= total_nonvoid) {
        for (int i = 0; i < p; ++i)
            if (labels[i] != kVoidLabel) chosen.push_back(i);
    } else {
        // Stratified: every present class gets at least one anchor when the
        // cap permits, remainder allocated proportionally to class size.
        const int nc = static_cast<int>(buckets.size());
        std::vector<int> take(nc, 0);
        int assigned = 0;
        for (int c = 0; c < nc && assigned < cap_per_image; ++c) {
            take[c] = 1;
            ++assigned;
        }
        while (assigned < cap_per_image) {
            // Largest remaining bucket first; ties by class order.
            int best = -1;
            double best_deficit = -1.0;
            for (int c = 0; c < nc; ++c) {
                if (take[c] >= static_cast<int>(buckets[c].size())) continue;
                const double deficit = static_cast<double>(buckets[c].size()) / (take[c] + 1);
                if (deficit > best_deficit) {
                    best_deficit = deficit;
                    best = c;
                }
            }
            if (best < 0) break;
            ++take[best];
            ++assigned;
        }
        for (int c = 0; c < nc; ++c) {
            std::vector<int> pool = buckets[c];
            const int want = std::min<int>(take[c], static_cast<int>(pool.size()));
            // Partial Fisher-Yates keyed to the seeded stream.
            for (int t = 0; t < want; ++t) {
                const int pick = rng.uniform_int(t, static_cast<int>(pool.size()) - 1);
                std::swap(pool[t], pool[pick]);
                chosen.push_back(pool[t]);
            }
        }
        std::sort(chosen.begin(), chosen.end());
    }

    PixelContrastBatch out;
    out.embeddings = Tensor({static_cast<int>(chosen.size()), d});
    out.labels.reserve(chosen.size());
    out.image_of_pixel.assign(chosen.size(), 0);
    out.pool_indices = chosen;
    for (std::size_t r = 0; r < chosen.size(); ++r) {
        for (int c = 0; c < d; ++c)
            out.embeddings.at(static_cast<int>(r), c) = features.at(chosen[r], c);
        out.labels.push_back(labels[chosen[r]]);
    }
    return out;
}

}  // namespace dcseg
