#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dcseg/contrastive.hpp"
#include "dcseg/contrastive_ref.hpp"
#include "dcseg/rng.hpp"

using namespace dcseg;

namespace {

EmbeddingBatch random_image_batch(int n_pairs, int dim, double tau, int num_labels, Rng& rng) {
    EmbeddingBatch b;
    Tensor raw({2 * n_pairs, dim});
    for (auto& v : raw.data) v = rng.uniform(-1.0, 1.0);
    b.embeddings = normalize_embeddings(raw);
    b.normalized = true;
    b.temperature = tau;
    b.pairing.resize(2 * n_pairs);
    b.image_labels.resize(2 * n_pairs);
    for (int k = 0; k < n_pairs; ++k) {
        b.pairing[2 * k] = 2 * k + 1;
        b.pairing[2 * k + 1] = 2 * k;
        int lab = rng.uniform_int(0, num_labels - 1);
        b.image_labels[2 * k] = lab;
        b.image_labels[2 * k + 1] = lab;
    }
    return b;
}

PixelContrastBatch random_pixel_batch(int m, int dim, int num_classes, Rng& rng) {
    PixelContrastBatch b;
    Tensor raw({m, dim});
    for (auto& v : raw.data) v = rng.uniform(-1.0, 1.0);
    b.embeddings = normalize_embeddings(raw);
    b.labels.resize(m);
    b.image_of_pixel.resize(m);
    b.pool_indices.resize(m);
    for (int i = 0; i < m; ++i) {
        b.labels[i] = rng.uniform_int(0, num_classes - 1);
        b.image_of_pixel[i] = rng.uniform_int(0, 3);
        b.pool_indices[i] = i;
    }
    return b;
}

EmbeddingBatch identical_batch(int n_total, int dim, double tau, bool same_labels) {
    EmbeddingBatch b;
    b.embeddings = Tensor({n_total, dim});
    for (int i = 0; i < n_total; ++i) b.embeddings.at(i, 0) = 1.0;
    b.normalized = true;
    b.temperature = tau;
    b.pairing.resize(n_total);
    b.image_labels.resize(n_total);
    for (int k = 0; k < n_total / 2; ++k) {
        b.pairing[2 * k] = 2 * k + 1;
        b.pairing[2 * k + 1] = 2 * k;
        int lab = same_labels ? 0 : k;
        b.image_labels[2 * k] = lab;
        b.image_labels[2 * k + 1] = lab;
    }
    return b;
}

// Central finite differences through the loss, treating the stored (already
// normalized) embeddings as the free variable — the analytic grad is defined
// w.r.t. exactly those rows.
template <typename LossFn>
double grad_fd_error(Tensor& emb, const Tensor& analytic, LossFn loss_of, double h = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < emb.data.size(); ++i) {
        double keep = emb.data[i];
        emb.data[i] = keep + h;
        double up = loss_of();
        emb.data[i] = keep - h;
        double dn = loss_of();
        emb.data[i] = keep;
        double fd = (up - dn) / (2 * h);
        double err = std::abs(fd - analytic.data[i]) / std::max(1.0, std::abs(analytic.data[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace

TEST_CASE("normalize_embeddings: 3-4-5, idempotence, norms, zero row error") {
    Tensor y = normalize_embeddings(Tensor({1, 2}, {3.0, 4.0}));
    CHECK(y.at(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(y.at(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
    Tensor again = normalize_embeddings(y);
    CHECK(std::abs(again.at(0, 0) - y.at(0, 0)) < 1e-15);

    Rng rng(3);
    Tensor raw({8, 16});
    for (auto& v : raw.data) v = rng.uniform(-2.0, 2.0);
    Tensor n = normalize_embeddings(raw);
    for (int r = 0; r < 8; ++r) {
        double s = 0.0;
        for (int c = 0; c < 16; ++c) s += n.at(r, c) * n.at(r, c);
        CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-12));
    }
    Tensor z({2, 3});
    CHECK_THROWS_WITH_AS(normalize_embeddings(z), doctest::Contains("row 0"),
                         std::invalid_argument);
}

TEST_CASE("self_contrast spot values") {
    // One pair, no negatives: numerator equals denominator.
    EmbeddingBatch two = identical_batch(2, 4, 0.07, true);
    CHECK(self_contrast(two).loss == doctest::Approx(0.0).epsilon(1e-15));

    // All-identical 2N=4: uniform softmax over 3 candidates per anchor.
    EmbeddingBatch four = identical_batch(4, 4, 0.07, true);
    CHECK(self_contrast(four).loss == doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));
    // Uniform point is temperature independent.
    four.temperature = 0.9;
    CHECK(self_contrast(four).loss == doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("image_supcon spot values and skipped anchors") {
    EmbeddingBatch four = identical_batch(4, 4, 0.07, true);
    ContrastResult r = image_supcon(four);
    CHECK(r.loss == doctest::Approx(4.0 * std::log(3.0)).epsilon(1e-12));
    CHECK(r.anchors_used == 4);
    CHECK(r.anchors_skipped == 0);
}

TEST_CASE("pixel_supcon spot values") {
    // 4 identical embeddings, labels {a,a,b,b}: one positive among 3
    // candidates per anchor; mean = ln 3.
    PixelContrastBatch b;
    b.embeddings = Tensor({4, 4});
    for (int i = 0; i < 4; ++i) b.embeddings.at(i, 0) = 1.0;
    b.labels = {0, 0, 1, 1};
    b.image_of_pixel = {0, 0, 0, 0};
    b.pool_indices = {0, 1, 2, 3};
    CHECK(pixel_supcon(b, 0.07).loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    // All same label: three positives each, still ln 3 on average.
    b.labels = {2, 2, 2, 2};
    CHECK(pixel_supcon(b, 0.07).loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("oracle equivalence on random instances") {
    Rng rng(101);
    double worst_self = 0.0, worst_img = 0.0, worst_pix = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        int n = rng.uniform_int(2, 6);
        int d = rng.uniform_int(4, 16);
        double tau = rng.uniform(0.05, 1.0);
        EmbeddingBatch b = random_image_batch(n, d, tau, rng.uniform_int(1, 3), rng);
        worst_self = std::max(worst_self, std::abs(self_contrast(b).loss - self_contrast_ref(b)));
        double li = image_supcon(b).loss;
        worst_img = std::max(worst_img, std::abs(li - image_supcon_ref(b)));

        PixelContrastBatch pb = random_pixel_batch(rng.uniform_int(4, 16), d, 3, rng);
        if (trial % 2 == 1) pb.policy = PoolPolicy::SameImage;
        try {
            ContrastResult pr = pixel_supcon(pb, tau);
            worst_pix = std::max(worst_pix, std::abs(pr.loss - pixel_supcon_ref(pb, tau)));
        } catch (const std::runtime_error&) {
            // Same-image pools occasionally have no positives at all; the
            // fast op errors there and the oracle has nothing to compare.
        }
    }
    CHECK(worst_self < 1e-10);
    CHECK(worst_img < 1e-10);
    CHECK(worst_pix < 1e-10);
}

TEST_CASE("degeneration: all-distinct labels reduce image_supcon to self_contrast") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        int n = rng.uniform_int(2, 6);
        EmbeddingBatch b = random_image_batch(n, 8, 0.07, 1, rng);
        for (int k = 0; k < n; ++k) {
            b.image_labels[2 * k] = k;  // every source its own class
            b.image_labels[2 * k + 1] = k;
        }
        ContrastResult s = self_contrast(b);
        ContrastResult i = image_supcon(b);
        CHECK(std::abs(s.loss - i.loss) < 1e-12);
        for (std::size_t j = 0; j < s.grad.data.size(); ++j)
            CHECK(std::abs(s.grad.data[j] - i.grad.data[j]) < 1e-12);
    }
}

TEST_CASE("permutation equivariance") {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        EmbeddingBatch b = random_image_batch(4, 8, 0.1, 2, rng);
        double base_self = self_contrast(b).loss;
        double base_img = image_supcon(b).loss;

        std::vector<int> perm(8);
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = 7; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        std::vector<int> inv(8);
        for (int i = 0; i < 8; ++i) inv[perm[i]] = i;

        EmbeddingBatch p = b;
        for (int i = 0; i < 8; ++i) {
            for (int c = 0; c < 8; ++c) p.embeddings.at(i, c) = b.embeddings.at(perm[i], c);
            p.image_labels[i] = b.image_labels[perm[i]];
            p.pairing[i] = inv[b.pairing[perm[i]]];
        }
        CHECK(std::abs(self_contrast(p).loss - base_self) < 1e-12);
        CHECK(std::abs(image_supcon(p).loss - base_img) < 1e-12);
    }
}

TEST_CASE("analytic gradients match finite differences") {
    Rng rng(2024);
    double worst_self = 0, worst_img = 0, worst_pix = 0;
    for (int trial = 0; trial < 50; ++trial) {
        int n = rng.uniform_int(2, 4);
        double tau = rng.uniform(0.07, 0.8);
        EmbeddingBatch b = random_image_batch(n, 6, tau, 2, rng);
        {
            ContrastResult r = self_contrast(b);
            worst_self = std::max(worst_self, grad_fd_error(b.embeddings, r.grad, [&] {
                                      return self_contrast(b).loss;
                                  }));
        }
        {
            ContrastResult r = image_supcon(b);
            worst_img = std::max(worst_img, grad_fd_error(b.embeddings, r.grad, [&] {
                                     return image_supcon(b).loss;
                                 }));
        }
        {
            PixelContrastBatch pb = random_pixel_batch(rng.uniform_int(4, 10), 6, 3, rng);
            ContrastResult r = pixel_supcon(pb, tau);
            if (r.anchors_used > 0)
                worst_pix = std::max(worst_pix, grad_fd_error(pb.embeddings, r.grad, [&] {
                                         return pixel_supcon(pb, tau).loss;
                                     }));
        }
    }
    CHECK(worst_self < 1e-4);
    CHECK(worst_img < 1e-4);
    CHECK(worst_pix < 1e-4);
}

TEST_CASE("one supcon descent step does not shrink the positive-negative margin") {
    Rng rng(31);
    auto margin = [](const EmbeddingBatch& b) {
        int n = b.embeddings.shape[0];
        double pos = 0, neg = 0;
        int np = 0, nn = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                double s = 0;
                for (int c = 0; c < b.embeddings.shape[1]; ++c)
                    s += b.embeddings.at(i, c) * b.embeddings.at(j, c);
                if (b.image_labels[i] == b.image_labels[j]) {
                    pos += s;
                    ++np;
                } else {
                    neg += s;
                    ++nn;
                }
            }
        return pos / np - neg / nn;
    };
    for (int trial = 0; trial < 20; ++trial) {
        EmbeddingBatch b = random_image_batch(4, 8, 0.2, 2, rng);
        if (*std::min_element(b.image_labels.begin(), b.image_labels.end()) ==
            *std::max_element(b.image_labels.begin(), b.image_labels.end()))
            b.image_labels[0] = b.image_labels[1] = 1 - b.image_labels[0];
        double before = margin(b);
        ContrastResult r = image_supcon(b);
        Tensor raw = b.embeddings;  // step on raw coordinates, then renormalize
        for (std::size_t i = 0; i < raw.data.size(); ++i) raw.data[i] -= 1e-3 * r.grad.data[i];
        b.embeddings = normalize_embeddings(raw);
        CHECK(margin(b) >= before - 1e-9);
    }
}

TEST_CASE("error paths") {
    EmbeddingBatch b = identical_batch(4, 4, 0.07, true);
    b.normalized = false;
    CHECK_THROWS_AS(self_contrast(b), std::invalid_argument);
    b.normalized = true;
    b.pairing = {1, 0, 3, 3};  // fixed point
    CHECK_THROWS_AS(self_contrast(b), std::invalid_argument);

    // Every anchor skipped in the image loss: labels differ within pairs.
    EmbeddingBatch nopos = identical_batch(4, 4, 0.07, true);
    nopos.image_labels = {0, 1, 2, 3};
    CHECK_THROWS_WITH_AS(image_supcon(nopos), doctest::Contains("no positive pairs in batch"),
                         std::runtime_error);

    // No positives anywhere: singleton pixel classes.
    PixelContrastBatch pb;
    pb.embeddings = normalize_embeddings(Tensor({2, 3}, {1, 0, 0, 0, 1, 0}));
    pb.labels = {0, 1};
    pb.image_of_pixel = {0, 0};
    pb.pool_indices = {0, 1};
    CHECK_THROWS_AS(pixel_supcon(pb, 0.07), std::runtime_error);
    pb.embeddings = normalize_embeddings(Tensor({1, 3}, {1, 0, 0}));
    pb.labels = {0};
    pb.image_of_pixel = {0};
    pb.pool_indices = {0};
    CHECK_THROWS_AS(pixel_supcon(pb, 0.07), std::invalid_argument);
}

TEST_CASE("sample_pixel_anchors: cap behavior, stratification, determinism") {
    // 4x4 map: 8 pixels class 0, 4 class 1, 2 class 2, 2 void.
    std::vector<uint8_t> labels = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 255, 255};
    Rng rng(88);
    Tensor feats({16, 5});
    for (auto& v : feats.data) v = rng.uniform(-1.0, 1.0);
    feats = normalize_embeddings(feats);

    // Cap not binding: every non-void pixel comes back.
    PixelContrastBatch all = sample_pixel_anchors(feats, labels, 16, 9);
    CHECK(static_cast<int>(all.labels.size()) == 14);
    for (int idx : all.pool_indices) CHECK(labels[static_cast<std::size_t>(idx)] != kVoidLabel);

    // Binding cap: exact count, every present class represented.
    PixelContrastBatch six = sample_pixel_anchors(feats, labels, 6, 9);
    CHECK(static_cast<int>(six.labels.size()) == 6);
    std::vector<int> seen(3, 0);
    for (int lab : six.labels) ++seen[static_cast<std::size_t>(lab)];
    for (int c = 0; c < 3; ++c) CHECK(seen[static_cast<std::size_t>(c)] >= 1);

    // Same seed twice: identical pools.
    PixelContrastBatch again = sample_pixel_anchors(feats, labels, 6, 9);
    CHECK(again.pool_indices == six.pool_indices);
    CHECK(again.labels == six.labels);
    // Different seed: allowed to differ (not asserted), but stays valid.
    PixelContrastBatch other = sample_pixel_anchors(feats, labels, 6, 10);
    CHECK(static_cast<int>(other.labels.size()) == 6);

    // Single-class image, cap 4.
    std::vector<uint8_t> mono(16, 3);
    PixelContrastBatch m = sample_pixel_anchors(feats, mono, 4, 1);
    CHECK(static_cast<int>(m.labels.size()) == 4);
    for (int lab : m.labels) CHECK(lab == 3);

    std::vector<uint8_t> allvoid(16, 255);
    CHECK_THROWS_AS(sample_pixel_anchors(feats, allvoid, 4, 1), std::runtime_error);
}
