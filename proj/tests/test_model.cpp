#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "dcseg/model.hpp"
#include "dcseg/rng.hpp"

using namespace dcseg;

namespace {

Tensor random_image(int size, Rng& rng) {
    Tensor t({3, size, size});
    for (auto& v : t.data) v = rng.uniform(0.0, 1.0);
    return t;
}

ToyNetConfig small_config() {
    ToyNetConfig c;
    c.input_size = 16;
    c.widths[0] = 4;
    c.widths[1] = 6;
    c.widths[2] = 8;
    c.decoder_width = 6;
    c.num_classes = 3;
    c.d_proj = 5;
    c.d_pix = 4;
    return c;
}

}  // namespace

TEST_CASE("init_params: determinism, bounds, analytic count") {
    ToyNetConfig cfg;  // defaults
    ParamSet a = init_params(cfg, 7);
    ParamSet b = init_params(cfg, 7);
    REQUIRE(a.items.size() == b.items.size());
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        CHECK(a.items[i].first == b.items[i].first);
        CHECK(a.items[i].second.data == b.items[i].second.data);
    }
    CHECK(a.total_elements() == expected_param_count(cfg));

    // Every conv weight lies within its fan-in bound.
    for (const auto& [name, t] : a.items) {
        if (t.rank() != 4) continue;
        double fan_in = static_cast<double>(t.shape[1]) * t.shape[2] * t.shape[3];
        double bound = std::sqrt(1.0 / fan_in);
        for (double v : t.data) CHECK(std::abs(v) <= bound);
    }

    ToyNetConfig sm = small_config();
    CHECK(init_params(sm, 1).total_elements() == expected_param_count(sm));
}

TEST_CASE("forward shapes and unit norms") {
    ToyNetConfig cfg = small_config();
    ParamSet params = init_params(cfg, 3);
    Rng rng(40);
    Tensor img = random_image(cfg.input_size, rng);

    Tape tape;
    auto ids = bind_params(tape, params);
    ModelNodes out = model_forward(tape, ids, img, cfg);

    const Tensor& logits = tape.value(out.logits);
    CHECK(logits.shape == std::vector<int>{3, 16, 16});
    CHECK(logits.all_finite());

    const Tensor& emb = tape.value(out.image_embedding);
    CHECK(emb.numel() == static_cast<std::size_t>(cfg.d_proj));
    double n = std::sqrt(dot(emb, emb));
    CHECK(n == doctest::Approx(1.0).epsilon(1e-9));

    const Tensor& rows = tape.value(out.pixel_rows);
    CHECK(rows.shape == std::vector<int>{16, 4});  // (16/4)^2 pixels x d_pix
    for (int r = 0; r < rows.shape[0]; ++r) {
        double s = 0;
        for (int c = 0; c < rows.shape[1]; ++c) s += rows.at(r, c) * rows.at(r, c);
        CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("tap switch changes only the image-embedding path") {
    ToyNetConfig fine = small_config();
    ToyNetConfig coarse = small_config();
    coarse.image_tap = ImageTap::Coarse;
    ParamSet params = init_params(fine, 12);
    Rng rng(8);
    Tensor img = random_image(fine.input_size, rng);

    Tape tf, tc;
    auto idf = bind_params(tf, params);
    auto idc = bind_params(tc, params);
    ModelNodes of = model_forward(tf, idf, img, fine);
    ModelNodes oc = model_forward(tc, idc, img, coarse);

    CHECK(tf.value(of.logits).data == tc.value(oc.logits).data);       // bitwise
    CHECK(tf.value(of.pixel_rows).data == tc.value(oc.pixel_rows).data);
    // The embedding path genuinely differs.
    CHECK(tf.value(of.image_embedding).data != tc.value(oc.image_embedding).data);
}

TEST_CASE("finite-difference gradient through all three heads") {
    ToyNetConfig cfg = small_config();
    cfg.input_size = 8;
    ParamSet params = init_params(cfg, 5);
    Rng rng(60);
    Tensor img = random_image(cfg.input_size, rng);

    // Scalar touching every head: mean(logits) + sum(emb * w1) + mean(rows).
    Tensor wemb({cfg.d_proj});
    for (auto& v : wemb.data) v = rng.uniform(-1.0, 1.0);

    auto scalar_of = [&](const ParamSet& p) {
        Tape t;
        auto ids = bind_params(t, p);
        ModelNodes out = model_forward(t, ids, img, cfg);
        double s = 0.0;
        const Tensor& lg = t.value(out.logits);
        for (double v : lg.data) s += v;
        s /= static_cast<double>(lg.numel());
        const Tensor& e = t.value(out.image_embedding);
        s += dot(e, wemb);
        const Tensor& r = t.value(out.pixel_rows);
        for (double v : r.data) s += v;
        return s;
    };

    // Analytic gradients via the tape.
    Tape t;
    auto ids = bind_params(t, params);
    ModelNodes out = model_forward(t, ids, img, cfg);
    {
        Tensor seed(t.value(out.logits).shape);
        seed.fill(1.0 / static_cast<double>(seed.numel()));
        t.accumulate_grad(out.logits, seed);
    }
    t.accumulate_grad(out.image_embedding, wemb);
    {
        Tensor seed(t.value(out.pixel_rows).shape);
        seed.fill(1.0);
        t.accumulate_grad(out.pixel_rows, seed);
    }
    t.run_backward();

    // Check the first-layer conv and a couple of deeper tensors by FD.
    const double h = 1e-5;
    for (const std::string name :
         {"enc1.w", "enc1.bias", "head.logits.w", "head.proj_fine.w", "head.pix.w"}) {
        const Tensor& analytic = t.grad(ids.at(name));
        ParamSet probe = params;
        Tensor& target = probe.get(name);
        double worst = 0.0;
        // Sample a subset of coordinates to keep the test quick.
        std::size_t stride = std::max<std::size_t>(1, target.data.size() / 24);
        for (std::size_t i = 0; i < target.data.size(); i += stride) {
            double keep = target.data[i];
            target.data[i] = keep + h;
            double up = scalar_of(probe);
            target.data[i] = keep - h;
            double dn = scalar_of(probe);
            target.data[i] = keep;
            double fd = (up - dn) / (2 * h);
            worst = std::max(worst, std::abs(fd - analytic.data[i]) /
                                        std::max(1.0, std::abs(analytic.data[i])));
        }
        INFO("param ", name);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("every parameter reachable from the three heads") {
    ToyNetConfig cfg = small_config();
    ParamSet params = init_params(cfg, 77);
    Rng rng(3);
    Tensor img = random_image(cfg.input_size, rng);

    Tape t;
    auto ids = bind_params(t, params);
    ModelNodes out = model_forward(t, ids, img, cfg);
    Tensor s1(t.value(out.logits).shape);
    s1.fill(1.0);
    Tensor s2(t.value(out.image_embedding).shape);
    s2.fill(1.0);
    Tensor s3(t.value(out.pixel_rows).shape);
    s3.fill(1.0);
    t.accumulate_grad(out.logits, s1);
    t.accumulate_grad(out.image_embedding, s2);
    t.accumulate_grad(out.pixel_rows, s3);
    t.run_backward();

    for (const auto& [name, _] : params.items) {
        if (name == "head.proj_coarse.w") continue;  // inactive under the fine tap
        const Tensor& g = t.grad(ids.at(name));
        double mag = 0.0;
        for (double v : g.data) mag += std::abs(v);
        INFO("param ", name);
        CHECK(g.all_finite());
        CHECK(mag > 0.0);
    }
}

TEST_CASE("config validation") {
    ToyNetConfig bad = small_config();
    bad.input_size = 10;  // not divisible by 8
    CHECK_THROWS(bad.validate());
    bad = small_config();
    bad.d_proj = 1;
    CHECK_THROWS(bad.validate());
    bad = small_config();
    bad.pixel_stride = 2;
    CHECK_THROWS(bad.validate());
}
