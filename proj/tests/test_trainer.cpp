#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "dcseg/rng.hpp"
#include "dcseg/trainer.hpp"

using namespace dcseg;

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ToyNetConfig tiny_model() {
    ToyNetConfig c;
    c.input_size = 16;
    c.widths[0] = 4;
    c.widths[1] = 6;
    c.widths[2] = 8;
    c.decoder_width = 6;
    c.num_classes = kNumSceneClasses;
    c.d_proj = 6;
    c.d_pix = 4;
    return c;
}

Dataset tiny_dataset(int train_per_cond, int val_per_cond, int resolution, std::uint64_t seed) {
    DatasetConfig cfg;
    cfg.per_condition_train = train_per_cond;
    cfg.per_condition_val = val_per_cond;
    cfg.resolution = resolution;
    cfg.seed = seed;
    return generate_dataset(cfg);
}

ClassFrequencyTable freq_of(const Dataset& d) {
    std::vector<LabelMap> maps;
    for (const auto* s : d.split("train")) maps.push_back(s->labels);
    return count_class_frequencies(maps, d.num_classes);
}

}  // namespace

TEST_CASE("mode names round trip") {
    for (LossMode m : {LossMode::CE, LossMode::Focal, LossMode::FocalPixel, LossMode::FocalSelf,
                       LossMode::FocalImage, LossMode::FocalSelfPixel, LossMode::FocalImagePixel})
        CHECK(loss_mode_from_name(loss_mode_name(m)) == m);
    CHECK(std::string(loss_mode_name(LossMode::CE)) == "ce");
    CHECK(std::string(loss_mode_name(LossMode::FocalImagePixel)) == "focal+image+pixel");
    CHECK_THROWS(loss_mode_from_name("bogus"));
}

TEST_CASE("combined_loss arithmetic and lambda_c") {
    TrainConfig tc;
    CHECK(tc.lambda_c() == doctest::Approx(0.125).epsilon(1e-15));  // B = 8
    CHECK(combined_loss(0, 0, 1.0, 8, 1.2, LossMode::Focal) ==
          doctest::Approx(1.2).epsilon(1e-15));
    CHECK(combined_loss(2.0, 4.0, 1.0, 8, 1.2, LossMode::FocalImagePixel) ==
          doctest::Approx(1.95).epsilon(1e-15));
    CHECK_THROWS(combined_loss(std::nan(""), 0, 1.0, 8, 1.2, LossMode::FocalImagePixel));
    CHECK_THROWS(combined_loss(0, 0, std::numeric_limits<double>::infinity(), 8, 1.2,
                               LossMode::Focal));
}

TEST_CASE("adam_step: zero grads, first-step sign, quadratic convergence") {
    ToyNetConfig mc = tiny_model();
    ParamSet p = init_params(mc, 1);
    ParamSet before = p;
    OptimizerState st = OptimizerState::init(p);
    std::vector<std::pair<std::string, Tensor>> zeros;
    for (const auto& [name, t] : p.items) zeros.emplace_back(name, Tensor(t.shape));
    adam_step(p, zeros, st, 0.1, 0.9, 0.99, 0.0);
    for (std::size_t i = 0; i < p.items.size(); ++i)
        CHECK(p.items[i].second.data == before.items[i].second.data);

    // Bias-corrected first step moves by about -lr * sign(g).
    ParamSet one;
    one.items.emplace_back("x", Tensor({2}, {1.0, -3.0}));
    OptimizerState s1 = OptimizerState::init(one);
    std::vector<std::pair<std::string, Tensor>> g;
    g.emplace_back("x", Tensor({2}, {0.5, -2.0}));
    adam_step(one, g, s1, 0.1, 0.9, 0.99, 0.0);
    CHECK(one.get("x").at(0) == doctest::Approx(1.0 - 0.1).epsilon(1e-4));
    CHECK(one.get("x").at(1) == doctest::Approx(-3.0 + 0.1).epsilon(1e-4));

    // 100 steps on f(x) = x^2 from x = 1 with lr = 0.1.
    ParamSet q;
    q.items.emplace_back("x", Tensor({1}, {1.0}));
    OptimizerState s2 = OptimizerState::init(q);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::pair<std::string, Tensor>> gr;
        gr.emplace_back("x", Tensor({1}, {2.0 * q.get("x").at(0)}));
        adam_step(q, gr, s2, 0.1, 0.9, 0.99, 0.0);
    }
    CHECK(std::abs(q.get("x").at(0)) < 0.05);

    // Shape mismatch is rejected.
    std::vector<std::pair<std::string, Tensor>> bad;
    bad.emplace_back("x", Tensor({3}));
    CHECK_THROWS(adam_step(q, bad, s2, 0.1, 0.9, 0.99, 0.0));
}

TEST_CASE("cosine schedule endpoints and clamp") {
    CHECK(cosine_lr(0, 100, 4e-4, 1e-6) == doctest::Approx(4e-4).epsilon(1e-15));
    CHECK(cosine_lr(50, 100, 4e-4, 1e-6) == doctest::Approx(2.005e-4).epsilon(1e-12));
    CHECK(cosine_lr(100, 100, 4e-4, 1e-6) == doctest::Approx(1e-6).epsilon(1e-9));
    CHECK(cosine_lr(250, 100, 4e-4, 1e-6) == doctest::Approx(1e-6).epsilon(1e-15));
}

TEST_CASE("checkpoint round trips byte-identically and validates shapes") {
    ToyNetConfig mc = tiny_model();
    ParamSet p = init_params(mc, 5);
    OptimizerState opt = OptimizerState::init(p);
    opt.step = 3;
    fs::path dir = fs::temp_directory_path() / "dcseg_ckpt_test";
    fs::create_directories(dir);
    std::string a = (dir / "a.ckpt").string();
    std::string b = (dir / "b.ckpt").string();

    TrainConfig tc;
    save_train_checkpoint(a, p, opt, canonical_config_json(tc, mc));
    LoadedCheckpoint lc = load_train_checkpoint(a);
    CHECK(lc.opt.step == 3);
    save_train_checkpoint(b, lc.params, lc.opt, canonical_config_json(tc, mc));
    CHECK(slurp(a) == slurp(b));

    // Loaded parameters equal the in-memory ones exactly.
    for (std::size_t i = 0; i < p.items.size(); ++i) {
        CHECK(lc.params.items[i].first == p.items[i].first);
        CHECK(lc.params.items[i].second.data == p.items[i].second.data);
    }

    // Wrong class count: named shape error.
    ToyNetConfig other = tiny_model();
    other.num_classes = 4;
    ParamSet q = init_params(other, 5);
    CHECK_THROWS_WITH_AS(load_params_into(lc, q), doctest::Contains("head.logits"),
                         std::runtime_error);

    // Model config reconstructs from tensor shapes alone.
    ToyNetConfig inferred = infer_model_config(lc.params, mc.input_size);
    CHECK(inferred.widths[0] == mc.widths[0]);
    CHECK(inferred.widths[2] == mc.widths[2]);
    CHECK(inferred.decoder_width == mc.decoder_width);
    CHECK(inferred.num_classes == mc.num_classes);
    CHECK(inferred.d_proj == mc.d_proj);
    CHECK(inferred.d_pix == mc.d_pix);

    // Truncation is reported with an offset.
    std::string whole = slurp(a);
    std::ofstream(b, std::ios::binary) << whole.substr(0, whole.size() / 2);
    CHECK_THROWS(load_train_checkpoint(b));
    fs::remove_all(dir);
}

TEST_CASE("one combined-objective step decreases the frozen-batch loss") {
    ToyNetConfig mc = tiny_model();
    Dataset data = tiny_dataset(2, 1, 16, 21);
    ClassFrequencyTable table = freq_of(data);
    TrainConfig tc;
    tc.mode = LossMode::FocalImagePixel;
    tc.batch_size = 4;
    tc.anchor_cap = 8;
    tc.crop_size = 12;

    auto sources = data.split("train");
    int wins = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<const LabeledScene*> batch_sources;
        Rng rng(derive_seed(900, trial + 1));
        for (int i = 0; i < tc.batch_size; ++i)
            batch_sources.push_back(sources[rng.uniform_int(0, (int)sources.size() - 1)]);
        MultiViewBatch batch = build_multiview_batch(batch_sources, derive_seed(901, trial + 1),
                                                     tc.crop_size, mc.input_size);
        ParamSet params = init_params(mc, derive_seed(902, trial + 1));
        OptimizerState opt = OptimizerState::init(params);
        std::uint64_t step_seed = derive_seed(903, trial + 1);

        ParamSet frozen = params;
        OptimizerState probe = OptimizerState::init(frozen);
        double before = train_step(tc, mc, batch, table, frozen, probe, 0.0, step_seed).combined;

        StepLosses moved = train_step(tc, mc, batch, table, params, opt, 1e-4, step_seed);
        CHECK(moved.combined == doctest::Approx(before).epsilon(1e-12));

        OptimizerState probe2 = OptimizerState::init(params);
        double after = train_step(tc, mc, batch, table, params, probe2, 0.0, step_seed).combined;
        if (after < before) ++wins;
    }
    CHECK(wins >= 19);
}

TEST_CASE("mode f equals mode g when all batch conditions are distinct") {
    ToyNetConfig mc = tiny_model();
    Dataset data = tiny_dataset(1, 1, 16, 50);  // one train scene per condition
    ClassFrequencyTable table = freq_of(data);

    auto sources = data.split("train");
    REQUIRE(sources.size() == 4);
    MultiViewBatch batch = build_multiview_batch(sources, 33, 12, mc.input_size);

    TrainConfig f;
    f.mode = LossMode::FocalSelfPixel;
    f.batch_size = 4;
    f.anchor_cap = 8;
    TrainConfig g = f;
    g.mode = LossMode::FocalImagePixel;

    ParamSet pf = init_params(mc, 9);
    ParamSet pg = init_params(mc, 9);
    OptimizerState of = OptimizerState::init(pf);
    OptimizerState og = OptimizerState::init(pg);
    StepLosses lf = train_step(f, mc, batch, table, pf, of, 1e-4, 7);
    StepLosses lg = train_step(g, mc, batch, table, pg, og, 1e-4, 7);
    CHECK(std::abs(lf.combined - lg.combined) < 1e-12);
    CHECK(std::abs(lf.image - lg.image) < 1e-12);
    // The parameter updates coincide as well.
    for (std::size_t i = 0; i < pf.items.size(); ++i)
        for (std::size_t j = 0; j < pf.items[i].second.data.size(); ++j)
            CHECK(std::abs(pf.items[i].second.data[j] - pg.items[i].second.data[j]) < 1e-12);
}

TEST_CASE("objective consistency: step losses recompose through combined_loss") {
    ToyNetConfig mc = tiny_model();
    Dataset data = tiny_dataset(2, 1, 16, 77);
    ClassFrequencyTable table = freq_of(data);
    auto sources = data.split("train");
    MultiViewBatch batch =
        build_multiview_batch({sources[0], sources[1], sources[2], sources[3]}, 5, 12, 16);
    for (LossMode m : {LossMode::CE, LossMode::Focal, LossMode::FocalPixel, LossMode::FocalSelf,
                       LossMode::FocalImage, LossMode::FocalSelfPixel, LossMode::FocalImagePixel}) {
        TrainConfig tc;
        tc.mode = m;
        tc.batch_size = 4;
        tc.anchor_cap = 8;
        ParamSet p = init_params(mc, 3);
        OptimizerState opt = OptimizerState::init(p);
        StepLosses l = train_step(tc, mc, batch, table, p, opt, 1e-4, 11);
        double image_slot = (mode_has_image(m) || mode_has_self(m)) ? l.image : 0.0;
        double pixel = mode_has_pixel(m) ? l.pixel : 0.0;
        CHECK(std::abs(l.combined - combined_loss(image_slot, pixel, l.seg, tc.batch_size,
                                                  tc.lambda_s, m)) < 1e-12);
        if (!mode_has_pixel(m)) CHECK(l.pixel == 0.0);
        if (!mode_has_image(m) && !mode_has_self(m)) CHECK(l.image == 0.0);
    }
}

TEST_CASE("one-epoch training is deterministic byte-for-byte") {
    ToyNetConfig mc = tiny_model();
    Dataset data = tiny_dataset(2, 1, 16, 99);
    ClassFrequencyTable table = freq_of(data);

    TrainConfig tc;
    tc.mode = LossMode::FocalImagePixel;
    tc.batch_size = 4;
    tc.epochs = 1;
    tc.anchor_cap = 8;
    tc.crop_size = 12;
    tc.seed = 17;

    fs::path d1 = fs::temp_directory_path() / "dcseg_train_det_1";
    fs::path d2 = fs::temp_directory_path() / "dcseg_train_det_2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    TrainResult r1 = train(tc, mc, data, table, d1.string());
    TrainResult r2 = train(tc, mc, data, table, d2.string());
    CHECK(slurp(r1.metrics_path) == slurp(r2.metrics_path));
    CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));
    REQUIRE(r1.log.size() == 1);
    CHECK(std::isfinite(r1.log[0].train_loss));
    CHECK(r1.log[0].val_miou >= 0.0);

    // Metrics CSV header is the documented contract.
    std::string csv = slurp(r1.metrics_path);
    CHECK(csv.rfind("epoch,mode,seed,lr,train_loss,L_seg,L_image,L_pixel,val_miou,miou_fog,"
                    "miou_night,miou_rain,miou_snow\n",
                    0) == 0);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("config validation") {
    TrainConfig tc;
    tc.batch_size = 0;
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    tc.lr_min = 1.0;
    CHECK_THROWS(tc.validate());
    tc = TrainConfig{};
    tc.tau = 0.0;
    CHECK_THROWS(tc.validate());
}
