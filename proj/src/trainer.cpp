#include "dcseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "dcseg/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace dcseg {

const char* loss_mode_name(LossMode mode) {
    switch (mode) {
        case LossMode::CE: return "ce";
        case LossMode::Focal: return "focal";
        case LossMode::FocalPixel: return "focal+pixel";
        case LossMode::FocalSelf: return "focal+self";
        case LossMode::FocalImage: return "focal+image";
        case LossMode::FocalSelfPixel: return "focal+self+pixel";
        case LossMode::FocalImagePixel: return "focal+image+pixel";
    }
    throw std::invalid_argument("unknown loss mode");
}

LossMode loss_mode_from_name(const std::string& name) {
    for (LossMode m : {LossMode::CE, LossMode::Focal, LossMode::FocalPixel, LossMode::FocalSelf,
                       LossMode::FocalImage, LossMode::FocalSelfPixel, LossMode::FocalImagePixel})
        if (name == loss_mode_name(m)) return m;
    throw std::invalid_argument("unknown loss mode '" + name + "'");
}

bool mode_has_pixel(LossMode m) {
    return m == LossMode::FocalPixel || m == LossMode::FocalSelfPixel ||
           m == LossMode::FocalImagePixel;
}
bool mode_has_self(LossMode m) {
    return m == LossMode::FocalSelf || m == LossMode::FocalSelfPixel;
}
bool mode_has_image(LossMode m) {
    return m == LossMode::FocalImage || m == LossMode::FocalImagePixel;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (lr_min > lr0) throw std::invalid_argument("TrainConfig: lr_min must be <= lr0");
    if (tau <= 0.0) throw std::invalid_argument("TrainConfig: tau must be > 0");
    if (gamma < 0.0) throw std::invalid_argument("TrainConfig: gamma must be >= 0");
    if (sigma_edt <= 0.0) throw std::invalid_argument("TrainConfig: sigma_edt must be > 0");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (anchor_cap < 2) throw std::invalid_argument("TrainConfig: anchor_cap must be >= 2");
}

OptimizerState OptimizerState::init(const ParamSet& params) {
    OptimizerState s;
    for (const auto& [name, t] : params.items) {
        s.m.emplace_back(name, Tensor(t.shape));
        s.v.emplace_back(name, Tensor(t.shape));
    }
    return s;
}

void adam_step(ParamSet& params, const std::vector<std::pair<std::string, Tensor>>& grads,
               OptimizerState& state, double lr, double beta1, double beta2, double weight_decay) {
    // lr = 0 is allowed: it evaluates a step without moving the parameters.
    if (lr < 0.0) throw std::invalid_argument("adam_step: lr must be >= 0");
    if (grads.size() != params.items.size())
        throw std::invalid_argument("adam_step: gradient/parameter count mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    constexpr double kAdamEps = 1e-8;
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        Tensor& p = params.items[i].second;
        const Tensor& g = grads[i].second;
        if (grads[i].first != params.items[i].first || !g.same_shape(p))
            throw std::invalid_argument("adam_step: gradient mismatch for '" +
                                        params.items[i].first + "'");
        Tensor& m = state.m[i].second;
        Tensor& v = state.v[i].second;
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            const double grad = g.data[k] + weight_decay * p.data[k];
            m.data[k] = beta1 * m.data[k] + (1.0 - beta1) * grad;
            v.data[k] = beta2 * v.data[k] + (1.0 - beta2) * grad * grad;
            const double mhat = m.data[k] / bc1;
            const double vhat = v.data[k] / bc2;
            p.data[k] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
}

double cosine_lr(std::int64_t t, std::int64_t total_steps, double lr0, double lr_min) {
    if (t < 0 || total_steps <= 0) throw std::invalid_argument("cosine_lr: bad step");
    if (t > total_steps) return lr_min;
    const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

double combined_loss(double l_image_slot, double l_pixel, double l_seg, int batch_size,
                     double lambda_s, LossMode mode) {
    if (!std::isfinite(l_image_slot)) throw std::runtime_error("combined_loss: non-finite image-level component");
    if (!std::isfinite(l_pixel)) throw std::runtime_error("combined_loss: non-finite pixel component");
    if (!std::isfinite(l_seg)) throw std::runtime_error("combined_loss: non-finite segmentation component");
    if (batch_size < 1) throw std::invalid_argument("combined_loss: bad batch size");
    const double lc = 1.0 / batch_size;
    const double img = (mode_has_image(mode) || mode_has_self(mode)) ? l_image_slot : 0.0;
    const double pix = mode_has_pixel(mode) ? l_pixel : 0.0;
    return lc * (img + pix) + lambda_s * l_seg;
}

namespace {

LabelMap downsample_labels(const LabelMap& labels, int factor) {
    LabelMap out(labels.height / factor, labels.width / factor);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.at(y, x) = labels.at(y * factor + factor / 2, x * factor + factor / 2);
    return out;
}

Tensor grad_row(const Tensor& grads, int row) {
    Tensor out({grads.shape[1]});
    for (int c = 0; c < grads.shape[1]; ++c) out.data[c] = grads.at(row, c);
    return out;
}

SegLossResult view_seg_loss(const Tensor& logits, const LabelMap& labels, LossMode mode,
                            const ClassFrequencyTable& table, double sigma_edt, double eps,
                            double gamma) {
    if (mode == LossMode::CE) return cross_entropy_baseline(logits, labels);
    const WeightMaps weights = build_weight_maps(labels, table, sigma_edt, eps);
    return focal_seg_loss(logits, labels, weights, gamma);
}

void write_metrics_row(std::ostream& out, const EpochMetrics& em, LossMode mode,
                       std::uint64_t seed) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%d,%s,%llu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  em.epoch, loss_mode_name(mode), static_cast<unsigned long long>(seed), em.lr,
                  em.train_loss, em.l_seg, em.l_image, em.l_pixel, em.val_miou,
                  em.miou_condition[0], em.miou_condition[1], em.miou_condition[2],
                  em.miou_condition[3]);
    out << buf;
    out.flush();
}

}  // namespace

StepLosses batch_gradients(const TrainConfig& tc, const ToyNetConfig& mc,
                           const MultiViewBatch& batch, const ClassFrequencyTable& table,
                           const ParamSet& params, std::uint64_t step_seed,
                           std::vector<std::pair<std::string, Tensor>>* grads) {
    const int views = static_cast<int>(batch.views.size());
    Tape tape;
    const auto param_ids = bind_params(tape, params);
    std::vector<ModelNodes> nodes;
    nodes.reserve(views);
    for (const auto& view : batch.views)
        nodes.push_back(model_forward(tape, param_ids, view.image, mc));

    tape.zero_grads();
    StepLosses losses;

    // Segmentation loss, averaged over all views.
    for (int i = 0; i < views; ++i) {
        const SegLossResult seg = view_seg_loss(tape.value(nodes[i].logits), batch.views[i].labels,
                                                tc.mode, table, tc.sigma_edt, tc.eps, tc.gamma);
        losses.seg += seg.loss / views;
        Tensor seed = seg.grad_logits;
        const double scale = tc.lambda_s / views;
        for (double& v : seed.data) v *= scale;
        tape.accumulate_grad(nodes[i].logits, seed);
    }

    // Image-level contrast over the 2N projection embeddings.
    if (mode_has_image(tc.mode) || mode_has_self(tc.mode)) {
        EmbeddingBatch eb;
        eb.embeddings = Tensor({views, mc.d_proj});
        for (int i = 0; i < views; ++i)
            for (int c = 0; c < mc.d_proj; ++c)
                eb.embeddings.at(i, c) = tape.value(nodes[i].image_embedding).data[c];
        eb.pairing = batch.pairing;
        for (const auto& view : batch.views)
            eb.image_labels.push_back(static_cast<int>(view.condition));
        eb.temperature = tc.tau;
        eb.normalized = true;
        const ContrastResult r =
            mode_has_image(tc.mode) ? image_supcon(eb) : self_contrast(eb);
        losses.image = r.loss;
        for (int i = 0; i < views; ++i) {
            Tensor seed = grad_row(r.grad, i);
            for (double& v : seed.data) v *= tc.lambda_c();
            tape.accumulate_grad(nodes[i].image_embedding, seed);
        }
    }

    // Pixel-level contrast on sampled anchors, pooled across views.
    if (mode_has_pixel(tc.mode)) {
        const int stride = mc.pixel_stride;
        PixelContrastBatch pool;
        pool.policy = tc.pool_policy;
        std::vector<std::pair<int, int>> origin; // (view, row in that view's pixel map)
        for (int i = 0; i < views; ++i) {
            const LabelMap small = downsample_labels(batch.views[i].labels, stride);
            PixelContrastBatch pb;
            try {
                pb = sample_pixel_anchors(tape.value(nodes[i].pixel_rows), small.ids, tc.anchor_cap,
                                          derive_seed(step_seed, 100 + i));
            } catch (const std::runtime_error&) {
                continue; // all-void view after augmentation; skip it
            }
            const int base = pool.embeddings.rank() == 2 ? pool.embeddings.shape[0] : 0;
            Tensor merged({base + pb.embeddings.shape[0], mc.d_pix});
            for (int r = 0; r < base; ++r)
                for (int c = 0; c < mc.d_pix; ++c) merged.at(r, c) = pool.embeddings.at(r, c);
            for (int r = 0; r < pb.embeddings.shape[0]; ++r)
                for (int c = 0; c < mc.d_pix; ++c)
                    merged.at(base + r, c) = pb.embeddings.at(r, c);
            pool.embeddings = std::move(merged);
            for (std::size_t r = 0; r < pb.labels.size(); ++r) {
                pool.labels.push_back(pb.labels[r]);
                pool.image_of_pixel.push_back(i);
                origin.emplace_back(i, pb.pool_indices[r]);
            }
        }
        if (pool.embeddings.rank() == 2 && pool.embeddings.shape[0] >= 2) {
            const ContrastResult r = pixel_supcon(pool, tc.tau);
            losses.pixel = r.loss;
            std::vector<Tensor> seeds(views);
            for (int i = 0; i < views; ++i) seeds[i] = Tensor(tape.value(nodes[i].pixel_rows).shape);
            for (std::size_t k = 0; k < origin.size(); ++k) {
                const auto [view, row] = origin[k];
                for (int c = 0; c < mc.d_pix; ++c)
                    seeds[view].at(row, c) += r.grad.at(static_cast<int>(k), c) * tc.lambda_c();
            }
            for (int i = 0; i < views; ++i) tape.accumulate_grad(nodes[i].pixel_rows, seeds[i]);
        }
    }

    losses.combined =
        combined_loss(losses.image, losses.pixel, losses.seg, tc.batch_size, tc.lambda_s, tc.mode);

    tape.run_backward();
    if (grads) {
        grads->clear();
        grads->reserve(params.items.size());
        for (const auto& [name, t] : params.items)
            grads->emplace_back(name, tape.grad(param_ids.at(name)));
    }
    return losses;
}

StepLosses train_step(const TrainConfig& tc, const ToyNetConfig& mc, const MultiViewBatch& batch,
                      const ClassFrequencyTable& table, ParamSet& params, OptimizerState& opt,
                      double lr, std::uint64_t step_seed) {
    std::vector<std::pair<std::string, Tensor>> grads;
    const StepLosses losses = batch_gradients(tc, mc, batch, table, params, step_seed, &grads);
    adam_step(params, grads, opt, lr, tc.beta1, tc.beta2, tc.weight_decay);
    return losses;
}

ConditionReport evaluate(const ParamSet& params, const ToyNetConfig& mc,
                         const std::vector<const LabeledScene*>& scenes) {
    if (scenes.empty()) throw std::invalid_argument("evaluate: no scenes");
    std::vector<ConfusionMatrix> per_sample;
    std::vector<Condition> conds;
    for (const LabeledScene* s : scenes) {
        Tape tape;
        const auto ids = bind_params(tape, params);
        const ModelNodes nodes = model_forward(tape, ids, s->image, mc);
        const Tensor& logits = tape.value(nodes.logits);
        LabelMap pred(s->labels.height, s->labels.width);
        for (int y = 0; y < pred.height; ++y)
            for (int x = 0; x < pred.width; ++x) {
                int best = 0;
                for (int c = 1; c < mc.num_classes; ++c)
                    if (logits.at(c, y, x) > logits.at(best, y, x)) best = c;
                pred.at(y, x) = static_cast<std::uint8_t>(best);
            }
        ConfusionMatrix cm(mc.num_classes);
        confusion_update(cm, pred, s->labels);
        per_sample.push_back(std::move(cm));
        conds.push_back(s->condition);
    }
    return condition_report(per_sample, conds);
}

TrainResult train(const TrainConfig& tc, const ToyNetConfig& mc, const Dataset& data,
                  const ClassFrequencyTable& table, const std::string& out_dir) {
    tc.validate();
    mc.validate();
    fs::create_directories(out_dir);

    TrainResult result;
    result.params = init_params(mc, tc.seed);
    if (!tc.pretrain_checkpoint.empty())
        load_params_into(load_train_checkpoint(tc.pretrain_checkpoint), result.params);
    result.opt = OptimizerState::init(result.params);

    const auto train_split = data.split("train");
    const auto val_split = data.split("val");
    if (train_split.empty()) throw std::invalid_argument("train: empty training split");
    const int steps_per_epoch = std::max<int>(1, static_cast<int>(train_split.size()) / tc.batch_size);
    const std::int64_t total_steps = static_cast<std::int64_t>(steps_per_epoch) * tc.epochs;

    result.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    std::ofstream csv(result.metrics_path);
    if (!csv) throw std::runtime_error("train: cannot open " + result.metrics_path);
    csv << "epoch,mode,seed,lr,train_loss,L_seg,L_image,L_pixel,val_miou,miou_fog,miou_night,"
           "miou_rain,miou_snow\n";

    std::vector<int> order(train_split.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    std::int64_t global_step = 0;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(tc.seed, 555, epoch));
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

        EpochMetrics em;
        em.epoch = epoch;
        for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
            std::vector<const LabeledScene*> sources;
            for (int b = 0; b < tc.batch_size; ++b)
                sources.push_back(train_split[order[(step * tc.batch_size + b) % order.size()]]);
            const std::uint64_t step_seed = derive_seed(tc.seed, epoch + 1, step + 1);
            const MultiViewBatch batch =
                build_multiview_batch(sources, step_seed, tc.crop_size, mc.input_size);
            const double lr = cosine_lr(global_step, total_steps, tc.lr0, tc.lr_min);
            const StepLosses losses =
                train_step(tc, mc, batch, table, result.params, result.opt, lr, step_seed);
            em.lr = lr;
            em.train_loss += losses.combined / steps_per_epoch;
            em.l_seg += losses.seg / steps_per_epoch;
            em.l_image += losses.image / steps_per_epoch;
            em.l_pixel += losses.pixel / steps_per_epoch;
        }

        if (!val_split.empty()) {
            const ConditionReport rep = evaluate(result.params, mc, val_split);
            em.val_miou = rep.overall;
            for (int k = 0; k < kNumConditions; ++k) em.miou_condition[k] = rep.per_condition[k];
        }
        write_metrics_row(csv, em, tc.mode, tc.seed);
        result.log.push_back(em);
    }

    result.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
    save_train_checkpoint(result.checkpoint_path, result.params, result.opt,
                          canonical_config_json(tc, mc));
    return result;
}

std::string canonical_config_json(const TrainConfig& tc, const ToyNetConfig& mc) {
    nlohmann::json j;
    j["mode"] = loss_mode_name(tc.mode);
    j["tau"] = tc.tau;
    j["gamma"] = tc.gamma;
    j["eps"] = tc.eps;
    j["sigma_edt"] = tc.sigma_edt;
    j["lambda_s"] = tc.lambda_s;
    j["batch_size"] = tc.batch_size;
    j["epochs"] = tc.epochs;
    j["lr0"] = tc.lr0;
    j["weight_decay"] = tc.weight_decay;
    j["lr_min"] = tc.lr_min;
    j["beta1"] = tc.beta1;
    j["beta2"] = tc.beta2;
    j["anchor_cap"] = tc.anchor_cap;
    j["crop_size"] = tc.crop_size;
    j["seed"] = tc.seed;
    j["pool_policy"] = tc.pool_policy == PoolPolicy::BatchWide ? "batch-wide" : "same-image";
    j["model"] = {{"input_size", mc.input_size},
                  {"widths", {mc.widths[0], mc.widths[1], mc.widths[2]}},
                  {"decoder_width", mc.decoder_width},
                  {"num_classes", mc.num_classes},
                  {"d_proj", mc.d_proj},
                  {"d_pix", mc.d_pix},
                  {"image_tap", mc.image_tap == ImageTap::Fine ? "fine" : "coarse"},
                  {"pixel_stride", mc.pixel_stride}};
    return j.dump();
}

void save_train_checkpoint(const std::string& path, const ParamSet& params,
                           const OptimizerState& opt, const std::string& canonical_config) {
    CheckpointData data;
    for (const auto& [name, t] : params.items) data.tensors.emplace_back(name, t);
    for (const auto& [name, t] : opt.m) data.tensors.emplace_back("adam.m." + name, t);
    for (const auto& [name, t] : opt.v) data.tensors.emplace_back("adam.v." + name, t);
    data.tensors.emplace_back("adam.t", Tensor({1}, {static_cast<double>(opt.step)}));
    data.config_hash = config_hash(canonical_config);
    save_checkpoint(path, data);
}

LoadedCheckpoint load_train_checkpoint(const std::string& path) {
    const CheckpointData data = load_checkpoint(path);
    LoadedCheckpoint out;
    out.config_hash = data.config_hash;
    for (const auto& [name, t] : data.tensors) {
        if (name == "adam.t")
            out.opt.step = static_cast<std::int64_t>(t.data[0]);
        else if (name.rfind("adam.m.", 0) == 0)
            out.opt.m.emplace_back(name.substr(7), t);
        else if (name.rfind("adam.v.", 0) == 0)
            out.opt.v.emplace_back(name.substr(7), t);
        else
            out.params.items.emplace_back(name, t);
    }
    return out;
}

void load_params_into(const LoadedCheckpoint& ck, ParamSet& params) {
    std::string mismatches;
    for (auto& [name, t] : params.items) {
        if (!ck.params.has(name)) {
            mismatches += (mismatches.empty() ? "" : ", ") + name + " (missing)";
            continue;
        }
        const Tensor& src = ck.params.get(name);
        if (!src.same_shape(t)) {
            mismatches += (mismatches.empty() ? "" : ", ") + name + " (shape " + src.shape_str() +
                          " vs " + t.shape_str() + ")";
            continue;
        }
        t = src;
    }
    if (!mismatches.empty())
        throw std::runtime_error("load_params_into: incompatible tensors: " + mismatches);
}

ToyNetConfig infer_model_config(const ParamSet& params, int input_size) {
    ToyNetConfig mc;
    mc.input_size = input_size;
    mc.widths[0] = params.get("enc1.w").shape[0];
    mc.widths[1] = params.get("enc2.w").shape[0];
    mc.widths[2] = params.get("enc3.w").shape[0];
    mc.decoder_width = params.get("lat1.w").shape[0];
    mc.num_classes = params.get("head.logits.w").shape[0];
    mc.d_pix = params.get("head.pix.w").shape[0];
    mc.d_proj = params.get("head.proj_fine.w").shape[0];
    return mc;
}

}  // namespace dcseg
