#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcseg/checkpoint.hpp"
#include "dcseg/contrastive.hpp"
#include "dcseg/metrics.hpp"
#include "dcseg/model.hpp"
#include "dcseg/segloss.hpp"
#include "dcseg/synth.hpp"

namespace dcseg {

// Experiment rows (a)-(g).
enum class LossMode {
    CE,              // (a)
    Focal,           // (b)
    FocalPixel,      // (c)
    FocalSelf,       // (d)
    FocalImage,      // (e)
    FocalSelfPixel,  // (f)
    FocalImagePixel, // (g)
};

const char* loss_mode_name(LossMode mode);
LossMode loss_mode_from_name(const std::string& name);

bool mode_has_pixel(LossMode mode);
bool mode_has_self(LossMode mode);
bool mode_has_image(LossMode mode);

struct TrainConfig {
    LossMode mode = LossMode::FocalImagePixel;
    double tau = 0.07;
    double gamma = 0.5;
    double eps = 0.1;
    double sigma_edt = 10.0;
    double lambda_s = 1.2;
    int batch_size = 8;
    int epochs = 60;
    double lr0 = 4e-4;
    double weight_decay = 1e-4;
    double lr_min = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.99;
    int anchor_cap = 32;
    int crop_size = 48;
    std::uint64_t seed = 1;
    PoolPolicy pool_policy = PoolPolicy::BatchWide;
    std::string pretrain_checkpoint;

    // lambda_c is always derived from the batch size, never set directly.
    double lambda_c() const { return 1.0 / batch_size; }
    void validate() const;
};

struct OptimizerState {
    std::vector<std::pair<std::string, Tensor>> m;
    std::vector<std::pair<std::string, Tensor>> v;
    std::int64_t step = 0;

    static OptimizerState init(const ParamSet& params);
};

/// Classic Adam with bias correction; weight decay enters as an L2 term added
/// to the gradients before the moment updates.
void adam_step(ParamSet& params, const std::vector<std::pair<std::string, Tensor>>& grads,
               OptimizerState& state, double lr, double beta1, double beta2, double weight_decay);

/// lr(t) = lr_min + 0.5 (lr0 - lr_min)(1 + cos(pi t / T)); t > T clamps to lr_min.
double cosine_lr(std::int64_t t, std::int64_t total_steps, double lr0, double lr_min);

/// L = (1/B)(L_image_slot + L_pixel) + lambda_s * L_seg; components outside
/// the mode must be passed as 0.
double combined_loss(double l_image_slot, double l_pixel, double l_seg, int batch_size,
                     double lambda_s, LossMode mode);

struct StepLosses {
    double combined = 0.0;
    double seg = 0.0;
    double image = 0.0;
    double pixel = 0.0;
};

/// Forward all views of a fixed multi-view batch on a shared tape, seed the
/// three heads with analytic loss gradients, and run one reverse sweep.
/// Returns the component losses; `grads` (if non-null) receives dL/dparam in
/// parameter order. Does not touch the parameters.
StepLosses batch_gradients(const TrainConfig& tc, const ToyNetConfig& mc,
                           const MultiViewBatch& batch, const ClassFrequencyTable& table,
                           const ParamSet& params, std::uint64_t step_seed,
                           std::vector<std::pair<std::string, Tensor>>* grads);

/// One optimization step on a fixed multi-view batch: batch_gradients followed
/// by one Adam update. With lr = 0 it reports the batch losses without moving
/// the parameters.
StepLosses train_step(const TrainConfig& tc, const ToyNetConfig& mc, const MultiViewBatch& batch,
                      const ClassFrequencyTable& table, ParamSet& params, OptimizerState& opt,
                      double lr, std::uint64_t step_seed);

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double l_seg = 0.0;
    double l_image = 0.0;
    double l_pixel = 0.0;
    double val_miou = 0.0;
    double miou_condition[kNumConditions] = {0, 0, 0, 0};
};

struct TrainResult {
    ParamSet params;
    OptimizerState opt;
    std::vector<EpochMetrics> log;
    std::string metrics_path;
    std::string checkpoint_path;
};

TrainResult train(const TrainConfig& tc, const ToyNetConfig& mc, const Dataset& data,
                  const ClassFrequencyTable& table, const std::string& out_dir);

/// Full forward pass over `scenes`, argmax prediction, per-condition report.
ConditionReport evaluate(const ParamSet& params, const ToyNetConfig& mc,
                         const std::vector<const LabeledScene*>& scenes);

std::string canonical_config_json(const TrainConfig& tc, const ToyNetConfig& mc);

void save_train_checkpoint(const std::string& path, const ParamSet& params,
                           const OptimizerState& opt, const std::string& canonical_config);

struct LoadedCheckpoint {
    ParamSet params;
    OptimizerState opt;
    std::array<std::uint8_t, 32> config_hash;
};

LoadedCheckpoint load_train_checkpoint(const std::string& path);

/// Copies checkpoint parameters into an existing ParamSet; a shape or name
/// mismatch raises an error listing the offending tensors.
void load_params_into(const LoadedCheckpoint& ck, ParamSet& params);

/// Reconstructs the model configuration from checkpoint tensor shapes.
ToyNetConfig infer_model_config(const ParamSet& params, int input_size);

}  // namespace dcseg
