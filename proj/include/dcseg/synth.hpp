#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcseg/common.hpp"
#include "dcseg/tensor.hpp"

namespace dcseg {

// Toy class set for the procedural scenes.
enum SceneClass : std::uint8_t {
    kSky = 0,
    kRoad = 1,
    kSidewalk = 2,
    kBuilding = 3,
    kVehicle = 4,
    kPole = 5,
};
constexpr int kNumSceneClasses = 6;

struct LabeledScene {
    Tensor image;          // [3,H,W], values in [0,1]
    LabelMap labels;       // class ids, void = 255
    Condition condition = Condition::Fog;
    std::string split;     // "train" | "val"
    std::string id;
};

struct GeometryConfig {
    int resolution = 64;
    double road_min_width = 0.25; // fraction of image width at the bottom edge
};

/// Procedural road scene: horizon split with a building band, road trapezoid,
/// sidewalk strips, 1-4 vehicle blobs, 0-3 thin poles. Deterministic per seed.
LabeledScene generate_scene(std::uint64_t seed, const GeometryConfig& geo = {});

/// Photometric condition transform; the label map is never modified.
void apply_condition(LabeledScene& scene, Condition condition, std::uint64_t seed);

struct AugmentRecord {
    int crop_x = 0;
    int crop_y = 0;
    int crop_size = 0;
    double scale = 1.0;
};

struct AugmentedView {
    Tensor image;     // [3, out, out]
    LabelMap labels;  // nearest-neighbor resampled
    Condition condition;
    AugmentRecord record;
};

/// Random square crop then scale by u ~ U(0.5, 2.0), resized back to
/// `out_size`. Bilinear for the image, nearest for labels, no photometric
/// jitter. Deterministic per seed.
AugmentedView augment_view(const LabeledScene& scene, std::uint64_t seed, int crop_size = 48,
                           int out_size = 64);

struct MultiViewBatch {
    std::vector<AugmentedView> views; // 2N, views (2k, 2k+1) share source k
    std::vector<int> pairing;
};

MultiViewBatch build_multiview_batch(const std::vector<const LabeledScene*>& sources,
                                     std::uint64_t seed, int crop_size = 48, int out_size = 64);

struct DatasetConfig {
    int per_condition_train = 400;
    int per_condition_val = 100;
    int resolution = 64;
    std::uint64_t seed = 1;
    bool clear_weather = false; // condition transforms disabled (pretraining surrogate)
};

struct Dataset {
    std::vector<LabeledScene> scenes;
    int resolution = 0;
    int num_classes = kNumSceneClasses;

    std::vector<const LabeledScene*> split(const std::string& name) const;
};

Dataset generate_dataset(const DatasetConfig& config);

/// On-disk layout: manifest.json, images/<id>.ppm, labels/<id>.pgm.
void write_dataset(const std::string& directory, const Dataset& data);
Dataset read_dataset(const std::string& directory);

}  // namespace dcseg
