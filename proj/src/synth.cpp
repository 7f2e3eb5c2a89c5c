#include "dcseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dcseg/netpbm.hpp"
#include "dcseg/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace dcseg {

namespace {

struct Rgb {
    double r, g, b;
};

void paint(Tensor& img, int y, int x, const Rgb& c) {
    img.at(0, y, x) = c.r;
    img.at(1, y, x) = c.g;
    img.at(2, y, x) = c.b;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Bilinear sample with half-pixel centers, edge clamped.
double sample_bilinear(const Tensor& img, int c, double sy, double sx) {
    const int h = img.shape[1], w = img.shape[2];
    const double fy = std::clamp(sy, 0.0, h - 1.0);
    const double fx = std::clamp(sx, 0.0, w - 1.0);
    const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double wy = fy - y0, wx = fx - x0;
    return (1 - wy) * ((1 - wx) * img.at(c, y0, x0) + wx * img.at(c, y0, x1)) +
           wy * ((1 - wx) * img.at(c, y1, x0) + wx * img.at(c, y1, x1));
}

Tensor resize_bilinear(const Tensor& img, int oh, int ow) {
    const int h = img.shape[1], w = img.shape[2];
    Tensor out({3, oh, ow});
    const double sy = static_cast<double>(h) / oh, sx = static_cast<double>(w) / ow;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                out.at(c, y, x) =
                    sample_bilinear(img, c, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
    return out;
}

LabelMap resize_nearest(const LabelMap& labels, int oh, int ow) {
    const int h = labels.height, w = labels.width;
    LabelMap out(oh, ow);
    const double sy = static_cast<double>(h) / oh, sx = static_cast<double>(w) / ow;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const int iy = std::min(h - 1, static_cast<int>((y + 0.5) * sy));
            const int ix = std::min(w - 1, static_cast<int>((x + 0.5) * sx));
            out.at(y, x) = labels.at(iy, ix);
        }
    return out;
}

}  // namespace

LabeledScene generate_scene(std::uint64_t seed, const GeometryConfig& geo) {
    const int R = geo.resolution;
    if (R < 16) throw std::invalid_argument("generate_scene: resolution too small");
    if (geo.road_min_width <= 0.0 || geo.road_min_width > 0.9)
        throw std::invalid_argument("generate_scene: degenerate road geometry");

    Rng rng(seed);
    LabeledScene s;
    s.image = Tensor({3, R, R});
    s.labels = LabelMap(R, R);

    const int horizon = static_cast<int>(R * rng.uniform(0.35, 0.55));
    const double road_cx = R * rng.uniform(0.40, 0.60);
    const double road_halfw_bottom = R * rng.uniform(geo.road_min_width / 2.0, 0.45);
    const double drift = R * rng.uniform(-0.08, 0.08); // road center shift toward the horizon
    const double sidewalk_w = R * rng.uniform(0.05, 0.12);

    // Building skyline: piecewise-constant heights above the horizon.
    std::vector<int> building_top(R, horizon);
    {
        int x = 0;
        while (x < R) {
            const int seg = rng.uniform_int(R / 8, R / 3);
            const int top = horizon - rng.uniform_int(2, std::max(3, horizon - 2));
            for (int i = x; i < std::min(R, x + seg); ++i) building_top[i] = std::max(0, top);
            x += seg;
        }
    }

    const Rgb sky_col{0.55, 0.70, 0.92};
    const Rgb road_col{0.30, 0.30, 0.33};
    const Rgb side_col{0.56, 0.51, 0.46};
    const Rgb bld_col{0.44, 0.34, 0.30};
    const Rgb pole_col{0.18, 0.18, 0.18};

    for (int y = 0; y < R; ++y) {
        const double shade = 1.0 - 0.15 * y / R;
        for (int x = 0; x < R; ++x) {
            Rgb c;
            std::uint8_t id;
            if (y < horizon) {
                if (y < building_top[x]) {
                    id = kSky;
                    c = sky_col;
                } else {
                    id = kBuilding;
                    c = bld_col;
                }
            } else {
                const double t = static_cast<double>(y - horizon) /
                                 std::max(1, R - 1 - horizon);
                const double cx = road_cx + (1.0 - t) * drift;
                const double halfw = 1.0 + t * (road_halfw_bottom - 1.0);
                const double off = std::abs(x - cx);
                if (off <= halfw) {
                    id = kRoad;
                    c = road_col;
                } else if (off <= halfw + sidewalk_w * (0.3 + 0.7 * t)) {
                    id = kSidewalk;
                    c = side_col;
                } else {
                    id = kBuilding;
                    c = bld_col;
                }
            }
            const double noise = rng.uniform(-0.03, 0.03);
            s.labels.at(y, x) = id;
            paint(s.image, y, x,
                  {clamp01(c.r * shade + noise), clamp01(c.g * shade + noise),
                   clamp01(c.b * shade + noise)});
        }
    }

    // Vehicle blobs on the road.
    const int nveh = rng.uniform_int(1, 4);
    for (int v = 0; v < nveh; ++v) {
        const double t = rng.uniform(0.35, 0.95);
        const int cy = horizon + static_cast<int>(t * (R - 1 - horizon));
        const double cx = road_cx + (1.0 - t) * drift + rng.uniform(-0.5, 0.5) * road_halfw_bottom * t;
        const double rx = std::max(1.5, R * rng.uniform(0.02, 0.06) * (0.3 + t));
        const double ry = rx * rng.uniform(0.5, 0.8);
        const Rgb vc{rng.uniform(0.4, 0.9), rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5)};
        for (int y = std::max(0, cy - static_cast<int>(ry) - 1);
             y <= std::min(R - 1, cy + static_cast<int>(ry) + 1); ++y)
            for (int x = std::max(0, static_cast<int>(cx - rx) - 1);
                 x <= std::min(R - 1, static_cast<int>(cx + rx) + 1); ++x) {
                const double dy = (y - cy) / ry, dx = (x - cx) / rx;
                if (dy * dy + dx * dx <= 1.0) {
                    s.labels.at(y, x) = kVehicle;
                    paint(s.image, y, x, vc);
                }
            }
    }

    // Thin poles rising from the sidewalk band.
    const int npoles = rng.uniform_int(0, 3);
    for (int pidx = 0; pidx < npoles; ++pidx) {
        const int x = rng.uniform_int(2, R - 3);
        const int base = horizon + rng.uniform_int(2, std::max(3, (R - horizon) / 2));
        const int top = std::max(0, base - rng.uniform_int(R / 4, R / 2));
        for (int y = top; y <= std::min(R - 1, base); ++y) {
            s.labels.at(y, x) = kPole;
            paint(s.image, y, x, pole_col);
        }
    }

    return s;
}

void apply_condition(LabeledScene& scene, Condition condition, std::uint64_t seed) {
    Rng rng(seed);
    Tensor& img = scene.image;
    const int h = img.shape[1], w = img.shape[2];

    switch (condition) {
        case Condition::Fog: {
            const double strength = rng.uniform(0.45, 0.85);
            const int horizon_guess = h / 2;
            for (int y = 0; y < h; ++y) {
                // Depth proxy: strongest at the horizon, weaker near the camera.
                const double depth =
                    1.0 - std::abs(y - horizon_guess) / static_cast<double>(h);
                const double a = strength * depth;
                for (int x = 0; x < w; ++x)
                    for (int c = 0; c < 3; ++c)
                        img.at(c, y, x) = clamp01((1.0 - a) * img.at(c, y, x) + a * 0.7);
            }
            break;
        }
        case Condition::Night: {
            const double gamma_img = 2.2;
            const Rgb tint{0.32, 0.32, 0.48}; // blue shift
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    img.at(0, y, x) = clamp01(std::pow(img.at(0, y, x), gamma_img) * tint.r);
                    img.at(1, y, x) = clamp01(std::pow(img.at(1, y, x), gamma_img) * tint.g);
                    img.at(2, y, x) = clamp01(std::pow(img.at(2, y, x), gamma_img) * tint.b);
                }
            break;
        }
        case Condition::Rain: {
            // Overcast dim plus diagonal streaks.
            for (double& v : img.data) v = clamp01(v * 0.85);
            const int nstreaks = rng.uniform_int(h / 2, h);
            for (int sidx = 0; sidx < nstreaks; ++sidx) {
                int x = rng.uniform_int(0, w - 1);
                int y = rng.uniform_int(0, h - 1);
                const int len = rng.uniform_int(4, std::max(5, h / 5));
                for (int t = 0; t < len && y < h && x < w; ++t, y += 2, x += 1)
                    for (int c = 0; c < 3; ++c)
                        img.at(c, y, x) = clamp01(img.at(c, y, x) + 0.22);
            }
            break;
        }
        case Condition::Snow: {
            const int nflakes = rng.uniform_int(h / 4, h / 2);
            for (int f = 0; f < nflakes; ++f) {
                const int cx = rng.uniform_int(0, w - 1);
                const int cy = rng.uniform_int(0, h - 1);
                const int rad = rng.uniform_int(1, 2);
                for (int y = std::max(0, cy - rad); y <= std::min(h - 1, cy + rad); ++y)
                    for (int x = std::max(0, cx - rad); x <= std::min(w - 1, cx + rad); ++x) {
                        if ((y - cy) * (y - cy) + (x - cx) * (x - cx) > rad * rad) continue;
                        for (int c = 0; c < 3; ++c)
                            img.at(c, y, x) = clamp01(img.at(c, y, x) + 0.8 * (1.0 - img.at(c, y, x)));
                    }
            }
            break;
        }
        default:
            throw std::invalid_argument("apply_condition: unknown condition id");
    }
    scene.condition = condition;
}

AugmentedView augment_view(const LabeledScene& scene, std::uint64_t seed, int crop_size,
                           int out_size) {
    const int h = scene.image.shape[1], w = scene.image.shape[2];
    if (crop_size > std::min(h, w))
        throw std::invalid_argument("augment_view: crop larger than image");

    Rng rng(seed);
    AugmentedView v;
    v.condition = scene.condition;
    v.record.crop_size = crop_size;
    v.record.crop_x = rng.uniform_int(0, w - crop_size);
    v.record.crop_y = rng.uniform_int(0, h - crop_size);
    v.record.scale = rng.uniform(0.5, 2.0);

    Tensor crop({3, crop_size, crop_size});
    LabelMap lcrop(crop_size, crop_size);
    for (int y = 0; y < crop_size; ++y)
        for (int x = 0; x < crop_size; ++x) {
            for (int c = 0; c < 3; ++c)
                crop.at(c, y, x) = scene.image.at(c, v.record.crop_y + y, v.record.crop_x + x);
            lcrop.at(y, x) = scene.labels.at(v.record.crop_y + y, v.record.crop_x + x);
        }

    const int mid = std::clamp(static_cast<int>(std::lround(crop_size * v.record.scale)), 8, 192);
    const Tensor scaled = resize_bilinear(crop, mid, mid);
    const LabelMap lscaled = resize_nearest(lcrop, mid, mid);
    v.image = resize_bilinear(scaled, out_size, out_size);
    v.labels = resize_nearest(lscaled, out_size, out_size);
    return v;
}

MultiViewBatch build_multiview_batch(const std::vector<const LabeledScene*>& sources,
                                     std::uint64_t seed, int crop_size, int out_size) {
    if (sources.empty()) throw std::invalid_argument("build_multiview_batch: no sources");
    MultiViewBatch b;
    for (std::size_t k = 0; k < sources.size(); ++k) {
        for (int view = 0; view < 2; ++view) {
            b.views.push_back(
                augment_view(*sources[k], derive_seed(seed, k + 1, view + 1), crop_size, out_size));
        }
        b.pairing.push_back(static_cast<int>(2 * k + 1));
        b.pairing.push_back(static_cast<int>(2 * k));
    }
    return b;
}

std::vector<const LabeledScene*> Dataset::split(const std::string& name) const {
    std::vector<const LabeledScene*> out;
    for (const auto& s : scenes)
        if (s.split == name) out.push_back(&s);
    return out;
}

Dataset generate_dataset(const DatasetConfig& config) {
    Dataset d;
    d.resolution = config.resolution;
    GeometryConfig geo;
    geo.resolution = config.resolution;

    std::uint64_t index = 0;
    for (const char* split : {"train", "val"}) {
        const int count = std::string(split) == "train" ? config.per_condition_train
                                                        : config.per_condition_val;
        for (int cond = 0; cond < kNumConditions; ++cond) {
            for (int i = 0; i < count; ++i, ++index) {
                LabeledScene s = generate_scene(derive_seed(config.seed, index + 1, 11), geo);
                s.condition = static_cast<Condition>(cond);
                if (!config.clear_weather)
                    apply_condition(s, static_cast<Condition>(cond),
                                    derive_seed(config.seed, index + 1, 13));
                s.split = split;
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%s_%s_%04d", split,
                              condition_name(static_cast<Condition>(cond)), i);
                s.id = buf;
                d.scenes.push_back(std::move(s));
            }
        }
    }
    return d;
}

void write_dataset(const std::string& directory, const Dataset& data) {
    fs::create_directories(fs::path(directory) / "images");
    fs::create_directories(fs::path(directory) / "labels");

    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : data.scenes) {
        const std::string img_rel = "images/" + s.id + ".ppm";
        const std::string lbl_rel = "labels/" + s.id + ".pgm";
        write_ppm((fs::path(directory) / img_rel).string(), s.image);
        write_pgm((fs::path(directory) / lbl_rel).string(), s.labels);
        samples.push_back({{"id", s.id},
                           {"condition", condition_name(s.condition)},
                           {"split", s.split},
                           {"image", img_rel},
                           {"label", lbl_rel}});
    }
    nlohmann::json manifest;
    manifest["resolution"] = data.resolution;
    manifest["num_classes"] = data.num_classes;
    manifest["samples"] = samples;
    std::ofstream out((fs::path(directory) / "manifest.json").string());
    if (!out) throw std::runtime_error("write_dataset: cannot open manifest in " + directory);
    out << manifest.dump(2) << "\n";
}

Dataset read_dataset(const std::string& directory) {
    const fs::path manifest_path = fs::path(directory) / "manifest.json";
    std::ifstream in(manifest_path.string());
    if (!in) throw std::runtime_error("read_dataset: no manifest at " + manifest_path.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("read_dataset: malformed manifest " + manifest_path.string() +
                                 ": " + e.what());
    }

    Dataset d;
    d.resolution = manifest.at("resolution").get<int>();
    d.num_classes = manifest.at("num_classes").get<int>();
    for (const auto& item : manifest.at("samples")) {
        LabeledScene s;
        s.id = item.at("id").get<std::string>();
        s.condition = condition_from_name(item.at("condition").get<std::string>());
        s.split = item.at("split").get<std::string>();
        const std::string img_path = (fs::path(directory) / item.at("image").get<std::string>()).string();
        const std::string lbl_path = (fs::path(directory) / item.at("label").get<std::string>()).string();
        s.image = read_ppm(img_path);
        s.labels = read_pgm(lbl_path);
        if (s.image.shape[1] != d.resolution || s.image.shape[2] != d.resolution ||
            s.labels.height != d.resolution || s.labels.width != d.resolution)
            throw std::runtime_error("read_dataset: dimension mismatch in " + img_path);
        d.scenes.push_back(std::move(s));
    }
    return d;
}

}  // namespace dcseg
