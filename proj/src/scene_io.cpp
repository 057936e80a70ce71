#include "spnf/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "spnf/errors.hpp"
#include "spnf/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spnf {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

DepthSource parse_source(const std::string& s) {
    if (s == "sensor") return DepthSource::sensor;
    if (s == "model") return DepthSource::model;
    if (s == "analytic") return DepthSource::analytic;
    throw ValidationError("cameras.json: unknown depth_source '" + s + "'");
}

const char* source_name(DepthSource s) {
    switch (s) {
        case DepthSource::sensor: return "sensor";
        case DepthSource::model: return "model";
        default: return "analytic";
    }
}

ImageGray read_raw_depth(const std::string& path, int depth_scale) {
    if (ends_with(path, ".pfm")) return read_pfm(path);
    Gray16 g = read_png_gray16(path);
    ImageGray out(g.width, g.height);
    for (size_t i = 0; i < g.data.size(); ++i)
        out.data[i] = static_cast<float>(g.data[i]) / static_cast<float>(depth_scale);
    return out;
}

void atomic_write_json(const std::string& path, const json& j) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw IoError("cannot open " + tmp + " for writing");
        f << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

}  // namespace

Scene load_scene(const std::string& dir) {
    const std::string cam_path = dir + "/cameras.json";
    std::ifstream f(cam_path);
    if (!f) throw ValidationError("missing cameras.json in " + dir);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ValidationError(cam_path + ": " + e.what());
    }

    Scene scene;
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    const int depth_scale = j.value("depth_scale", 65535);
    const DepthSource source = parse_source(j.value("depth_source", "analytic"));
    const float depth_clip = j.value("depth_clip", 0.f);

    for (const auto& frame : j.at("frames")) {
        Camera cam;
        cam.width = width;
        cam.height = height;
        cam.fx = j.at("fx").get<float>();
        cam.fy = j.at("fy").get<float>();
        cam.cx = j.at("cx").get<float>();
        cam.cy = j.at("cy").get<float>();
        cam.near = frame.at("near").get<float>();
        cam.far = frame.at("far").get<float>();
        const auto& t = frame.at("transform");
        if (t.size() != 16) throw ValidationError(cam_path + ": transform needs 16 floats");
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) cam.cam_to_world(r, c) = t[4 * r + c].get<float>();
        cam.validate();
        scene.cameras.push_back(cam);

        const std::string img_path = dir + "/" + frame.at("image").get<std::string>();
        ImageRGB img = read_png_rgb8(img_path);
        if (img.width != width || img.height != height)
            throw ValidationError(img_path + ": image dimensions do not match cameras.json");
        scene.images.push_back(std::move(img));

        std::optional<DepthPrior> prior;
        if (frame.contains("depth") && !frame.at("depth").is_null()) {
            const std::string dpath = dir + "/" + frame.at("depth").get<std::string>();
            ImageGray raw = read_raw_depth(dpath, depth_scale);
            if (raw.width != width || raw.height != height)
                throw ValidationError(dpath + ": depth dimensions do not match images");
            DepthPrior p;
            switch (source) {
                case DepthSource::sensor:
                    if (!(depth_clip > 0.f))
                        throw ValidationError(cam_path + ": sensor depth requires depth_clip > 0");
                    p = normalize_sensor_depth(raw, depth_clip);
                    break;
                case DepthSource::model:
                    p = normalize_model_depth(raw);
                    break;
                case DepthSource::analytic:
                    p.values = std::move(raw);
                    p.mask = MaskImage(width, height, 1);
                    p.source = DepthSource::analytic;
                    break;
            }
            if (frame.contains("mask") && !frame.at("mask").is_null()) {
                const std::string mpath = dir + "/" + frame.at("mask").get<std::string>();
                MaskImage m = read_png_mask(mpath);
                if (m.width != width || m.height != height)
                    throw ValidationError(mpath + ": mask dimensions do not match images");
                for (size_t i = 0; i < m.data.size(); ++i)
                    if (!m.data[i]) p.mask.data[i] = 0;
            }
            prior = std::move(p);
        }
        scene.priors.push_back(std::move(prior));

        std::optional<ImageGray> gt;
        if (frame.contains("gt_depth") && !frame.at("gt_depth").is_null()) {
            const std::string gpath = dir + "/" + frame.at("gt_depth").get<std::string>();
            ImageGray g = ends_with(gpath, ".pfm") ? read_pfm(gpath)
                                                   : read_raw_depth(gpath, depth_scale);
            if (g.width != width || g.height != height)
                throw ValidationError(gpath + ": gt depth dimensions do not match images");
            gt = std::move(g);
        }
        scene.gt_depth.push_back(std::move(gt));
    }
    return scene;
}

void write_scene(const std::string& dir, const Scene& scene, DepthSource source, int depth_scale,
                 float depth_clip) {
    fs::create_directories(dir + "/images");
    bool any_prior = false, any_gt = false, any_mask = false;
    for (size_t v = 0; v < scene.view_count(); ++v) {
        if (scene.priors[v]) {
            any_prior = true;
            for (uint8_t m : scene.priors[v]->mask.data)
                if (!m) any_mask = true;
        }
        if (scene.gt_depth[v]) any_gt = true;
    }
    if (any_prior) fs::create_directories(dir + "/depth");
    if (any_gt) fs::create_directories(dir + "/gt_depth");
    if (any_mask) fs::create_directories(dir + "/masks");

    json j;
    j["width"] = scene.width();
    j["height"] = scene.height();
    j["fx"] = scene.cameras.at(0).fx;
    j["fy"] = scene.cameras.at(0).fy;
    j["cx"] = scene.cameras.at(0).cx;
    j["cy"] = scene.cameras.at(0).cy;
    j["depth_scale"] = depth_scale;
    j["depth_source"] = source_name(source);
    if (source == DepthSource::sensor) j["depth_clip"] = depth_clip;
    j["frames"] = json::array();

    char name[32];
    for (size_t v = 0; v < scene.view_count(); ++v) {
        std::snprintf(name, sizeof(name), "%03zu", v);
        json frame;
        const std::string img_rel = std::string("images/") + name + ".png";
        write_png_rgb8(dir + "/" + img_rel, scene.images[v]);
        frame["image"] = img_rel;

        frame["depth"] = nullptr;
        frame["mask"] = nullptr;
        if (scene.priors[v]) {
            const DepthPrior& p = *scene.priors[v];
            Gray16 g;
            g.width = p.width();
            g.height = p.height();
            g.data.resize(p.values.data.size());
            for (size_t i = 0; i < g.data.size(); ++i) {
                float canon = p.values.data[i];
                float raw;
                switch (source) {
                    case DepthSource::sensor:
                        // canonical = min(raw, clip)/clip; invalid stored as 0
                        raw = p.mask.data[i] ? canon * depth_clip * depth_scale : 0.f;
                        break;
                    case DepthSource::model:
                        // any monotone decreasing representative works; use 1 - canon
                        raw = (1.f - canon) * depth_scale;
                        break;
                    default:
                        raw = canon * depth_scale;
                        break;
                }
                g.data[i] = static_cast<uint16_t>(
                    std::min(65535.f, std::max(0.f, std::round(raw))));
            }
            const std::string drel = std::string("depth/") + name + ".png";
            write_png_gray16(dir + "/" + drel, g);
            frame["depth"] = drel;
            bool has_invalid = false;
            for (uint8_t m : p.mask.data)
                if (!m) has_invalid = true;
            if (has_invalid) {
                const std::string mrel = std::string("masks/") + name + ".png";
                write_png_mask(dir + "/" + mrel, p.mask);
                frame["mask"] = mrel;
            }
        }
        if (scene.gt_depth[v]) {
            const std::string grel = std::string("gt_depth/") + name + ".pfm";
            write_pfm(dir + "/" + grel, *scene.gt_depth[v]);
            frame["gt_depth"] = grel;
        }

        const Camera& cam = scene.cameras[v];
        json t = json::array();
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) t.push_back(cam.cam_to_world(r, c));
        frame["transform"] = t;
        frame["near"] = cam.near;
        frame["far"] = cam.far;
        j["frames"].push_back(frame);
    }
    atomic_write_json(dir + "/cameras.json", j);
}

std::pair<std::vector<int>, std::vector<int>> select_views(int n_total, int k_train) {
    if (k_train < 1) throw ValidationError("select_views: k_train must be >= 1");
    std::vector<int> test_ids, pool;
    for (int i = 0; i < n_total; ++i)
        (i % 8 == 0 ? test_ids : pool).push_back(i);
    const int p = static_cast<int>(pool.size());
    if (k_train > p)
        throw ValidationError("select_views: k_train exceeds the held-in pool size");
    std::vector<int> train_ids;
    if (k_train == 1) {
        train_ids.push_back(pool[static_cast<int>(std::llround((p - 1) / 2.0))]);
    } else {
        for (int i = 0; i < k_train; ++i) {
            double pos = static_cast<double>(i) * (p - 1) / (k_train - 1);
            train_ids.push_back(pool[static_cast<int>(std::llround(pos))]);
        }
    }
    return {train_ids, test_ids};
}

DepthPrior normalize_sensor_depth(const ImageGray& raw, float clip) {
    if (!(clip > 0.f)) throw ValidationError("normalize_sensor_depth: clip must be > 0");
    DepthPrior p;
    p.source = DepthSource::sensor;
    p.values = ImageGray(raw.width, raw.height);
    p.mask = MaskImage(raw.width, raw.height, 1);
    int n_valid = 0;
    for (size_t i = 0; i < raw.data.size(); ++i) {
        if (raw.data[i] <= 0.f) {
            p.mask.data[i] = 0;
            p.values.data[i] = 0.f;
        } else {
            p.values.data[i] = std::min(raw.data[i], clip) / clip;
            ++n_valid;
        }
    }
    if (n_valid == 0) throw ValidationError("normalize_sensor_depth: all pixels invalid");
    return p;
}

DepthPrior normalize_model_depth(const ImageGray& raw_disparity) {
    float lo = raw_disparity.data.empty() ? 0.f : raw_disparity.data[0];
    float hi = lo;
    for (float v : raw_disparity.data) {
        if (!std::isfinite(v))
            throw ValidationError("normalize_model_depth: non-finite disparity");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo))
        throw ValidationError("normalize_model_depth: constant disparity, ordering undefined");
    DepthPrior p;
    p.source = DepthSource::model;
    p.values = ImageGray(raw_disparity.width, raw_disparity.height);
    p.mask = MaskImage(raw_disparity.width, raw_disparity.height, 1);
    // larger disparity = nearer; negate + min-max so larger canonical = farther
    for (size_t i = 0; i < raw_disparity.data.size(); ++i)
        p.values.data[i] = (hi - raw_disparity.data[i]) / (hi - lo);
    return p;
}

}  // namespace spnf
