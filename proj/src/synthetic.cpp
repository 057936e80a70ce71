#include <cmath>

#include "spnf/errors.hpp"
#include "spnf/renderer.hpp"
#include "spnf/scene_io.hpp"

namespace spnf {

namespace {

struct Hit {
    float t = -1.f;
    Eigen::Vector3f normal = Eigen::Vector3f::UnitZ();
    Eigen::Vector3f albedo = Eigen::Vector3f::Zero();
    bool valid() const { return t > 0.f; }
};

float checker(float u, float v, float scale) {
    int a = static_cast<int>(std::floor(u / scale)) + static_cast<int>(std::floor(v / scale));
    return (a & 1) ? 1.f : 0.f;
}

// Two fronto-parallel planes: a partial occluder at z = -0.6 in front of an
// infinite backdrop at z = -2.
Hit trace_two_planes(const Eigen::Vector3f& o, const Eigen::Vector3f& d) {
    Hit hit;
    // near plane rectangle
    if (std::abs(d.z()) > 1e-8f) {
        float t = (-0.6f - o.z()) / d.z();
        if (t > 0.f) {
            Eigen::Vector3f p = o + t * d;
            if (p.x() >= -1.0f && p.x() <= 0.1f && p.y() >= -0.9f && p.y() <= 0.9f) {
                hit.t = t;
                hit.normal = Eigen::Vector3f::UnitZ();
                float c = 0.12f * checker(p.x(), p.y(), 0.25f);
                float g = 0.08f * std::sin(6.f * p.x()) * std::cos(5.f * p.y());
                hit.albedo = Eigen::Vector3f(0.70f + c + g, 0.35f + c, 0.20f + c);
                return hit;
            }
        }
        // backdrop
        float tb = (-2.0f - o.z()) / d.z();
        if (tb > 0.f) {
            Eigen::Vector3f p = o + tb * d;
            hit.t = tb;
            hit.normal = Eigen::Vector3f::UnitZ();
            float c = 0.12f * checker(p.x(), p.y(), 0.6f);
            float g = 0.08f * std::sin(2.5f * p.x() + 1.f);
            hit.albedo = Eigen::Vector3f(0.25f + c, 0.30f + c + g, 0.60f + c);
        }
    }
    return hit;
}

// Sphere resting above a ground plane, with a backdrop so all rays terminate.
Hit trace_sphere_on_plane(const Eigen::Vector3f& o, const Eigen::Vector3f& d) {
    Hit best;
    const Eigen::Vector3f center(0.f, -0.3f, -1.0f);
    const float radius = 0.5f;
    Eigen::Vector3f oc = o - center;
    float b = oc.dot(d);
    float disc = b * b - (oc.squaredNorm() - radius * radius);
    if (disc > 0.f) {
        float t = -b - std::sqrt(disc);
        if (t > 0.f) {
            best.t = t;
            Eigen::Vector3f p = o + t * d;
            best.normal = (p - center).normalized();
            best.albedo = Eigen::Vector3f(0.75f, 0.25f, 0.25f);
        }
    }
    // ground plane y = -0.8
    if (std::abs(d.y()) > 1e-8f) {
        float t = (-0.8f - o.y()) / d.y();
        if (t > 0.f && (!best.valid() || t < best.t)) {
            Eigen::Vector3f p = o + t * d;
            if (p.z() > -2.5f) {
                best.t = t;
                best.normal = Eigen::Vector3f::UnitY();
                float c = 0.12f * checker(p.x(), p.z(), 0.4f);
                best.albedo = Eigen::Vector3f(0.35f + c, 0.55f + c, 0.30f + c);
            }
        }
    }
    // backdrop z = -2.5
    if (std::abs(d.z()) > 1e-8f) {
        float t = (-2.5f - o.z()) / d.z();
        if (t > 0.f && (!best.valid() || t < best.t)) {
            Eigen::Vector3f p = o + t * d;
            best.t = t;
            best.normal = Eigen::Vector3f::UnitZ();
            float c = 0.12f * checker(p.x(), p.y(), 0.7f);
            best.albedo = Eigen::Vector3f(0.30f + c, 0.35f + c, 0.55f + c);
        }
    }
    return best;
}

Camera arc_camera(int view, int n_views, int res) {
    const Eigen::Vector3f target(0.f, 0.f, -1.0f);
    const Eigen::Vector3f up(0.f, 1.f, 0.f);
    const float radius = 2.5f;
    float angle = (n_views == 1) ? 0.f
                                 : (-25.f + 50.f * static_cast<float>(view) / (n_views - 1)) *
                                       static_cast<float>(M_PI) / 180.f;
    Eigen::Vector3f pos = target + radius * Eigen::Vector3f(std::sin(angle),
                                                            0.12f * std::sin(2.f * angle),
                                                            std::cos(angle));
    Eigen::Vector3f z_axis = (pos - target).normalized();
    Eigen::Vector3f x_axis = up.cross(z_axis).normalized();
    Eigen::Vector3f y_axis = z_axis.cross(x_axis);

    Camera cam;
    cam.width = cam.height = res;
    cam.fx = cam.fy = 0.866f * static_cast<float>(res);
    cam.cx = cam.cy = static_cast<float>(res) / 2.f;
    cam.cam_to_world.setIdentity();
    cam.cam_to_world.block<3, 1>(0, 0) = x_axis;
    cam.cam_to_world.block<3, 1>(0, 1) = y_axis;
    cam.cam_to_world.block<3, 1>(0, 2) = z_axis;
    cam.cam_to_world.block<3, 1>(0, 3) = pos;
    cam.near = 0.5f;
    cam.far = 6.0f;
    return cam;
}

float quantize(float v, float levels) {
    return std::round(std::min(1.f, std::max(0.f, v)) * levels) / levels;
}

}  // namespace

Scene make_synthetic_scene(const SyntheticConfig& cfg) {
    if (cfg.n_views < 3) throw ValidationError("make_synthetic_scene: need at least 3 views");
    Hit (*trace)(const Eigen::Vector3f&, const Eigen::Vector3f&);
    if (cfg.preset == "two-planes")
        trace = trace_two_planes;
    else if (cfg.preset == "sphere-on-plane")
        trace = trace_sphere_on_plane;
    else
        throw ValidationError("make_synthetic_scene: unknown preset '" + cfg.preset + "'");

    const Eigen::Vector3f light = Eigen::Vector3f(0.3f, 0.5f, 0.8f).normalized();
    Scene scene;
    for (int v = 0; v < cfg.n_views; ++v) {
        Camera cam = arc_camera(v, cfg.n_views, cfg.resolution);
        cam.validate();
        ImageRGB img(cfg.resolution, cfg.resolution);
        ImageGray depth(cfg.resolution, cfg.resolution);
        for (int y = 0; y < cfg.resolution; ++y)
            for (int x = 0; x < cfg.resolution; ++x) {
                Ray ray = generate_ray(cam, x, y);
                Hit hit = trace(ray.origin, ray.dir);
                Eigen::Vector3f color = Eigen::Vector3f::Zero();
                float t = cam.far;
                if (hit.valid()) {
                    float lambert = 0.3f + 0.7f * std::max(0.f, hit.normal.dot(light));
                    color = hit.albedo * lambert;
                    t = hit.t;
                }
                // generate already 8-bit quantized so the on-disk round trip is exact
                float* px = img.px(x, y);
                for (int c = 0; c < 3; ++c) px[c] = quantize(color[c], 255.f);
                depth.at(x, y) = t;
            }

        // prior: per-view min-max canonicalized gt depth, monotone warp + noise
        float lo = depth.data[0], hi = depth.data[0];
        for (float t : depth.data) {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        DepthPrior prior;
        prior.source = DepthSource::analytic;
        prior.values = ImageGray(cfg.resolution, cfg.resolution);
        prior.mask = MaskImage(cfg.resolution, cfg.resolution, 1);
        Rng rng = make_rng(derive_seed(cfg.seed, 0xdf, static_cast<uint64_t>(v)));
        std::uniform_real_distribution<float> noise(-cfg.noise, cfg.noise);
        for (size_t i = 0; i < depth.data.size(); ++i) {
            float canon = hi > lo ? (depth.data[i] - lo) / (hi - lo) : 0.5f;
            float warped = std::pow(canon, cfg.warp_exponent);
            if (cfg.noise > 0.f) warped += noise(rng);
            prior.values.data[i] = quantize(warped, 65535.f);
        }

        scene.cameras.push_back(cam);
        scene.images.push_back(std::move(img));
        scene.priors.emplace_back(std::move(prior));
        scene.gt_depth.emplace_back(std::move(depth));
    }
    return scene;
}

}  // namespace spnf
