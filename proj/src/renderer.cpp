#include "spnf/renderer.hpp"

namespace spnf {

Ray generate_ray(const Camera& cam, int px, int py, float jx, float jy) {
    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
        throw ValidationError("generate_ray: pixel outside image");
    Eigen::Vector3f d_cam((static_cast<float>(px) + jx - cam.cx) / cam.fx,
                          -((static_cast<float>(py) + jy - cam.cy) / cam.fy), -1.f);
    Ray ray;
    ray.dir = (cam.rotation() * d_cam).normalized();
    ray.origin = cam.position();
    ray.t_near = cam.near;
    ray.t_far = cam.far;
    return ray;
}

RaySamples stratified_sample(const Ray& ray, int n, Rng* rng) {
    RaySamples s;
    s.t.resize(n);
    s.delta.resize(n);
    const float span = (ray.t_far - ray.t_near) / static_cast<float>(n);
    std::uniform_real_distribution<float> uni(0.f, 1.f);
    float prev = ray.t_near;
    for (int i = 0; i < n; ++i) {
        float u = rng ? uni(*rng) : 0.5f;
        s.t[i] = ray.t_near + (static_cast<float>(i) + u) * span;
        s.delta[i] = s.t[i] - prev;
        prev = s.t[i];
    }
    return s;
}

RenderedPixel render_pixel(const FieldParams& params, const Ray& ray, int n, Rng* rng) {
    RaySamples samples = stratified_sample(ray, n, rng);
    Eigen::MatrixXf pos(3, n), dir(3, n);
    for (int i = 0; i < n; ++i) {
        pos.col(i) = ray.origin + samples.t[i] * ray.dir;
        dir.col(i) = ray.dir;
    }
    FieldTape<float> tape;
    Eigen::VectorXf sigma;
    field_forward_batch(params, pos, dir, tape, sigma);
    std::vector<float> sigmas(sigma.data(), sigma.data() + n);
    return composite<float>(samples, sigmas, tape.rgb);
}

long long constraint_budget(long long h, long long w, long long k) {
    long long total = h * w * k;
    long long n = static_cast<long long>(std::cbrt(static_cast<double>(total)));
    while ((n + 1) * (n + 1) * (n + 1) <= total) ++n;
    while (n > 1 && n * n * n > total) --n;
    return n;
}

}  // namespace spnf
