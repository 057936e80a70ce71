#include "spnf/eval.hpp"

#include <atomic>
#include <thread>

#include "spnf/renderer.hpp"

namespace spnf {

ViewRender render_view(const FieldParams& params, const Camera& cam, int n_samples, int threads) {
    ViewRender out;
    out.color = ImageRGB(cam.width, cam.height);
    out.depth = ImageGray(cam.width, cam.height);
    out.norm_depth = ImageGray(cam.width, cam.height);
    out.opacity = ImageGray(cam.width, cam.height);

    auto render_row = [&](int y) {
        const int w = cam.width, n = n_samples;
        Eigen::MatrixXf pos(3, w * n), dir(3, w * n);
        std::vector<RaySamples> samples(w);
        for (int x = 0; x < w; ++x) {
            Ray ray = generate_ray(cam, x, y);
            samples[x] = stratified_sample(ray, n, nullptr);  // pixel centers, bin midpoints
            for (int i = 0; i < n; ++i) {
                pos.col(x * n + i) = ray.origin + samples[x].t[i] * ray.dir;
                dir.col(x * n + i) = ray.dir;
            }
        }
        FieldTape<float> tape;
        Eigen::VectorXf sigma;
        field_forward_batch(params, pos, dir, tape, sigma);
        for (int x = 0; x < w; ++x) {
            std::vector<float> sigmas(n);
            for (int i = 0; i < n; ++i) sigmas[i] = sigma[x * n + i];
            Eigen::MatrixXf colors = tape.rgb.middleCols(x * n, n);
            RenderedPixel px = composite<float>(samples[x], sigmas, colors);
            float* c = out.color.px(x, y);
            for (int k = 0; k < 3; ++k) c[k] = px.color[k];
            out.depth.at(x, y) = px.depth;
            out.opacity.at(x, y) = px.opacity;
            out.norm_depth.at(x, y) = px.opacity > 1e-6f ? px.depth / px.opacity : 0.f;
        }
    };

    const int n_workers = std::max(1, std::min(threads, cam.height));
    if (n_workers == 1) {
        for (int y = 0; y < cam.height; ++y) render_row(y);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> workers;
        for (int t = 0; t < n_workers; ++t)
            workers.emplace_back([&] {
                for (int y = next.fetch_add(1); y < cam.height; y = next.fetch_add(1))
                    render_row(y);
            });
        for (auto& t : workers) t.join();
    }
    return out;
}

std::vector<ViewMetrics> evaluate_views(const FieldParams& params, const Scene& scene,
                                        const std::vector<int>& view_ids, int n_samples,
                                        int threads) {
    std::vector<ViewMetrics> out;
    for (int v : view_ids) {
        ViewRender render = render_view(params, scene.cameras[v], n_samples, threads);
        ViewMetrics m;
        m.view = v;
        m.psnr = psnr(render.color, scene.images[v]);
        m.ssim = ssim(render.color, scene.images[v]);
        if (scene.gt_depth[v]) {
            MaskImage mask(render.opacity.width, render.opacity.height, 0);
            for (size_t i = 0; i < mask.data.size(); ++i)
                mask.data[i] = render.opacity.data[i] > 0.5f ? 1 : 0;
            try {
                DepthErrorReport rep =
                    scale_invariant_depth_error(render.norm_depth, *scene.gt_depth[v], mask);
                m.depth_error = rep.error;
                m.n_valid = rep.n_valid;
                m.has_depth = true;
            } catch (const ValidationError&) {
                m.has_depth = false;  // too few confident pixels or degenerate fit
            }
        }
        out.push_back(m);
    }
    return out;
}

}  // namespace spnf
