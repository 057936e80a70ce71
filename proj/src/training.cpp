#include "spnf/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "spnf/checkpoint.hpp"
#include "spnf/renderer.hpp"
#include "spnf/scene_io.hpp"

namespace spnf {

double total_loss(double l_nerf, double r_rank, double r_conti, const LossWeights& w) {
    return l_nerf + static_cast<double>(w.lambda_rank) * r_rank +
           static_cast<double>(w.gamma_conti) * r_conti;
}

double lr_at(long step, const TrainConfig& cfg) {
    double frac = static_cast<double>(step) / static_cast<double>(cfg.iterations);
    return static_cast<double>(cfg.lr_start) *
           std::pow(static_cast<double>(cfg.lr_end) / static_cast<double>(cfg.lr_start), frac);
}

void adam_step(std::vector<float>& params, const std::vector<float>& grads, AdamState& state,
               double lr, float beta1, float beta2, float eps) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ValidationError("adam_step: shape mismatch");
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(static_cast<double>(beta1), t);
    const double c2 = 1.0 - std::pow(static_cast<double>(beta2), t);
    for (size_t i = 0; i < params.size(); ++i) {
        float g = grads[i];
        if (!std::isfinite(g)) throw TrainingError("adam_step: non-finite gradient");
        state.m[i] = beta1 * state.m[i] + (1.f - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.f - beta2) * g * g;
        double mhat = state.m[i] / c1;
        double vhat = state.v[i] / c2;
        params[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
    }
}

namespace {

constexpr int kBlockRays = 64;

struct RaySpec {
    int view = 0;
    int px = 0, py = 0;
    float jx = 0.5f, jy = 0.5f;
    uint64_t sample_seed = 0;
};

struct RayOutput {
    Eigen::Vector3f color = Eigen::Vector3f::Zero();
    float depth = 0.f;
    float opacity = 0.f;
};

// Renders ray blocks in parallel; when cotangents are given, also recomputes
// the forward pass per block and accumulates parameter gradients per block.
// Block results are independent of the thread count; callers reduce the block
// gradients in fixed order.
void run_blocks(const FieldParams& params, const Scene& scene, const std::vector<RaySpec>& specs,
                int n_samples, int threads, std::vector<RayOutput>& outputs,
                const std::vector<Eigen::Vector3f>* cot_color, const std::vector<float>* cot_depth,
                std::vector<FieldParams>* block_grads) {
    const int n_rays = static_cast<int>(specs.size());
    const int n_blocks = (n_rays + kBlockRays - 1) / kBlockRays;
    outputs.resize(n_rays);
    if (block_grads) block_grads->assign(n_blocks, FieldParams(params.arch()));

    auto process_block = [&](int b) {
        const int begin = b * kBlockRays;
        const int count = std::min(kBlockRays, n_rays - begin);
        const int m = count * n_samples;
        Eigen::MatrixXf pos(3, m), dir(3, m);
        std::vector<RaySamples> samples(count);
        for (int r = 0; r < count; ++r) {
            const RaySpec& sp = specs[begin + r];
            Ray ray = generate_ray(scene.cameras[sp.view], sp.px, sp.py, sp.jx, sp.jy);
            Rng rng = make_rng(sp.sample_seed);
            samples[r] = stratified_sample(ray, n_samples, &rng);
            for (int i = 0; i < n_samples; ++i) {
                pos.col(r * n_samples + i) = ray.origin + samples[r].t[i] * ray.dir;
                dir.col(r * n_samples + i) = ray.dir;
            }
        }
        FieldTape<float> tape;
        Eigen::VectorXf sigma;
        field_forward_batch(params, pos, dir, tape, sigma);

        Eigen::VectorXf cot_sigma;
        Eigen::MatrixXf cot_rgb;
        if (block_grads) {
            cot_sigma = Eigen::VectorXf::Zero(m);
            cot_rgb = Eigen::MatrixXf::Zero(3, m);
        }
        for (int r = 0; r < count; ++r) {
            std::vector<float> sigmas(n_samples);
            for (int i = 0; i < n_samples; ++i) sigmas[i] = sigma[r * n_samples + i];
            Eigen::MatrixXf colors = tape.rgb.middleCols(r * n_samples, n_samples);
            RenderedPixel out = composite<float>(samples[r], sigmas, colors);
            outputs[begin + r] = {out.color, out.depth, out.opacity};
            if (block_grads) {
                std::vector<float> d_sig(n_samples, 0.f);
                Eigen::MatrixXf d_col = Eigen::MatrixXf::Zero(3, n_samples);
                composite_backward<float>(samples[r], sigmas, colors, out,
                                          (*cot_color)[begin + r], (*cot_depth)[begin + r], 0.f,
                                          d_sig, d_col);
                for (int i = 0; i < n_samples; ++i) cot_sigma[r * n_samples + i] = d_sig[i];
                cot_rgb.middleCols(r * n_samples, n_samples) = d_col;
            }
        }
        if (block_grads)
            field_backward_batch(params, tape, cot_sigma, cot_rgb, (*block_grads)[b]);
    };

    const int n_workers = std::max(1, std::min(threads, n_blocks));
    if (n_workers == 1) {
        for (int b = 0; b < n_blocks; ++b) process_block(b);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> workers;
        for (int w = 0; w < n_workers; ++w)
            workers.emplace_back([&] {
                for (int b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1))
                    process_block(b);
            });
        for (auto& t : workers) t.join();
    }
}

// Least-squares scale-invariant depth regression over one patch pixel group
// (the depth-scaling comparison baseline). Returns the summed squared
// residual; grad accumulates with the fitted (w, b) treated as constants.
double scaling_patch_loss(const std::vector<float>& d_r, const std::vector<float>& prior,
                          std::vector<float>& grad, double inv_total) {
    const size_t n = d_r.size();
    double sxx = 0, sx = 0, sxy = 0, sy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += static_cast<double>(d_r[i]) * d_r[i];
        sx += d_r[i];
        sxy += static_cast<double>(d_r[i]) * prior[i];
        sy += prior[i];
    }
    double det = sxx * static_cast<double>(n) - sx * sx;
    if (std::abs(det) <= 1e-12 * std::max(sxx, 1.0) * static_cast<double>(n)) return 0.0;
    double w = (sxy * n - sx * sy) / det;
    double b = (sy - w * sx) / static_cast<double>(n);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double r = w * d_r[i] + b - prior[i];
        sum += r * r;
        grad[i] += static_cast<float>(2.0 * w * r * inv_total);
    }
    return sum;
}

void append_log(const std::string& path, const LogRecord& rec) {
    if (path.empty()) return;
    std::ofstream f(path, std::ios::app);
    if (!f) throw IoError("cannot open log " + path);
    f << "{\"iter\":" << rec.iter << ",\"l_nerf\":" << rec.l_nerf << ",\"r_rank\":" << rec.r_rank
      << ",\"r_conti\":" << rec.r_conti << ",\"lr\":" << rec.lr << "}\n";
}

}  // namespace

TrainResult train(const Scene& scene, const TrainConfig& cfg, const FieldArch& arch) {
    cfg.validate();
    cfg.distill.validate();
    auto [train_ids, test_ids] = select_views(static_cast<int>(scene.view_count()), cfg.k_train);

    const bool distill_on =
        cfg.depth_mode != DepthLossMode::none &&
        (cfg.depth_mode == DepthLossMode::scaling ? cfg.weights.lambda_rank > 0.f
                                                  : (cfg.weights.lambda_rank > 0.f ||
                                                     cfg.weights.gamma_conti > 0.f));
    if (distill_on)
        for (int v : train_ids)
            if (!scene.priors[v])
                throw ValidationError("train: view " + std::to_string(v) +
                                      " has no depth prior but distillation is enabled");

    const int w = scene.width(), h = scene.height();
    FieldParams params = FieldParams::init(arch, cfg.seed);
    AdamState adam(params.size());
    std::vector<float> grad_flat(params.size());
    if (!cfg.log_path.empty()) std::ofstream(cfg.log_path, std::ios::trunc);

    TrainResult result;
    result.train_ids = train_ids;
    result.test_ids = test_ids;

    for (long iter = 1; iter <= cfg.iterations; ++iter) {
        // (a) reconstruction batch: random jittered rays over the training views
        Rng rng_rays = make_rng(derive_seed(cfg.seed, 0xA11, static_cast<uint64_t>(iter)));
        std::uniform_int_distribution<int> pick_view(0, static_cast<int>(train_ids.size()) - 1);
        std::uniform_int_distribution<int> pick_x(0, w - 1), pick_y(0, h - 1);
        std::uniform_real_distribution<float> uni(0.f, 1.f);

        std::vector<RaySpec> specs;
        specs.reserve(cfg.batch_rays);
        std::vector<Eigen::Vector3f> gt_colors(cfg.batch_rays);
        for (int r = 0; r < cfg.batch_rays; ++r) {
            RaySpec sp;
            sp.view = train_ids[pick_view(rng_rays)];
            sp.px = pick_x(rng_rays);
            sp.py = pick_y(rng_rays);
            sp.jx = uni(rng_rays);
            sp.jy = uni(rng_rays);
            sp.sample_seed = derive_seed(cfg.seed, 0x5A4, iter * 0x100000ull + r);
            gt_colors[r] = Eigen::Map<const Eigen::Vector3f>(scene.images[sp.view].px(sp.px, sp.py));
            specs.push_back(sp);
        }

        // (b) distillation pixels on one random training view
        int distill_view = -1;
        PairBatch pairs;
        NeighborBatch nb;
        std::vector<int> pixels;                    // sorted unique distill pixels
        std::vector<std::vector<int>> patch_groups;  // pixel slots per patch (scaling mode)
        if (distill_on) {
            Rng rng_distill = make_rng(derive_seed(cfg.seed, 0xD15, static_cast<uint64_t>(iter)));
            distill_view = train_ids[pick_view(rng_distill)];
            const DepthPrior& prior = *scene.priors[distill_view];
            if (cfg.depth_mode == DepthLossMode::ranking) {
                pairs = sample_pairs(prior, cfg.distill, rng_distill);
                pairs.view = distill_view;
                pixels = pairs.k1;
                pixels.insert(pixels.end(), pairs.k2.begin(), pairs.k2.end());
                std::sort(pixels.begin(), pixels.end());
                pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
                // continuity anchors drawn from the pair pixels
                std::vector<int> anchors = pixels;
                std::shuffle(anchors.begin(), anchors.end(), rng_distill);
                size_t n_anchor = std::min(anchors.size(),
                                           static_cast<size_t>(cfg.distill.anchors_per_patch) *
                                               cfg.distill.patches_per_iter);
                anchors.resize(n_anchor);
                std::sort(anchors.begin(), anchors.end());
                nb = knn_neighbors(prior, anchors, cfg.distill);
                nb.view = distill_view;
                for (const auto& lst : nb.neighbors)
                    pixels.insert(pixels.end(), lst.begin(), lst.end());
                std::sort(pixels.begin(), pixels.end());
                pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
            } else {  // scaling baseline
                const int edge = std::min({cfg.distill.patch_size, w, h});
                std::uniform_int_distribution<int> dx(0, w - edge), dy(0, h - edge);
                for (int p = 0; p < cfg.distill.patches_per_iter; ++p) {
                    int ox = dx(rng_distill), oy = dy(rng_distill);
                    std::vector<int> valid;
                    for (int y = oy; y < oy + edge; ++y)
                        for (int x = ox; x < ox + edge; ++x)
                            if (prior.mask.at(x, y)) valid.push_back(y * w + x);
                    if (valid.size() < 2) continue;
                    std::shuffle(valid.begin(), valid.end(), rng_distill);
                    valid.resize(std::min(valid.size(),
                                          static_cast<size_t>(2 * cfg.distill.pairs_per_patch)));
                    std::sort(valid.begin(), valid.end());
                    patch_groups.push_back(valid);
                    pixels.insert(pixels.end(), valid.begin(), valid.end());
                }
                std::sort(pixels.begin(), pixels.end());
                pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
            }
            for (size_t i = 0; i < pixels.size(); ++i) {
                RaySpec sp;
                sp.view = distill_view;
                sp.px = pixels[i] % w;
                sp.py = pixels[i] / w;
                sp.sample_seed = derive_seed(cfg.seed, 0xD54, iter * 0x100000ull + i);
                specs.push_back(sp);
            }
        }

        // forward
        std::vector<RayOutput> outputs;
        run_blocks(params, scene, specs, cfg.n_samples, cfg.threads, outputs, nullptr, nullptr,
                   nullptr);

        // losses and cotangents
        std::vector<Eigen::Vector3f> rendered(cfg.batch_rays);
        for (int r = 0; r < cfg.batch_rays; ++r) rendered[r] = outputs[r].color;
        const double l_nerf = reconstruction_loss(rendered, gt_colors);

        std::vector<Eigen::Vector3f> cot_color(specs.size(), Eigen::Vector3f::Zero());
        std::vector<float> cot_depth(specs.size(), 0.f);
        const float inv_b = 1.f / static_cast<float>(cfg.batch_rays);
        for (int r = 0; r < cfg.batch_rays; ++r)
            cot_color[r] = 2.f * inv_b * (outputs[r].color - gt_colors[r]);

        double r_rank = 0.0, r_conti = 0.0;
        if (distill_on) {
            std::vector<float> d_r(pixels.size());
            for (size_t i = 0; i < pixels.size(); ++i)
                d_r[i] = outputs[cfg.batch_rays + i].depth;
            std::vector<float> d_grad(pixels.size(), 0.f);
            if (cfg.depth_mode == DepthLossMode::ranking) {
                std::vector<float> g_rank(pixels.size(), 0.f), g_conti(pixels.size(), 0.f);
                r_rank = ranking_loss(pairs, pixels, d_r, cfg.distill.margin_rank, &g_rank);
                r_conti = continuity_loss(nb, pixels, d_r, cfg.distill.margin_conti, &g_conti);
                for (size_t i = 0; i < pixels.size(); ++i)
                    d_grad[i] = cfg.weights.lambda_rank * g_rank[i] +
                                cfg.weights.gamma_conti * g_conti[i];
            } else {
                const DepthPrior& prior = *scene.priors[distill_view];
                size_t n_total = 0;
                for (const auto& g : patch_groups) n_total += g.size();
                if (n_total > 0) {
                    double sum = 0.0;
                    const double inv_total = 1.0 / static_cast<double>(n_total);
                    std::vector<float> g_scaled(pixels.size(), 0.f);
                    for (const auto& group : patch_groups) {
                        std::vector<float> gd(group.size()), gp(group.size());
                        std::vector<int> slots(group.size());
                        for (size_t i = 0; i < group.size(); ++i) {
                            slots[i] = pixel_slot(pixels, group[i]);
                            gd[i] = d_r[slots[i]];
                            gp[i] = prior.values.data[group[i]];
                        }
                        std::vector<float> gg(group.size(), 0.f);
                        sum += scaling_patch_loss(gd, gp, gg, inv_total);
                        for (size_t i = 0; i < group.size(); ++i) g_scaled[slots[i]] += gg[i];
                    }
                    r_rank = sum * inv_total;  // logged in the r_rank slot
                    for (size_t i = 0; i < pixels.size(); ++i)
                        d_grad[i] = cfg.weights.lambda_rank * g_scaled[i];
                }
            }
            for (size_t i = 0; i < pixels.size(); ++i) cot_depth[cfg.batch_rays + i] = d_grad[i];
        }

        const double total = total_loss(l_nerf, r_rank, r_conti, cfg.weights);
        if (!std::isfinite(total))
            throw TrainingError("train: non-finite loss at iteration " + std::to_string(iter));

        // (c) backward + Adam
        std::vector<FieldParams> block_grads;
        run_blocks(params, scene, specs, cfg.n_samples, cfg.threads, outputs, &cot_color,
                   &cot_depth, &block_grads);
        std::fill(grad_flat.begin(), grad_flat.end(), 0.f);
        for (const FieldParams& g : block_grads)
            for (size_t i = 0; i < grad_flat.size(); ++i) grad_flat[i] += g.data()[i];

        adam.step = iter;
        adam_step(params.raw(), grad_flat, adam, lr_at(iter - 1, cfg), cfg.beta1, cfg.beta2,
                  cfg.adam_eps);

        if (iter == 1 || iter % cfg.log_every == 0 || iter == cfg.iterations) {
            LogRecord rec{iter, l_nerf, r_rank, r_conti, lr_at(iter - 1, cfg)};
            result.log.push_back(rec);
            append_log(cfg.log_path, rec);
        }
        if (!cfg.ckpt_path.empty() && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0)
            save_checkpoint(cfg.ckpt_path, params, iter);
    }

    if (!cfg.ckpt_path.empty()) save_checkpoint(cfg.ckpt_path, params, cfg.iterations);
    result.params = std::move(params);
    return result;
}

}  // namespace spnf
