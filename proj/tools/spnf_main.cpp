#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "spnf/checkpoint.hpp"
#include "spnf/eval.hpp"
#include "spnf/png_io.hpp"
#include "spnf/scene_io.hpp"
#include "spnf/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spnf;

namespace {

int log_level() {  // 0 error, 1 info, 2 debug
    const char* env = std::getenv("SPNF_LOG");
    if (!env) return 1;
    std::string v(env);
    if (v == "error") return 0;
    if (v == "debug") return 2;
    return 1;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "spnf: " << msg << "\n";
}

void atomic_write_text(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + tmp);
        f << text;
    }
    fs::rename(tmp, path);
}

Camera camera_from_json(const json& j) {
    Camera cam;
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.fx = j.at("fx").get<float>();
    cam.fy = j.at("fy").get<float>();
    cam.cx = j.at("cx").get<float>();
    cam.cy = j.at("cy").get<float>();
    cam.near = j.at("near").get<float>();
    cam.far = j.at("far").get<float>();
    auto t = j.at("transform").get<std::vector<float>>();
    if (t.size() != 16) throw ValidationError("camera transform must have 16 entries");
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) cam.cam_to_world(r, c) = t[r * 4 + c];
    cam.validate();
    return cam;
}

struct TrainFlags {
    std::string scene_dir;
    std::string out_ckpt;
    std::string log_path;
    TrainConfig cfg;
    FieldArch arch;
};

struct RenderFlags {
    std::string ckpt, scene_dir, camera_json, out_prefix;
    int view = -1;
    int n_samples = 64;
    int threads = 1;
};

struct EvalFlags {
    std::string ckpt, scene_dir, out_report;
    int k_train = 3;
    int n_samples = 64;
    int threads = 1;
    bool all_views = false;
};

int cmd_synth(const SyntheticConfig& sc, const std::string& out) {
    Scene scene = make_synthetic_scene(sc);
    write_scene(out, scene, DepthSource::analytic);
    info("wrote " + std::to_string(scene.view_count()) + " views to " + out);
    return 0;
}

int cmd_train(TrainFlags& f) {
    Scene scene = load_scene(f.scene_dir);
    f.cfg.ckpt_path = f.out_ckpt;
    f.cfg.log_path = f.log_path.empty() ? f.out_ckpt + ".log.jsonl" : f.log_path;
    TrainResult result = train(scene, f.cfg, f.arch);
    const LogRecord& last = result.log.back();
    info("done: iter " + std::to_string(last.iter) + " l_nerf " + std::to_string(last.l_nerf) +
         " r_rank " + std::to_string(last.r_rank) + " r_conti " + std::to_string(last.r_conti));
    return 0;
}

int cmd_render(const RenderFlags& f) {
    Checkpoint ckpt = load_checkpoint(f.ckpt);
    Camera cam;
    if (!f.camera_json.empty()) {
        std::ifstream in(f.camera_json);
        if (!in) throw IoError("cannot read " + f.camera_json);
        json j;
        in >> j;
        cam = camera_from_json(j);
    } else {
        Scene scene = load_scene(f.scene_dir);
        if (f.view < 0 || f.view >= static_cast<int>(scene.view_count()))
            throw ValidationError("render: view index out of range");
        cam = scene.cameras[f.view];
    }
    ViewRender out = render_view(ckpt.params, cam, f.n_samples, f.threads);

    write_png_rgb8(f.out_prefix + "color.png", out.color);
    Gray16 depth;
    depth.width = cam.width;
    depth.height = cam.height;
    depth.data.resize(out.depth.data.size());
    for (size_t i = 0; i < depth.data.size(); ++i) {
        float norm = std::clamp(out.depth.data[i] / cam.far, 0.f, 1.f);
        depth.data[i] = static_cast<uint16_t>(std::lround(norm * 65535.f));
    }
    write_png_gray16(f.out_prefix + "depth.png", depth);
    info("wrote " + f.out_prefix + "color.png and " + f.out_prefix + "depth.png");
    return 0;
}

int cmd_eval(const EvalFlags& f) {
    Checkpoint ckpt = load_checkpoint(f.ckpt);
    Scene scene = load_scene(f.scene_dir);
    std::vector<int> ids;
    if (f.all_views) {
        for (size_t i = 0; i < scene.view_count(); ++i) ids.push_back(static_cast<int>(i));
    } else {
        auto [train_ids, test_ids] = select_views(static_cast<int>(scene.view_count()), f.k_train);
        ids = test_ids;
    }
    std::vector<ViewMetrics> metrics = evaluate_views(ckpt.params, scene, ids, f.n_samples,
                                                      f.threads);
    json report;
    double sum_psnr = 0, sum_ssim = 0, sum_depth = 0;
    int n_depth = 0;
    for (const ViewMetrics& m : metrics) {
        json entry = {{"psnr", m.psnr}, {"ssim", m.ssim}};
        if (m.has_depth) {
            entry["depth_error"] = m.depth_error;
            entry["n_valid"] = m.n_valid;
            sum_depth += m.depth_error;
            ++n_depth;
        }
        report["views"][std::to_string(m.view)] = entry;
        sum_psnr += m.psnr;
        sum_ssim += m.ssim;
    }
    const double n = static_cast<double>(metrics.size());
    report["mean_psnr"] = sum_psnr / n;
    report["mean_ssim"] = sum_ssim / n;
    if (n_depth > 0) report["mean_depth_error"] = sum_depth / n_depth;
    atomic_write_text(f.out_report, report.dump(2) + "\n");
    info("wrote " + f.out_report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spnf: sparse-view radiance field trainer with depth-prior distillation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML config file (flags take precedence)");

    // synth
    SyntheticConfig sc;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene directory");
    synth->add_option("--preset", sc.preset, "two-planes | sphere-on-plane");
    synth->add_option("--views", sc.n_views, "number of views [desk-scale: 6]");
    synth->add_option("--res", sc.resolution, "image resolution [desk-scale: 64]");
    synth->add_option("--seed", sc.seed, "rng seed");
    synth->add_option("--warp-exponent", sc.warp_exponent,
                      "prior distortion exponent [desk-scale: 1.5]");
    synth->add_option("--noise", sc.noise, "prior noise amplitude [desk-scale: 0.02]");
    synth->add_option("--out", synth_out, "output scene directory")->required();

    // train
    TrainFlags tf;
    std::string depth_loss = "ranking";
    auto* tr = app.add_subcommand("train", "train a radiance field on a scene");
    tr->add_option("--scene", tf.scene_dir, "scene directory")->required();
    tr->add_option("--out", tf.out_ckpt, "output checkpoint path")->required();
    tr->add_option("--log", tf.log_path, "JSON-lines training log (default <out>.log.jsonl)");
    tr->add_option("--views", tf.cfg.k_train, "training view count [desk-scale: 3]");
    tr->add_option("--iters", tf.cfg.iterations, "iterations [desk-scale: 3000; paper: 90000]");
    tr->add_option("--batch", tf.cfg.batch_rays, "rays per batch [desk-scale: 1024; paper: 4096]");
    tr->add_option("--samples", tf.cfg.n_samples, "stratified samples per ray [desk-scale: 64]");
    tr->add_option("--lambda", tf.cfg.weights.lambda_rank, "ranking loss weight [paper: 0.2]");
    tr->add_option("--gamma", tf.cfg.weights.gamma_conti, "continuity loss weight [paper: 0.02]");
    tr->add_option("--margin", tf.cfg.distill.margin_rank, "ranking margin m [paper: 1e-4]");
    tr->add_option("--margin-conti", tf.cfg.distill.margin_conti,
                   "continuity margin m' [paper: 1e-4]");
    tr->add_option("--lr-start", tf.cfg.lr_start, "initial learning rate [paper: 2e-3]");
    tr->add_option("--lr-end", tf.cfg.lr_end, "final learning rate [paper: 2e-5]");
    tr->add_option("--seed", tf.cfg.seed, "rng seed");
    tr->add_option("--depth-loss", depth_loss, "ranking | scaling | none [paper: ranking]")
        ->check(CLI::IsMember({"ranking", "scaling", "none"}));
    tr->add_option("--threads", tf.cfg.threads, "worker threads [desk-scale: 1]");
    tr->add_flag("--deterministic", tf.cfg.deterministic,
                 "bit-identical results across thread counts");
    tr->add_option("--checkpoint-every", tf.cfg.checkpoint_every,
                   "checkpoint interval (0 = final only)");
    tr->add_option("--log-every", tf.cfg.log_every, "log record interval [desk-scale: 100]");
    tr->add_option("--hidden", tf.arch.hidden, "mlp hidden width [desk-scale: 64]");
    tr->add_option("--color-hidden", tf.arch.color_hidden, "color branch width [desk-scale: 32]");
    tr->add_option("--levels-pos", tf.arch.enc.levels_pos,
                   "positional encoding levels [paper backbone: 10]");
    tr->add_option("--levels-dir", tf.arch.enc.levels_dir,
                   "direction encoding levels [paper backbone: 4]");
    tr->add_option("--patch-size", tf.cfg.distill.patch_size, "distill patch edge [desk-scale: 32]");
    tr->add_option("--pairs-per-patch", tf.cfg.distill.pairs_per_patch,
                   "ranked pairs per patch [desk-scale: 128]");
    tr->add_option("--patches-per-iter", tf.cfg.distill.patches_per_iter,
                   "patches per iteration [desk-scale: 4]");
    tr->add_option("--anchors-per-patch", tf.cfg.distill.anchors_per_patch,
                   "continuity anchors per patch [desk-scale: 32]");
    tr->add_option("--knn-k", tf.cfg.distill.knn_k, "continuity neighbors [desk-scale: 4]");
    tr->add_option("--knn-region", tf.cfg.distill.knn_region, "knn window edge [paper: 6]");

    // render
    RenderFlags rf;
    auto* rd = app.add_subcommand("render", "render a view from a checkpoint");
    rd->add_option("--ckpt", rf.ckpt, "checkpoint path")->required();
    rd->add_option("--scene", rf.scene_dir, "scene directory (for --view)");
    rd->add_option("--view", rf.view, "camera index within the scene");
    rd->add_option("--camera", rf.camera_json, "JSON file with an arbitrary camera");
    rd->add_option("--samples", rf.n_samples, "samples per ray [desk-scale: 64]");
    rd->add_option("--threads", rf.threads, "worker threads");
    rd->add_option("--out", rf.out_prefix, "output prefix for color.png / depth.png")->required();

    // eval
    EvalFlags ef;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on held-out views");
    ev->add_option("--ckpt", ef.ckpt, "checkpoint path")->required();
    ev->add_option("--scene", ef.scene_dir, "scene directory")->required();
    ev->add_option("--out", ef.out_report, "output JSON report")->required();
    ev->add_option("--views", ef.k_train, "training view count defining the held-out split");
    ev->add_flag("--all", ef.all_views, "evaluate every view instead of the held-out set");
    ev->add_option("--samples", ef.n_samples, "samples per ray [desk-scale: 64]");
    ev->add_option("--threads", ef.threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*synth) return cmd_synth(sc, synth_out);
        if (*tr) {
            tf.cfg.depth_mode = depth_loss == "ranking"   ? DepthLossMode::ranking
                                : depth_loss == "scaling" ? DepthLossMode::scaling
                                                          : DepthLossMode::none;
            return cmd_train(tf);
        }
        if (*rd) {
            if (rf.camera_json.empty() && rf.scene_dir.empty())
                throw ValidationError("render: need --camera or --scene with --view");
            return cmd_render(rf);
        }
        if (*ev) return cmd_eval(ef);
    } catch (const ValidationError& e) {
        std::cerr << "spnf: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "spnf: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
