#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spnf/distill.hpp"
#include "spnf/field.hpp"
#include "spnf/scene.hpp"

namespace spnf {

struct LossWeights {
    float lambda_rank = 0.2f;  // lambda
    float gamma_conti = 0.02f; // gamma
};

enum class DepthLossMode { ranking, scaling, none };

struct TrainConfig {
    int iterations = 3000;
    int batch_rays = 1024;
    int n_samples = 64;      // stratified samples per ray
    float lr_start = 2e-3f;
    float lr_end = 2e-5f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float adam_eps = 1e-8f;
    LossWeights weights;
    DistillConfig distill;
    DepthLossMode depth_mode = DepthLossMode::ranking;
    uint64_t seed = 0;
    int k_train = 3;
    int threads = 1;
    bool deterministic = false;
    int log_every = 100;
    int checkpoint_every = 0;  // 0 = final checkpoint only
    std::string log_path;      // JSON-lines, empty = no file
    std::string ckpt_path;     // empty = no checkpoint files

    void validate() const {
        if (iterations < 1) throw ValidationError("train: iterations must be >= 1");
        if (batch_rays < 1) throw ValidationError("train: batch_rays must be >= 1");
        if (!(lr_end > 0.f) || lr_start < lr_end)
            throw ValidationError("train: need lr_start >= lr_end > 0");
        if (k_train < 1) throw ValidationError("train: k_train must be >= 1");
    }
};

struct AdamState {
    long step = 0;
    std::vector<float> m, v;

    explicit AdamState(size_t n = 0) : m(n, 0.f), v(n, 0.f) {}
};

// Mean over rays of the squared color error over 3 channels.
template <typename S>
double reconstruction_loss(const std::vector<Eigen::Matrix<S, 3, 1>>& rendered,
                           const std::vector<Eigen::Matrix<S, 3, 1>>& gt) {
    if (rendered.size() != gt.size())
        throw ValidationError("reconstruction_loss: batch length mismatch");
    if (rendered.empty()) throw ValidationError("reconstruction_loss: empty batch");
    double sum = 0.0;
    for (size_t i = 0; i < rendered.size(); ++i)
        sum += (rendered[i] - gt[i]).template cast<double>().squaredNorm();
    return sum / static_cast<double>(rendered.size());
}

// L = l_nerf + lambda * r_rank + gamma * r_conti.
double total_loss(double l_nerf, double r_rank, double r_conti, const LossWeights& w);

// lr_start * (lr_end / lr_start)^(step / iterations): log-linear decay.
double lr_at(long step, const TrainConfig& cfg);

// Bias-corrected Adam update. The caller advances state.step before calling.
void adam_step(std::vector<float>& params, const std::vector<float>& grads, AdamState& state,
               double lr, float beta1, float beta2, float eps);

struct LogRecord {
    long iter = 0;
    double l_nerf = 0.0;
    double r_rank = 0.0;  // holds the scaling loss in scaling mode
    double r_conti = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    FieldParams params;
    std::vector<LogRecord> log;
    std::vector<int> train_ids;
    std::vector<int> test_ids;
};

TrainResult train(const Scene& scene, const TrainConfig& cfg, const FieldArch& arch);

}  // namespace spnf
