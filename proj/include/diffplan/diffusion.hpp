#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diffplan/denoiser.hpp"
#include "diffplan/objective.hpp"

namespace diffplan {

/// Forward-process schedule. betas are strictly increasing in (0, 1); the
/// cumulative products alpha_bar decrease strictly with alpha_bar(0) == 1.
/// posterior_vars[0] (the t = 1 variance) is clamped to posterior_vars[1]
/// because the textbook formula degenerates to zero there, which would erase
/// the guidance shift in the final refinement steps.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;           // beta_1 .. beta_T
    std::vector<double> alphas;          // 1 - beta_t
    std::vector<double> alpha_bars;      // prod_{s<=t} alpha_s
    std::vector<double> posterior_vars;  // ((1 - abar_{t-1}) / (1 - abar_t)) * beta_t

    /// Canonical 1000-step linear endpoints (1e-4, 2e-2) rescaled by 1000/T.
    static NoiseSchedule linear(int T);

    double beta(int t) const { return betas[check_range(t)]; }
    double alpha(int t) const { return alphas[t - 1]; }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars[t - 1]; }
    double posterior_var(int t) const { return posterior_vars[check_range(t)]; }
    void validate() const;

private:
    int check_range(int t) const {
        if (t < 1 || t > T) throw dimension_error("diffusion step out of range");
        return t - 1;
    }
};

/// Per-dimension affine map between data space and [-1, 1], fitted to the
/// training set. Purely affine (no clamping) so round trips are exact.
struct Normalizer {
    Vec minimum, maximum;

    static Normalizer fit(const std::vector<Trajectory>& data);

    int dims() const { return static_cast<int>(minimum.size()); }
    Vec center() const { return 0.5 * (minimum + maximum); }
    Vec halfspan() const { return 0.5 * (maximum - minimum); }

    Mat normalize(const Mat& rows) const;
    Mat denormalize(const Mat& rows) const;
    Vec normalize_config(const Vec& q) const;
    Vec denormalize_config(const Vec& q) const;
    /// Chain rule for gradients of a data-space function w.r.t. normalized
    /// coordinates: multiply per-dimension by the half span.
    Mat gradient_to_normalized(const Mat& grad) const;
    void validate() const;
};

Mat forward_noise(const NoiseSchedule& schedule, const Mat& tau0_normalized, int t, const Mat& eps);

Mat posterior_mean(const NoiseSchedule& schedule, const Mat& tau_t, int t, const Mat& eps_hat);

/// One trajectory record of the JSONL dataset (world frame).
struct DatasetRecord {
    std::string scene_file;
    TaskType task_type = TaskType::goal_reach;
    Config q0;
    Trajectory trajectory;
    TaskSpec task;  // goal payload, start == q0
};

std::vector<DatasetRecord> read_dataset_jsonl(const std::string& path);
void write_dataset_jsonl(const std::string& path, const std::vector<DatasetRecord>& records);
std::string dataset_record_to_json(const DatasetRecord& rec);
DatasetRecord dataset_record_from_json(const std::string& line);

/// Preprocessed training sample: trajectory in the initial base frame plus the
/// encoded conditioning features.
struct TrainSample {
    Trajectory traj_base;  // H x d, base frame of row 0
    Eigen::MatrixXf features;  // kSceneFeatureDim x M
};

/// Rigid transforms between world trajectories and the initial-base-frame
/// chart the model is trained in.
Trajectory world_to_base_frame(const Trajectory& traj, const Config& q0);
Trajectory base_frame_to_world(const Trajectory& traj, const Config& q0);
Mat world_gradient_to_base_frame(const Mat& grad, const Config& q0);

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 64;
    int epochs = 200;
    std::uint64_t seed = 0;
    int T = 50;
    int threads = 1;
    std::string loss_curve_path;  // optional CSV output (epoch, train, holdout)

    void validate() const;
};

struct LossCurvePoint {
    int epoch;
    double train_loss;
    double holdout_loss;
};

struct TrainResult {
    DenoiserParams params;
    Normalizer normalizer;
    NoiseSchedule schedule;
    std::vector<LossCurvePoint> curve;
};

/// Per-sample corruption draws: step index and unit noise.
struct NoiseDraws {
    std::vector<int> ts;
    std::vector<Eigen::MatrixXf> eps;
};
NoiseDraws draw_training_noise(const NoiseSchedule& schedule, int batch, int horizon, int dof,
                               Rng& rng);

/// Loss reduction with an injectable predictor, shared with the tests (e.g. a
/// stub that returns the drawn noise must give exactly zero loss).
using PredictStub = std::function<Eigen::MatrixXf(const Eigen::MatrixXf& tau_t, int t, int index)>;
double training_loss_core(const std::vector<const TrainSample*>& batch, const Normalizer& normalizer,
                          const NoiseSchedule& schedule, const NoiseDraws& draws,
                          const PredictStub& predict);

/// Mean squared noise-prediction error over a batch, with exact reverse-mode
/// parameter gradients. Draws (t, eps) per sample from `rng` up front, then
/// evaluates samples in index-ordered groups so any thread count produces
/// bit-identical results.
double training_loss(const DenoiserParams& params, const NoiseSchedule& schedule,
                     const std::vector<const TrainSample*>& batch, const Normalizer& normalizer,
                     Rng& rng, DenoiserParams* grads, int threads = 1);

TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& holdout_set, const TrainConfig& config);

struct Checkpoint {
    DenoiserParams params;
    Normalizer normalizer;
    NoiseSchedule schedule;
    int horizon = 0;
    int dof = 0;
};

/// Single-line JSON header (schema, dims, arch, normalizer, schedule, tensor
/// manifest with byte offsets) terminated by a newline, then the raw
/// little-endian float32 blob in manifest order (row-major per tensor).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace diffplan
