#pragma once

#include <functional>

#include "diffplan/diffusion.hpp"

namespace diffplan {

/// Sampling-time clamp on the implied trajectory estimate, in normalized
/// units (the training data occupies [-1, 1]).
constexpr double kSampleBoxLimit = 1.5;

struct GuidanceConfig {
    CostWeights weights;
    TaskEnergy energy;
    int extra_steps = 10;  // refinement iterations after the main loop
    bool guidance_enabled = true;
    std::uint64_t seed = 0;
    double grad_clip = kDefaultGradClip;
    int threads = 1;
    bool record_trace = true;

    void validate() const;
};

struct LangevinConfig {
    int steps = 50;
    double alpha_start = 0.1;
    double alpha_end = 0.005;  // geometric decay from alpha_start
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<double> alpha_sequence() const;
};

struct StepTrace {
    int step;  // 0-based across the whole schedule including extra steps
    double phi, energy, c_collision, c_smoothness, c_limit;
};

struct PlanDiagnostics {
    std::vector<StepTrace> trace;
    double wall_time_s = 0.0;
};

struct PlanResult {
    Trajectory trajectory;  // world frame, row 0 == start configuration
    PlanDiagnostics diagnostics;
};

/// Shared state for one planning problem: scene, task, checkpoint, and the
/// cached conditioning cloud. Immutable during sampling.
struct PlanContext {
    const RobotModel* model = nullptr;
    const SceneSdf* sdf = nullptr;
    const Checkpoint* checkpoint = nullptr;
    TaskSpec task;
    TaskEnergy energy;
    CostWeights weights;
    double grad_clip = kDefaultGradClip;
    int threads = 1;
    Eigen::MatrixXf scene_features;  // conditioning cloud in the base frame
    Vec q0_normalized;               // normalized base-frame start row

    static PlanContext make(const RobotModel& model, const SceneSdf& sdf, const Checkpoint& ckpt,
                            const TaskSpec& task, const GuidanceConfig& cfg);
};

/// Guidance gradient in normalized coordinates, evaluated at a normalized
/// base-frame trajectory. Also returns the objective report for tracing.
Mat guidance_gradient(const PlanContext& ctx, const Mat& tau_normalized, ObjectiveReport* report);

/// Gradient used by one reverse step at variance sigma2: per element the
/// normalized gradient is clipped to +-min(grad_clip, 1 / sqrt(sigma2)) so the
/// guidance shift sigma2 * g never exceeds one noise standard deviation.
Mat step_guidance_gradient(const PlanContext& ctx, const Mat& tau_normalized, double sigma2,
                           ObjectiveReport* report);

/// One reverse step. Samples tau_{t-1} ~ N(mu_t + Sigma_t * g, Sigma_t * I)
/// (noise suppressed at t == 1, which produces tau_0), then clamps row 0 to
/// the start configuration.
Mat guided_step(const PlanContext& ctx, const Mat& tau_t, int t, bool guidance_enabled, Rng& rng,
                ObjectiveReport* report);

/// Full reverse process with extra refinement steps; returns the denormalized
/// world-frame trajectory with row 0 equal to the start configuration.
PlanResult plan(const RobotModel& model, const SceneSdf& sdf, const Checkpoint& ckpt,
                const TaskSpec& task, const GuidanceConfig& cfg);

/// Noise-initialized gradient ascent baseline (no learned prior):
///   tau <- tau + 0.5 * alpha_k^2 * grad(phi) + alpha_k * eps
/// iterated in normalized space with row 0 clamped each step.
PlanResult langevin_plan(const RobotModel& model, const SceneSdf& sdf, const Checkpoint& ckpt,
                         const TaskSpec& task, const CostWeights& weights,
                         const LangevinConfig& cfg);

/// Core Langevin iteration with an injectable gradient callback and explicit
/// step sizes; langevin_plan and the tests share it.
Mat langevin_iterate(Mat tau, const Vec& q0_normalized, const std::vector<double>& alphas,
                     const std::function<Mat(const Mat&)>& grad_fn, Rng& rng);

}  // namespace diffplan
