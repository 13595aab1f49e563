#include "diffplan/sampler.hpp"

#include <chrono>

namespace diffplan {

void GuidanceConfig::validate() const {
    if (extra_steps < 0) throw input_error("extra_steps must be >= 0");
    weights.validate();
}

void LangevinConfig::validate() const {
    if (steps < 1) throw input_error("langevin steps must be >= 1");
    if (!(alpha_end > 0.0) || alpha_end > alpha_start)
        throw input_error("need 0 < alpha_end <= alpha_start");
}

std::vector<double> LangevinConfig::alpha_sequence() const {
    validate();
    std::vector<double> out(steps);
    if (steps == 1) {
        out[0] = alpha_start;
        return out;
    }
    double ratio = alpha_end / alpha_start;
    for (int i = 0; i < steps; ++i)
        out[i] = alpha_start * std::pow(ratio, static_cast<double>(i) / (steps - 1));
    return out;
}

PlanContext PlanContext::make(const RobotModel& model, const SceneSdf& sdf, const Checkpoint& ckpt,
                              const TaskSpec& task, const GuidanceConfig& cfg) {
    cfg.validate();
    if (ckpt.dof != model.dof()) throw dimension_error("checkpoint dof != robot dof");
    if (task.start.size() != model.dof()) throw dimension_error("start configuration dof mismatch");

    PlanContext ctx;
    ctx.model = &model;
    ctx.sdf = &sdf;
    ctx.checkpoint = &ckpt;
    ctx.task = task;
    ctx.energy = cfg.energy.goal_points.empty() && cfg.energy.grasp_candidates.empty() &&
                         cfg.energy.target_area_points.empty()
                     ? TaskEnergy::from_task(model, task)
                     : cfg.energy;
    ctx.weights = cfg.weights;
    ctx.grad_clip = cfg.grad_clip;
    ctx.threads = cfg.threads;

    ScenePoints pts = sample_scene_points(sdf, model, task, sub_seed(cfg.seed, 0x5CEE));
    ctx.scene_features = encode_scene_features<float>(pts);

    // the base-frame start row is (0, 0, 0, arm...) by construction
    Config q0_base = task.start;
    q0_base[0] = 0.0;
    q0_base[1] = 0.0;
    q0_base[2] = 0.0;
    ctx.q0_normalized = ckpt.normalizer.normalize_config(q0_base);
    return ctx;
}

Mat guidance_gradient(const PlanContext& ctx, const Mat& tau_normalized, ObjectiveReport* report) {
    const Checkpoint& ckpt = *ctx.checkpoint;
    Trajectory base = ckpt.normalizer.denormalize(tau_normalized);
    Trajectory world = base_frame_to_world(base, ctx.task.start);
    ObjectiveReport rep = evaluate_objective(*ctx.model, *ctx.sdf, world, ctx.energy, ctx.weights,
                                             ctx.grad_clip, ctx.threads);
    if (report) *report = rep;
    Mat grad_base = world_gradient_to_base_frame(rep.gradient, ctx.task.start);
    return ckpt.normalizer.gradient_to_normalized(grad_base);
}

Mat step_guidance_gradient(const PlanContext& ctx, const Mat& tau_normalized, double sigma2,
                           ObjectiveReport* report) {
    Mat g = guidance_gradient(ctx, tau_normalized, report);
    double clip = 1.0 / std::sqrt(sigma2);
    return g.cwiseMax(-clip).cwiseMin(clip);
}

Mat guided_step(const PlanContext& ctx, const Mat& tau_t, int t, bool guidance_enabled, Rng& rng,
                ObjectiveReport* report) {
    const Checkpoint& ckpt = *ctx.checkpoint;
    const NoiseSchedule& schedule = ckpt.schedule;
    if (t < 1 || t > schedule.T) throw dimension_error("diffusion step out of range");

    Eigen::MatrixXf eps_hat_f;
    {
        DenoiserWorkspace<float> ws;
        Eigen::MatrixXf tau_f = tau_t.cast<float>();
        eps_hat_f = denoiser_forward<float>(ckpt.params, tau_f, t, ctx.scene_features, ws);
    }
    // posterior mean through the thresholded trajectory estimate: the implied
    // tau_0 is clamped to (slightly beyond) the normalized data box before the
    // closed-form posterior, which keeps early steps sane when the noise
    // prediction is imperfect; with an exact prediction this equals the
    // direct mean formula
    Mat eps_hat = eps_hat_f.cast<double>();
    double abar = schedule.alpha_bar(t);
    double abar_prev = schedule.alpha_bar(t - 1);
    Mat tau0_hat = (tau_t - std::sqrt(1.0 - abar) * eps_hat) / std::sqrt(abar);
    tau0_hat = tau0_hat.cwiseMax(-kSampleBoxLimit).cwiseMin(kSampleBoxLimit);
    Mat mu = (std::sqrt(abar_prev) * schedule.beta(t) * tau0_hat +
              std::sqrt(schedule.alpha(t)) * (1.0 - abar_prev) * tau_t) /
             (1.0 - abar);

    Mat shift = Mat::Zero(mu.rows(), mu.cols());
    if (guidance_enabled) {
        Mat g = step_guidance_gradient(ctx, mu, schedule.posterior_var(t), report);
        if (!g.allFinite()) throw numeric_error("guidance gradient");
        shift = schedule.posterior_var(t) * g;
    } else if (report) {
        guidance_gradient(ctx, mu, report);  // trace only
    }

    Mat next = mu + shift;
    if (t > 1) {
        double sigma = std::sqrt(schedule.posterior_var(t));
        next += sigma * rng.gaussian_matrix(mu.rows(), mu.cols());
    }
    next.row(0) = ctx.q0_normalized.transpose();
    return next;
}

PlanResult plan(const RobotModel& model, const SceneSdf& sdf, const Checkpoint& ckpt,
                const TaskSpec& task, const GuidanceConfig& cfg) {
    auto t_begin = std::chrono::steady_clock::now();
    PlanContext ctx = PlanContext::make(model, sdf, ckpt, task, cfg);
    const NoiseSchedule& schedule = ckpt.schedule;
    const int H = ckpt.horizon;
    const int d = ckpt.dof;

    Rng rng(cfg.seed);
    Mat tau = rng.gaussian_matrix(H, d);
    tau.row(0) = ctx.q0_normalized.transpose();

    PlanResult result;
    int step_counter = 0;
    auto record = [&](const ObjectiveReport& rep) {
        result.diagnostics.trace.push_back({step_counter, rep.total, rep.energy, rep.c_collision,
                                            rep.c_smoothness, rep.c_limit});
    };

    for (int t = schedule.T; t >= 1; --t, ++step_counter) {
        ObjectiveReport rep;
        tau = guided_step(ctx, tau, t, cfg.guidance_enabled, rng,
                          cfg.record_trace ? &rep : nullptr);
        if (cfg.record_trace) record(rep);
    }
    for (int k = 0; k < cfg.extra_steps; ++k, ++step_counter) {
        ObjectiveReport rep;
        tau = guided_step(ctx, tau, 1, cfg.guidance_enabled, rng,
                          cfg.record_trace ? &rep : nullptr);
        if (cfg.record_trace) record(rep);
    }

    Trajectory base = ckpt.normalizer.denormalize(tau);
    result.trajectory = base_frame_to_world(base, task.start);
    auto t_end = std::chrono::steady_clock::now();
    result.diagnostics.wall_time_s = std::chrono::duration<double>(t_end - t_begin).count();
    return result;
}

Mat langevin_iterate(Mat tau, const Vec& q0_normalized, const std::vector<double>& alphas,
                     const std::function<Mat(const Mat&)>& grad_fn, Rng& rng) {
    tau.row(0) = q0_normalized.transpose();
    for (double alpha : alphas) {
        Mat g = grad_fn(tau);
        tau += 0.5 * alpha * alpha * g + alpha * rng.gaussian_matrix(tau.rows(), tau.cols());
        tau.row(0) = q0_normalized.transpose();
    }
    return tau;
}

PlanResult langevin_plan(const RobotModel& model, const SceneSdf& sdf, const Checkpoint& ckpt,
                         const TaskSpec& task, const CostWeights& weights,
                         const LangevinConfig& cfg) {
    auto t_begin = std::chrono::steady_clock::now();
    GuidanceConfig gcfg;
    gcfg.weights = weights;
    gcfg.seed = cfg.seed;
    PlanContext ctx = PlanContext::make(model, sdf, ckpt, task, gcfg);

    Rng rng(cfg.seed);
    Mat tau = rng.gaussian_matrix(ckpt.horizon, ckpt.dof);
    tau = langevin_iterate(std::move(tau), ctx.q0_normalized, cfg.alpha_sequence(),
                           [&](const Mat& x) { return guidance_gradient(ctx, x, nullptr); }, rng);

    PlanResult result;
    Trajectory base = ckpt.normalizer.denormalize(tau);
    result.trajectory = base_frame_to_world(base, task.start);
    auto t_end = std::chrono::steady_clock::now();
    result.diagnostics.wall_time_s = std::chrono::duration<double>(t_end - t_begin).count();
    return result;
}

}  // namespace diffplan
