#include "diffplan/eval.hpp"

#include <algorithm>
#include <complex>
#include <fstream>
#include <map>

namespace diffplan {

void EvalThresholds::validate() const {
    if (!(goal_pos > 0) || !(goal_ang > 0) || !(grasp_pos > 0) || !(grasp_ang > 0) ||
        !(overlap_ratio > 0))
        throw input_error("thresholds must be positive");
    if (!(sparc_smooth < 0)) throw input_error("sparc threshold must be negative");
}

namespace {

// iterative radix-2 FFT; n must be a power of two
void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double angle = -2.0 * M_PI / static_cast<double>(len);
        std::complex<double> wl(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

SparcResult sparc(const std::vector<double>& speed_profile, double sample_rate_hz,
                  double amplitude_threshold, double cutoff_cap_hz) {
    if (speed_profile.size() < 4) throw dimension_error("sparc needs at least 4 samples");
    bool all_zero = true;
    for (double v : speed_profile)
        if (v != 0.0) {
            all_zero = false;
            break;
        }
    if (all_zero) return {0.0, true};

    const std::size_t nfft = 4 * next_pow2(speed_profile.size());
    std::vector<std::complex<double>> buf(nfft, std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < speed_profile.size(); ++i) buf[i] = speed_profile[i];
    fft_inplace(buf);

    const double df = sample_rate_hz / static_cast<double>(nfft);
    const double f_cap = std::min(cutoff_cap_hz, sample_rate_hz / 2.0);
    const std::size_t k_cap = std::min(nfft / 2, static_cast<std::size_t>(std::floor(f_cap / df)));

    std::vector<double> mag(k_cap + 1);
    for (std::size_t k = 0; k <= k_cap; ++k) mag[k] = std::abs(buf[k]);
    const double dc = mag[0];
    if (dc == 0.0) return {0.0, true};
    for (double& m : mag) m /= dc;

    std::size_t k_cut = 0;
    for (std::size_t k = 0; k <= k_cap; ++k)
        if (mag[k] >= amplitude_threshold) k_cut = k;
    double omega_c = std::max(static_cast<double>(k_cut) * df, df);

    double arc = 0.0;
    for (std::size_t k = 0; k + 1 <= k_cap; ++k) {
        double dx = df / omega_c;
        double dy = mag[k + 1] - mag[k];
        arc += std::sqrt(dx * dx + dy * dy);
    }
    return {-arc, false};
}

namespace {

struct Bbox {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    double area() const { return std::max(0.0, max_x - min_x) * std::max(0.0, max_y - min_y); }
};

Bbox bbox_of(const std::vector<Vec2>& pts) {
    Bbox b;
    b.min_x = b.max_x = pts[0].x();
    b.min_y = b.max_y = pts[0].y();
    for (const Vec2& p : pts) {
        b.min_x = std::min(b.min_x, p.x());
        b.max_x = std::max(b.max_x, p.x());
        b.min_y = std::min(b.min_y, p.y());
        b.max_y = std::max(b.max_y, p.y());
    }
    return b;
}

double overlap_ratio(const Bbox& object, const Bbox& target) {
    double ix = std::min(object.max_x, target.max_x) - std::max(object.min_x, target.min_x);
    double iy = std::min(object.max_y, target.max_y) - std::max(object.min_y, target.min_y);
    double inter = std::max(0.0, ix) * std::max(0.0, iy);
    double denom = object.area();
    return denom > 0.0 ? inter / denom : 0.0;
}

std::vector<double> config_speed_profile(const Trajectory& traj) {
    std::vector<double> out;
    for (Eigen::Index h = 0; h + 1 < traj.rows(); ++h)
        out.push_back((traj.row(h + 1) - traj.row(h)).norm());
    return out;
}

std::vector<double> ee_speed_profile(const RobotModel& model, const Trajectory& traj) {
    std::vector<double> out;
    Vec2 prev = fk_end_effector(model, traj.row(0)).position;
    for (Eigen::Index h = 1; h < traj.rows(); ++h) {
        Vec2 cur = fk_end_effector(model, traj.row(h)).position;
        out.push_back((cur - prev).norm());
        prev = cur;
    }
    return out;
}

}  // namespace

EvalReport score_trajectory(const RobotModel& model, const SceneSdf& sdf, const Trajectory& traj,
                            const TaskSpec& task, const EvalThresholds& thr) {
    thr.validate();
    if (traj.cols() != model.dof()) throw dimension_error("trajectory width != robot dof");
    EvalReport rep;

    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        Config q = traj.row(h);
        for (const Vec2& p : fk_surface_points(model, q)) {
            double depth = -query_sdf(sdf, p).value;
            if (depth > rep.collision.max_depth) rep.collision.max_depth = depth;
        }
    }
    rep.collision.any = rep.collision.max_depth > 0.0;

    int violated = 0;
    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        Vec v = joint_violation_amount(model, traj.row(h), 0.0);
        for (Eigen::Index j = 0; j < v.size(); ++j)
            if (v[j] > 0.0) ++violated;
    }
    rep.joint_violation_rate =
        static_cast<double>(violated) / (static_cast<double>(traj.rows()) * traj.cols());

    Pose2 ee = fk_end_effector(model, traj.row(traj.rows() - 1));
    bool task_ok = false;
    switch (task.task_type) {
        case TaskType::goal_reach: {
            if (!task.goal_pose) throw input_error("goal_reach task missing goal_pose");
            rep.pos_error = (ee.position - task.goal_pose->position).norm();
            rep.ang_error = std::abs(wrap_angle(ee.heading - task.goal_pose->heading));
            task_ok = rep.pos_error <= thr.goal_pos && rep.ang_error <= thr.goal_ang;
            break;
        }
        case TaskType::grasp: {
            if (task.grasp_candidates.empty()) throw input_error("grasp task missing candidates");
            rep.pos_error = std::numeric_limits<double>::infinity();
            for (const Pose2& cand : task.grasp_candidates) {
                double pe = (ee.position - cand.position).norm();
                double ae = std::abs(wrap_angle(ee.heading - cand.heading));
                if (pe < rep.pos_error) {
                    rep.pos_error = pe;
                    rep.ang_error = ae;
                }
                if (pe <= thr.grasp_pos && ae <= thr.grasp_ang) task_ok = true;
            }
            break;
        }
        case TaskType::place: {
            if (task.target_area_polygon.empty()) throw input_error("place task missing target area");
            std::vector<Vec2> footprint;
            for (const Vec2& p : TaskEnergy::default_object_footprint())
                footprint.push_back(ee.apply(p));
            Bbox object = bbox_of(footprint);
            Bbox target = bbox_of(task.target_area_polygon);
            double ratio = overlap_ratio(object, target);
            rep.pos_error = (Vec2((object.min_x + object.max_x) / 2, (object.min_y + object.max_y) / 2) -
                             Vec2((target.min_x + target.max_x) / 2, (target.min_y + target.max_y) / 2))
                                .norm();
            rep.ang_error = 0.0;
            task_ok = ratio >= thr.overlap_ratio;
            break;
        }
    }

    SparcResult sc = sparc(config_speed_profile(traj));
    SparcResult se = sparc(ee_speed_profile(model, traj));
    rep.sparc_config = sc.value;
    rep.sparc_ee = se.value;
    rep.sparc_degenerate = sc.degenerate || se.degenerate;

    rep.success = task_ok && !rep.collision.any && rep.joint_violation_rate == 0.0;
    return rep;
}

std::string planner_name(PlannerKind k) {
    switch (k) {
        case PlannerKind::guided: return "guided";
        case PlannerKind::unguided: return "unguided";
        case PlannerKind::langevin: return "langevin";
    }
    throw input_error("unknown planner kind");
}

PlannerKind planner_from_name(const std::string& name) {
    if (name == "guided") return PlannerKind::guided;
    if (name == "unguided") return PlannerKind::unguided;
    if (name == "langevin") return PlannerKind::langevin;
    throw input_error("unknown planner '" + name + "'");
}

BenchmarkResult run_benchmark(const RobotModel& model, const Checkpoint& ckpt,
                              const std::vector<BenchmarkTask>& tasks, PlannerKind planner,
                              const BenchmarkConfig& cfg) {
    const int threads = resolve_threads(cfg.threads);
    const int n_rows = static_cast<int>(tasks.size() * cfg.seeds.size());
    BenchmarkResult result;
    result.rows.resize(n_rows);
    std::vector<int> failed(n_rows, 0);

#pragma omp parallel for num_threads(threads) schedule(dynamic)
    for (int idx = 0; idx < n_rows; ++idx) {
        const BenchmarkTask& task_entry = tasks[idx / cfg.seeds.size()];
        const std::uint64_t seed = cfg.seeds[idx % cfg.seeds.size()];
        BenchmarkRow& row = result.rows[idx];
        row.task_id = task_entry.task_id;
        row.planner = planner;
        row.seed = seed;
        try {
            GeneratedScene scene = load_scene(task_entry.scene_file);
            SceneSdf sdf = build_sdf(scene.grid);
            PlanResult plan_result;
            if (planner == PlannerKind::langevin) {
                LangevinConfig lc;
                lc.steps = cfg.langevin_steps;
                lc.seed = seed;
                plan_result = langevin_plan(model, sdf, ckpt, scene.task, cfg.weights, lc);
            } else {
                GuidanceConfig gc;
                gc.weights = cfg.weights;
                gc.extra_steps = cfg.extra_steps;
                gc.guidance_enabled = (planner == PlannerKind::guided);
                gc.seed = seed;
                gc.record_trace = false;
                plan_result = plan(model, sdf, ckpt, scene.task, gc);
            }
            row.report = score_trajectory(model, sdf, plan_result.trajectory, scene.task,
                                          cfg.thresholds);
            row.report.solve_time_s = cfg.wall_time ? plan_result.diagnostics.wall_time_s : 0.0;
        } catch (const std::exception&) {
            failed[idx] = 1;
        }
    }
    for (int idx = 0; idx < n_rows; ++idx)
        if (failed[idx]) result.rows[idx].report = EvalReport{};  // failure row: success = false

    result.aggregates = aggregate_rows(result.rows);
    return result;
}

BenchmarkAggregates aggregate_rows(const std::vector<BenchmarkRow>& rows) {
    BenchmarkAggregates agg;
    if (rows.empty()) return agg;
    std::vector<double> depths;
    int successes = 0, collisions = 0, violations = 0;
    double sparc_c = 0.0, sparc_e = 0.0, time_s = 0.0;
    for (const BenchmarkRow& row : rows) {
        successes += row.report.success ? 1 : 0;
        if (row.report.collision.any) {
            ++collisions;
            depths.push_back(row.report.collision.max_depth);
        }
        violations += row.report.joint_violation_rate > 0.0 ? 1 : 0;
        sparc_c += row.report.sparc_config;
        sparc_e += row.report.sparc_ee;
        time_s += row.report.solve_time_s;
    }
    const double n = static_cast<double>(rows.size());
    agg.success_rate = 100.0 * successes / n;
    agg.collision_rate = 100.0 * collisions / n;
    agg.joint_violation_rate = 100.0 * violations / n;
    agg.mean_sparc_config = sparc_c / n;
    agg.mean_sparc_ee = sparc_e / n;
    agg.mean_solve_time_s = time_s / n;
    if (!depths.empty()) {
        double sum = 0.0;
        for (double d : depths) sum += d;
        agg.mean_depth = sum / depths.size();
        std::sort(depths.begin(), depths.end());
        std::size_t mid = depths.size() / 2;
        agg.median_depth = depths.size() % 2 ? depths[mid] : 0.5 * (depths[mid - 1] + depths[mid]);
    }
    return agg;
}

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
    std::string out =
        "task_id,planner,seed,success,pos_error,ang_error,collision_any,max_depth,"
        "joint_violation_rate,sparc_config,sparc_ee,solve_time_s\n";
    char line[512];
    for (const BenchmarkRow& row : rows) {
        const EvalReport& r = row.report;
        std::snprintf(line, sizeof(line), "%s,%s,%llu,%d,%.9g,%.9g,%d,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      row.task_id.c_str(), planner_name(row.planner).c_str(),
                      static_cast<unsigned long long>(row.seed), r.success ? 1 : 0, r.pos_error,
                      r.ang_error, r.collision.any ? 1 : 0, r.collision.max_depth,
                      r.joint_violation_rate, r.sparc_config, r.sparc_ee, r.solve_time_s);
        out += line;
    }
    return out;
}

void write_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot write benchmark csv: " + path);
    f << benchmark_csv(rows);
}

}  // namespace diffplan
