#include "diffplan/expert.hpp"

#include <filesystem>
#include <fstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace diffplan {

using njson = nlohmann::json;

void ExpertConfig::validate() const {
    if (restarts < 1 || descent_steps < 1 || goal_ik_attempts < 1 || horizon < 2)
        throw input_error("expert counts must be positive");
    if (!(step_size > 0.0)) throw input_error("expert step size must be positive");
    if (goal_pos_tol < 0.0 || goal_ang_tol < 0.0 || max_penetration < 0.0)
        throw input_error("expert thresholds must be >= 0");
}

namespace {

bool config_collision_free(const RobotModel& model, const SceneSdf& sdf, const Config& q) {
    for (const Vec2& p : fk_surface_points(model, q))
        if (query_sdf(sdf, p).value <= 1e-6) return false;
    return true;
}

bool within_limits(const RobotModel& model, const Config& q) {
    return joint_violation_amount(model, q, 0.0).isZero(0.0);
}

}  // namespace

namespace {

// Deterministic redundancy resolution for the 3-link arm: place the base on a
// ring around the goal, fold the arm elbow-up onto the wrist, and absorb the
// residual heading in the last joint. Returns candidates in preference order
// (straight-behind first), so the dataset's goal configurations are a
// near-function of the goal pose and stay learnable.
std::vector<Config> canonical_goal_configs(const RobotModel& model, const Pose2& goal) {
    std::vector<Config> out;
    if (model.num_links() != 3) return out;
    const double L1 = model.link_lengths[0], L2 = model.link_lengths[1],
                 L3 = model.link_lengths[2];
    Vec2 wrist = goal.position - L3 * Vec2(std::cos(goal.heading), std::sin(goal.heading));
    std::vector<double> offsets = {0.0};
    for (int k = 1; k <= 8; ++k) {
        offsets.push_back(0.35 * k);
        offsets.push_back(-0.35 * k);
    }
    for (double radius : {0.55, 0.45, 0.65, 0.35, 0.75}) {
        for (double delta : offsets) {
            double alpha = goal.heading + delta;
            Vec2 base = goal.position - radius * Vec2(std::cos(alpha), std::sin(alpha));
            double c = std::cos(alpha), s = std::sin(alpha);
            Vec2 rel = wrist - base;
            Vec2 local(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y());
            double d2 = local.squaredNorm();
            double cos_elbow = (d2 - L1 * L1 - L2 * L2) / (2.0 * L1 * L2);
            if (cos_elbow < -0.999 || cos_elbow > 0.999) continue;
            double elbow = std::acos(cos_elbow);  // elbow-up branch
            double theta1 = std::atan2(local.y(), local.x()) -
                            std::atan2(L2 * std::sin(elbow), L1 + L2 * std::cos(elbow));
            double theta2 = elbow;
            double theta3 = wrap_angle((goal.heading - alpha) - theta1 - theta2);
            Config q(model.dof());
            q << base.x(), base.y(), alpha, theta1, theta2, theta3;
            out.push_back(q);
        }
    }
    return out;
}

}  // namespace

Config solve_goal_config(const RobotModel& model, const SceneSdf& sdf, const Pose2& goal,
                         std::uint64_t seed, const ExpertConfig& cfg) {
    cfg.validate();
    const int d = model.dof();
    Rng rng(seed);
    double total_reach = 0.0;
    for (double l : model.link_lengths) total_reach += l;

    for (const Config& q : canonical_goal_configs(model, goal)) {
        Pose2 ee = fk_end_effector(model, q);
        if ((ee.position - goal.position).norm() > cfg.goal_pos_tol * 0.25) continue;
        if (std::abs(wrap_angle(ee.heading - goal.heading)) > cfg.goal_ang_tol * 0.25) continue;
        if (!within_limits(model, q)) continue;
        if (!config_collision_free(model, sdf, q)) continue;
        return q;
    }

    for (int attempt = 0; attempt < cfg.goal_ik_attempts; ++attempt) {
        // seed the base on an annulus behind the goal so the arm can fold in
        Config q(d);
        double radius = rng.uniform(0.35 * total_reach, 0.95 * total_reach);
        double angle = rng.uniform(-M_PI, M_PI);
        q[0] = goal.position.x() + radius * std::cos(angle);
        q[1] = goal.position.y() + radius * std::sin(angle);
        q[2] = rng.uniform(-M_PI, M_PI);
        for (int j = 3; j < d; ++j)
            q[j] = rng.uniform(0.6 * model.joint_lower[j], 0.6 * model.joint_upper[j]);

        for (int iter = 0; iter < 200; ++iter) {
            Pose2 ee = fk_end_effector(model, q);
            Eigen::Vector3d err(goal.position.x() - ee.position.x(),
                                goal.position.y() - ee.position.y(),
                                wrap_angle(goal.heading - ee.heading));
            if (err.head<2>().norm() < 1e-4 && std::abs(err[2]) < 1e-4) break;
            Eigen::Matrix3Xd J = jacobian_end_effector(model, q);
            Eigen::Matrix3d JJt = J * J.transpose();
            JJt.diagonal().array() += 0.01;
            Vec dq = J.transpose() * JJt.ldlt().solve(err);
            // damp large steps to keep the iteration stable
            double norm = dq.norm();
            if (norm > 0.5) dq *= 0.5 / norm;
            q += dq;
            for (int j = 3; j < d; ++j) q[j] = std::clamp(q[j], model.joint_lower[j], model.joint_upper[j]);
        }

        Pose2 ee = fk_end_effector(model, q);
        double pos_err = (goal.position - ee.position).norm();
        double ang_err = std::abs(wrap_angle(goal.heading - ee.heading));
        if (pos_err <= cfg.goal_pos_tol * 0.25 && ang_err <= cfg.goal_ang_tol * 0.25 &&
            within_limits(model, q) && config_collision_free(model, sdf, q))
            return q;
    }
    throw generation_error("unreachable goal: inverse reach failed after " +
                           std::to_string(cfg.goal_ik_attempts) + " attempts");
}

namespace {

struct ExpertCost {
    const RobotModel& model;
    const SceneSdf& sdf;
    const CostWeights& weights;
    int threads;

    double value(const Trajectory& traj, Mat* grad) const {
        TermGrad col = cost_collision(model, sdf, traj, weights.eps_collision, threads);
        TermGrad smooth = cost_smoothness(traj);
        TermGrad lim = cost_joint_limits(model, traj, weights.eps_limit);
        double v = weights.lambda_collision * col.value + weights.lambda_smoothness * smooth.value +
                   weights.lambda_limit * lim.value;
        if (grad) {
            *grad = weights.lambda_collision * col.gradient +
                    weights.lambda_smoothness * smooth.gradient +
                    weights.lambda_limit * lim.gradient;
            grad->row(0).setZero();  // endpoints frozen
            grad->row(grad->rows() - 1).setZero();
        }
        return v;
    }
};

double max_penetration_depth(const RobotModel& model, const SceneSdf& sdf, const Trajectory& traj) {
    double worst = 0.0;
    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        Config q = traj.row(h);
        for (const Vec2& p : fk_surface_points(model, q))
            worst = std::max(worst, -query_sdf(sdf, p).value);
    }
    return worst;
}

bool trajectory_within_limits(const RobotModel& model, const Trajectory& traj) {
    for (Eigen::Index h = 0; h < traj.rows(); ++h)
        if (!within_limits(model, traj.row(h))) return false;
    return true;
}

}  // namespace

Trajectory optimize_trajectory(const RobotModel& model, const SceneSdf& sdf, const Config& q0,
                               const Config& q_goal, const ExpertConfig& cfg, std::uint64_t seed,
                               std::vector<std::vector<double>>* cost_traces) {
    cfg.validate();
    if (cost_traces) cost_traces->clear();
    const int H = cfg.horizon;
    const int d = model.dof();
    ExpertCost cost{model, sdf, cfg.weights, cfg.threads};

    std::optional<Trajectory> best;
    double best_cost = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        Rng rng(sub_seed(seed, static_cast<std::uint64_t>(restart)));
        Trajectory traj(H, d);
        for (int h = 0; h < H; ++h) {
            double f = static_cast<double>(h) / (H - 1);
            traj.row(h) = ((1.0 - f) * q0 + f * q_goal).transpose();
        }
        if (restart > 0) {
            // smooth interior bump perturbation; endpoints stay exact
            Vec direction(d);
            for (int j = 0; j < d; ++j) direction[j] = rng.gaussian();
            double magnitude = 0.25 * restart / cfg.restarts;
            for (int h = 1; h + 1 < H; ++h) {
                double bump = std::sin(M_PI * h / (H - 1));
                traj.row(h) += (magnitude * bump * direction).transpose();
            }
        }

        Mat grad;
        double f0 = cost.value(traj, &grad);
        double step = cfg.step_size;
        std::vector<double> trace{f0};
        for (int iter = 0; iter < cfg.descent_steps; ++iter) {
            double gnorm2 = grad.squaredNorm();
            if (gnorm2 < 1e-18) break;
            bool accepted = false;
            while (step > 1e-12) {
                Trajectory cand = traj - step * grad;
                double f1 = cost.value(cand, nullptr);
                if (f1 < f0) {
                    traj = std::move(cand);
                    f0 = f1;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
            trace.push_back(f0);
            cost.value(traj, &grad);
            step = std::min(step * 1.5, 0.1);
        }
        if (cost_traces) cost_traces->push_back(std::move(trace));

        Pose2 end_ee = fk_end_effector(model, traj.row(H - 1));
        Pose2 goal_ee = fk_end_effector(model, q_goal);
        bool endpoint_ok = (end_ee.position - goal_ee.position).norm() <= cfg.goal_pos_tol &&
                           std::abs(wrap_angle(end_ee.heading - goal_ee.heading)) <= cfg.goal_ang_tol;
        if (max_penetration_depth(model, sdf, traj) > cfg.max_penetration) continue;
        if (!trajectory_within_limits(model, traj)) continue;
        if (!endpoint_ok) continue;
        if (f0 < best_cost) {
            best_cost = f0;
            best = traj;
        }
        if (best_cost < 1e-10) break;  // straight line already optimal
    }
    if (!best) throw generation_error("trajectory optimization failed for all restarts");
    return *best;
}

Pose2 expert_goal_pose(const TaskSpec& task) {
    switch (task.task_type) {
        case TaskType::goal_reach:
            if (!task.goal_pose) throw input_error("goal_reach task missing goal_pose");
            return *task.goal_pose;
        case TaskType::grasp:
            if (task.grasp_candidates.empty()) throw input_error("grasp task missing candidates");
            return task.grasp_candidates.front();
        case TaskType::place: {
            if (task.target_area_polygon.empty()) throw input_error("place task missing target area");
            Vec2 center = Vec2::Zero();
            for (const Vec2& p : task.target_area_polygon) center += p;
            center /= static_cast<double>(task.target_area_polygon.size());
            return Pose2{center, 0.0};
        }
    }
    throw input_error("unknown task type");
}

std::string manifest_to_json(const DatasetManifest& m) {
    njson j;
    j["seeds"] = m.seeds;
    j["solved"] = m.solved;
    j["discarded"] = m.discarded;
    j["split"] = {{"train", m.train_indices}, {"test", m.test_indices}};
    return j.dump();
}

DatasetManifest manifest_from_json(const std::string& text) {
    njson j;
    try {
        j = njson::parse(text);
    } catch (const std::exception& e) {
        throw input_error(std::string("manifest parse failure: ") + e.what());
    }
    DatasetManifest m;
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.solved = j.at("solved").get<int>();
    m.discarded = j.at("discarded").get<int>();
    m.train_indices = j.at("split").at("train").get<std::vector<int>>();
    m.test_indices = j.at("split").at("test").get<std::vector<int>>();
    return m;
}

DatasetOutput generate_dataset(const RobotModel& model, const std::vector<std::uint64_t>& scene_seeds,
                               int tasks_per_scene, const GeneratorSpec& gen_spec,
                               const ExpertConfig& cfg, const std::string& out_dir) {
    if (tasks_per_scene < 1) throw input_error("tasks_per_scene must be >= 1");
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "scenes");

    struct SceneResult {
        std::string scene_file;
        std::vector<DatasetRecord> records;
        int discarded = 0;
    };
    std::vector<SceneResult> results(scene_seeds.size());
    const int threads = resolve_threads(cfg.threads);

    // scenes are independent; records are appended in seed order afterwards
#pragma omp parallel for num_threads(threads) schedule(dynamic)
    for (int si = 0; si < static_cast<int>(scene_seeds.size()); ++si) {
        std::uint64_t seed = scene_seeds[si];
        SceneResult& res = results[si];
        GeneratedScene scene;
        try {
            scene = generate_scene(seed, gen_spec, model);
        } catch (const generation_error&) {
            res.discarded = tasks_per_scene;
            continue;
        }
        SceneSdf sdf = build_sdf(scene.grid);
        res.scene_file = "scenes/scene_" + std::to_string(seed) + ".json";

        ExpertConfig solo = cfg;
        solo.threads = 1;
        for (int ti = 0; ti < tasks_per_scene; ++ti) {
            TaskSpec task;
            try {
                task = (ti == 0) ? scene.task
                                 : sample_task(sdf, model, gen_spec,
                                               sub_seed(seed, 1000 + static_cast<std::uint64_t>(ti)));
                Pose2 goal = expert_goal_pose(task);
                Config q_goal = solve_goal_config(model, sdf, goal,
                                                  sub_seed(seed, 2000 + static_cast<std::uint64_t>(ti)),
                                                  solo);
                Trajectory traj = optimize_trajectory(model, sdf, task.start, q_goal, solo,
                                                      sub_seed(seed, 3000 + static_cast<std::uint64_t>(ti)));
                DatasetRecord rec;
                rec.scene_file = res.scene_file;
                rec.task_type = task.task_type;
                rec.q0 = task.start;
                rec.trajectory = traj;
                rec.task = task;
                res.records.push_back(std::move(rec));
            } catch (const generation_error&) {
                ++res.discarded;
            }
        }
        if (!res.records.empty())
            save_scene((fs::path(out_dir) / res.scene_file).string(), scene.grid, scene.task);
    }

    DatasetOutput out;
    out.manifest.seeds = scene_seeds;
    for (auto& res : results) {
        out.manifest.discarded += res.discarded;
        for (auto& rec : res.records) out.records.push_back(std::move(rec));
    }
    out.manifest.solved = static_cast<int>(out.records.size());
    for (int i = 0; i < out.manifest.solved; ++i) {
        if (i % 10 == 9)
            out.manifest.test_indices.push_back(i);
        else
            out.manifest.train_indices.push_back(i);
    }
    write_dataset_jsonl((fs::path(out_dir) / "dataset.jsonl").string(), out.records);
    std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::binary);
    if (!mf) throw artifact_error("cannot write manifest under " + out_dir);
    mf << manifest_to_json(out.manifest) << "\n";
    return out;
}

}  // namespace diffplan
