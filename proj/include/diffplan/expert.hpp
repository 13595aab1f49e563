#pragma once

#include <optional>
#include <string>

#include "diffplan/diffusion.hpp"

namespace diffplan {

struct ExpertConfig {
    int restarts = 8;
    int descent_steps = 400;
    double step_size = 2e-3;  // initial descent step, halved by backtracking
    int goal_ik_attempts = 50;
    double max_penetration = 0.0;              // meters; accepted demos have none
    double goal_pos_tol = 0.04;                // meters
    double goal_ang_tol = 20.0 * M_PI / 180.0; // radians
    int horizon = 50;
    CostWeights weights{20.0, 2.0, 5.0, 0.0, 0.03, 0.02};  // no task energy term
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

/// Damped-least-squares inverse reach: a collision-free configuration whose
/// end effector matches `goal` within the expert tolerances.
Config solve_goal_config(const RobotModel& model, const SceneSdf& sdf, const Pose2& goal,
                         std::uint64_t seed, const ExpertConfig& cfg);

/// First-order trajectory descent from a straight-line initialization with
/// frozen endpoints and backtracking line search. Returns the best restart
/// that is penetration-free, limit-respecting, and endpoint-exact.
Trajectory optimize_trajectory(const RobotModel& model, const SceneSdf& sdf, const Config& q0,
                               const Config& q_goal, const ExpertConfig& cfg, std::uint64_t seed,
                               std::vector<std::vector<double>>* cost_traces = nullptr);

/// Reduce a task to an end-effector goal pose for the expert solver.
Pose2 expert_goal_pose(const TaskSpec& task);

struct DatasetManifest {
    std::vector<std::uint64_t> seeds;
    int solved = 0;
    int discarded = 0;
    std::vector<int> train_indices;  // indices into the JSONL record order
    std::vector<int> test_indices;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

struct DatasetOutput {
    std::vector<DatasetRecord> records;
    DatasetManifest manifest;
};

/// Generate scenes for every seed, solve tasks_per_scene expert trajectories
/// in each, and assign a 9:1 train/test split. Failures are discarded and
/// counted, never fatal. Scene files are written under out_dir/scenes.
DatasetOutput generate_dataset(const RobotModel& model, const std::vector<std::uint64_t>& scene_seeds,
                               int tasks_per_scene, const GeneratorSpec& gen_spec,
                               const ExpertConfig& cfg, const std::string& out_dir);

}  // namespace diffplan
