#pragma once

#include <string>
#include <vector>

#include "diffplan/sampler.hpp"

namespace diffplan {

struct EvalThresholds {
    double goal_pos = 0.04;                    // meters
    double goal_ang = 20.0 * M_PI / 180.0;     // radians
    double grasp_pos = 0.02;                   // meters
    double grasp_ang = 15.0 * M_PI / 180.0;    // radians
    double overlap_ratio = 0.5;                // placement bounding-box overlap
    double sparc_smooth = -1.6;                // below this counts as smooth

    void validate() const;
};

struct CollisionStats {
    bool any = false;
    double max_depth = 0.0;  // meters
};

struct EvalReport {
    bool success = false;
    double pos_error = 0.0;
    double ang_error = 0.0;
    CollisionStats collision;
    double joint_violation_rate = 0.0;  // fraction of (step, dim) entries outside raw limits
    double sparc_config = 0.0;
    double sparc_ee = 0.0;
    bool sparc_degenerate = false;
    double solve_time_s = 0.0;
};

struct SparcResult {
    double value = 0.0;
    bool degenerate = false;  // all-zero speed profile
};

/// Spectral arc length of a speed profile sampled at 10 Hz: zero-pad to 4x the
/// next power of two, normalize the magnitude spectrum by its DC value, find
/// the adaptive cutoff (last frequency with normalized magnitude >= 0.05,
/// capped at 20 Hz), and negate the arc length of the (omega / omega_c, V)
/// curve over the capped band.
SparcResult sparc(const std::vector<double>& speed_profile, double sample_rate_hz = 10.0,
                  double amplitude_threshold = 0.05, double cutoff_cap_hz = 20.0);

/// Geometric success scoring: task criterion plus collision-free and
/// limit-respecting checks (physics-free stand-ins reusing the task
/// thresholds; reports label this "geometric success").
EvalReport score_trajectory(const RobotModel& model, const SceneSdf& sdf, const Trajectory& traj,
                            const TaskSpec& task, const EvalThresholds& thresholds);

enum class PlannerKind { guided, unguided, langevin };

std::string planner_name(PlannerKind k);
PlannerKind planner_from_name(const std::string& name);

struct BenchmarkTask {
    std::string task_id;
    std::string scene_file;
};

struct BenchmarkConfig {
    std::vector<std::uint64_t> seeds{0};
    CostWeights weights;
    int extra_steps = 10;
    int langevin_steps = 50;
    EvalThresholds thresholds;
    int threads = 1;
    bool wall_time = false;  // off by default so CSV bytes are reproducible
};

struct BenchmarkRow {
    std::string task_id;
    PlannerKind planner;
    std::uint64_t seed;
    EvalReport report;
};

struct BenchmarkAggregates {
    double success_rate = 0.0;        // percent
    double collision_rate = 0.0;      // percent
    double mean_depth = 0.0;          // over colliding rows, meters
    double median_depth = 0.0;
    double mean_sparc_config = 0.0;
    double mean_sparc_ee = 0.0;
    double joint_violation_rate = 0.0;  // percent of rows with any violation
    double mean_solve_time_s = 0.0;
};

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;
    BenchmarkAggregates aggregates;
};

/// Run one planner over every (task, seed) pair. Rows are ordered task-major,
/// seed-minor regardless of thread count. Planner failures are recorded as
/// failure rows and the run continues.
BenchmarkResult run_benchmark(const RobotModel& model, const Checkpoint& ckpt,
                              const std::vector<BenchmarkTask>& tasks, PlannerKind planner,
                              const BenchmarkConfig& cfg);

BenchmarkAggregates aggregate_rows(const std::vector<BenchmarkRow>& rows);

/// CSV with the fixed column set; one row per (task, seed).
std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);
void write_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows);

}  // namespace diffplan
