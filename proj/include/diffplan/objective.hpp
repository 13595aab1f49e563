#pragma once

#include <span>
#include <vector>

#include "diffplan/scene.hpp"

namespace diffplan {

/// Weights and margins for the guidance objective. All weights are >= 0.
struct CostWeights {
    double lambda_collision = 1.0;
    double lambda_smoothness = 0.1;
    double lambda_limit = 1.0;
    double energy_weight = 1.0;
    double eps_collision = 0.03;  // collision safety margin, meters
    double eps_limit = 0.02;      // joint-limit safety margin

    void validate() const;
};

constexpr double kDefaultGradClip = 10.0;  // per-element clip applied to the combined gradient

/// Task energy payload. goal_points is the goal cloud for goal reaching;
/// placement carries the object's placement-surface points (object frame), the
/// rigid end-effector-to-object offset, and the target area cloud; grasping
/// carries candidate end-effector poses soft-minimized at temperature beta.
struct TaskEnergy {
    enum class Kind { goal_reach, place, grasp_surrogate };
    Kind kind = Kind::goal_reach;
    std::vector<Vec2> goal_points;
    std::vector<Vec2> object_points;  // object frame
    std::vector<Vec2> target_area_points;
    Pose2 grasp_offset;
    std::vector<Pose2> grasp_candidates;
    double beta = 20.0;
    double w_ang = 0.1;  // m^2 / rad^2

    /// Default rectangular placement footprint used when a task does not
    /// specify object geometry.
    static std::vector<Vec2> default_object_footprint();

    static TaskEnergy from_task(const RobotModel& model, const TaskSpec& task);
};

struct TermGrad {
    double value = 0.0;
    Mat gradient;  // H x d
};

struct ObjectiveReport {
    double total = 0.0;  // -(energy_weight * e + sum_i lambda_i * c_i); always <= 0
    double energy = 0.0;
    double c_collision = 0.0;
    double c_smoothness = 0.0;
    double c_limit = 0.0;
    Mat gradient;  // H x d, per-element clipped
};

/// Hinge-penalized signed distance over all surface points at all steps.
TermGrad cost_collision(const RobotModel& model, const SceneSdf& sdf, const Trajectory& traj,
                        double eps_collision, int threads = 1);

/// Sum of squared second differences of the configuration rows.
TermGrad cost_smoothness(const Trajectory& traj);

/// Squared distance to the margin-shrunk joint limits, summed over steps.
TermGrad cost_joint_limits(const RobotModel& model, const Trajectory& traj, double eps_limit);

struct ChamferResult {
    double value = 0.0;
    std::vector<Vec2> grad_p, grad_q;
};

/// Symmetric squared chamfer distance with subgradients through the nearest
/// neighbor matches (ties resolved to the lowest index).
ChamferResult chamfer(std::span<const Vec2> p, std::span<const Vec2> q);

TermGrad energy_goal_reach(const RobotModel& model, const Trajectory& traj,
                           std::span<const Vec2> goal_points);

TermGrad energy_place(const RobotModel& model, const Trajectory& traj,
                      std::span<const Vec2> object_points, std::span<const Vec2> target_points,
                      const Pose2& grasp_offset);

/// Softmin over candidate end-effector poses of squared position error plus
/// w_ang-weighted squared wrapped heading error, at the final step.
TermGrad energy_grasp_surrogate(const RobotModel& model, const Trajectory& traj,
                                std::span<const Pose2> candidates, double beta, double w_ang);

TermGrad task_energy(const RobotModel& model, const Trajectory& traj, const TaskEnergy& energy);

/// Combined objective phi = -(energy_weight * e + sum lambda_i c_i) with the
/// exact gradient, per-element clipped to +-grad_clip.
ObjectiveReport evaluate_objective(const RobotModel& model, const SceneSdf& sdf,
                                   const Trajectory& traj, const TaskEnergy& energy,
                                   const CostWeights& weights, double grad_clip = kDefaultGradClip,
                                   int threads = 1);

}  // namespace diffplan
