#pragma once

#include <string>
#include <vector>

#include "diffplan/common.hpp"

namespace diffplan {

/// Planar rigid pose: position in meters, heading in radians (unwrapped).
struct Pose2 {
    Vec2 position{0.0, 0.0};
    double heading = 0.0;

    Vec2 apply(const Vec2& local) const {
        double c = std::cos(heading), s = std::sin(heading);
        return Vec2(position.x() + c * local.x() - s * local.y(),
                    position.y() + s * local.x() + c * local.y());
    }
    Pose2 compose(const Pose2& other) const {
        return Pose2{apply(other.position), heading + other.heading};
    }
    Pose2 inverse() const {
        double c = std::cos(heading), s = std::sin(heading);
        return Pose2{Vec2(-(c * position.x() + s * position.y()),
                          -(-s * position.x() + c * position.y())),
                     -heading};
    }
};

/// Configuration vector: (base x, base y, base yaw, arm joints...). Angles are
/// stored unwrapped; diffusion and optimization need a seam-free chart.
using Config = Eigen::VectorXd;

/// A trajectory is an H x d matrix, one configuration per row.
using Trajectory = Eigen::MatrixXd;

/// Planar mobile manipulator: disc base with an n-link serial arm mounted at
/// the base center. The end effector sits at the tip of the last link with
/// heading equal to the accumulated yaw.
struct RobotModel {
    std::vector<double> link_lengths;  // meters, all > 0
    double base_radius = 0.25;         // meters, > 0
    Vec joint_lower, joint_upper;      // length d; unbounded dims encoded as +-1e9
    // surface_template[0] is the base ring, surface_template[1+j] belongs to link j.
    std::vector<std::vector<Vec2>> surface_template;
    std::vector<Vec2> gripper_template;  // end-effector-frame points

    int dof() const { return 3 + static_cast<int>(link_lengths.size()); }
    int num_links() const { return static_cast<int>(link_lengths.size()); }
    int surface_point_count() const;

    void validate() const;

    /// 3-link default: L = [0.4, 0.3, 0.2] m, base radius 0.25 m, arm limits
    /// +-2.9 rad, base pose unbounded, 12 base + 4 per-link surface samples.
    static RobotModel default_model();
};

/// Frame origins and accumulated angles for one configuration, reused by the
/// point maps and their Jacobians.
struct FkFrames {
    Vec2 base;
    double base_yaw = 0.0;
    std::vector<Vec2> joint_origin;    // joint_origin[j] = origin of link j (j = 0..n-1)
    std::vector<double> link_angle;    // accumulated angle of link j
    Vec2 ee_position;
    double ee_heading = 0.0;
};

FkFrames fk_frames(const RobotModel& model, const Config& q);

Pose2 fk_end_effector(const RobotModel& model, const Config& q);

/// World positions of all surface samples (base ring first, then per-link
/// points). Count and order are fixed for a fixed model.
std::vector<Vec2> fk_surface_points(const RobotModel& model, const Config& q);

/// World positions of the gripper template at the current end-effector pose.
std::vector<Vec2> fk_gripper_points(const RobotModel& model, const Config& q);

/// 2 x d Jacobians of every surface point followed by every gripper point,
/// in the same order as fk_surface_points / fk_gripper_points.
struct PointJacobians {
    std::vector<Eigen::Matrix2Xd> surface;
    std::vector<Eigen::Matrix2Xd> gripper;
};
PointJacobians jacobian_points(const RobotModel& model, const Config& q);

/// Jacobian of the end-effector pose (rows: x, y, heading) w.r.t. q.
Eigen::Matrix3Xd jacobian_end_effector(const RobotModel& model, const Config& q);

/// Per-dimension distance to the margin-shrunk joint limits, zero inside
/// [lower + margin, upper - margin].
Vec joint_violation_amount(const RobotModel& model, const Config& q, double margin);

std::string robot_model_to_json(const RobotModel& model);
RobotModel robot_model_from_json(const std::string& text);

}  // namespace diffplan
