#pragma once

// Test-only oracles, independent of the library implementation paths:
// homogeneous-transform forward kinematics, central finite differences,
// analytic shape distance fields, and a double-loop chamfer.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "diffplan/kinematics.hpp"
#include "diffplan/scene.hpp"

namespace oracle {

using diffplan::Config;
using diffplan::Mat;
using diffplan::RobotModel;
using diffplan::Vec;
using diffplan::Vec2;

inline Eigen::Matrix3d transform2d(double angle, double tx, double ty) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 0) = std::cos(angle);
    m(0, 1) = -std::sin(angle);
    m(1, 0) = std::sin(angle);
    m(1, 1) = std::cos(angle);
    m(0, 2) = tx;
    m(1, 2) = ty;
    return m;
}

// End-effector pose by composing one homogeneous transform per body.
inline diffplan::Pose2 fk_matrix_chain(const RobotModel& model, const Config& q) {
    Eigen::Matrix3d T = transform2d(q[2], q[0], q[1]);
    double heading = q[2];
    for (int j = 0; j < model.num_links(); ++j) {
        T = T * transform2d(q[3 + j], 0.0, 0.0) * transform2d(0.0, model.link_lengths[j], 0.0);
        heading += q[3 + j];
    }
    // translation happens before rotation inside each link transform above, so
    // rebuild: rotate at the joint, then advance along the rotated x axis
    return diffplan::Pose2{Vec2(T(0, 2), T(1, 2)), heading};
}

// World position of a local point attached to body `body` (0 = base,
// 1..n = links expressed at the link origin, n+1 = end-effector frame),
// using the same matrix chain.
inline Vec2 body_point_matrix_chain(const RobotModel& model, const Config& q, int body,
                                    const Vec2& local) {
    const int n = model.num_links();
    Eigen::Matrix3d T = transform2d(q[2], q[0], q[1]);
    const int links_applied = (body == 0) ? 0 : std::min(body, n);
    for (int j = 0; j < links_applied; ++j)
        T = T * transform2d(q[3 + j], 0.0, 0.0) * transform2d(0.0, model.link_lengths[j], 0.0);
    if (body >= 1 && body <= n)  // undo the advance: link frames sit at the link origin
        T = T * transform2d(0.0, -model.link_lengths[body - 1], 0.0);
    Eigen::Vector3d p = T * Eigen::Vector3d(local.x(), local.y(), 1.0);
    return Vec2(p.x(), p.y());
}

// Central finite difference of a scalar function of a configuration.
inline Vec fd_gradient_config(const std::function<double(const Config&)>& f, const Config& q,
                              double h) {
    Vec g(q.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) {
        Config qp = q, qm = q;
        qp[j] += h;
        qm[j] -= h;
        g[j] = (f(qp) - f(qm)) / (2.0 * h);
    }
    return g;
}

// Central finite difference of a scalar function of a full trajectory.
inline Mat fd_gradient_trajectory(const std::function<double(const Mat&)>& f, const Mat& traj,
                                  double h) {
    Mat g(traj.rows(), traj.cols());
    for (Eigen::Index r = 0; r < traj.rows(); ++r)
        for (Eigen::Index c = 0; c < traj.cols(); ++c) {
            Mat tp = traj, tm = traj;
            tp(r, c) += h;
            tm(r, c) -= h;
            g(r, c) = (f(tp) - f(tm)) / (2.0 * h);
        }
    return g;
}

inline double rel_error(const Mat& approx, const Mat& exact) {
    double denom = std::max(exact.norm(), 1e-12);
    return (approx - exact).norm() / denom;
}

inline double rel_error_vec(const Vec& approx, const Vec& exact) {
    double denom = std::max(exact.norm(), 1e-12);
    return (approx - exact).norm() / denom;
}

// Occupancy grid of a solid disc; cell centers inside the radius are occupied.
inline diffplan::OccupancyGrid disc_grid(double room, double resolution, const Vec2& center,
                                         double radius) {
    diffplan::OccupancyGrid g;
    g.resolution = resolution;
    g.origin = Vec2(0.0, 0.0);
    g.width = g.height = static_cast<int>(std::lround(room / resolution));
    g.cells.assign(static_cast<std::size_t>(g.width) * g.height, 0);
    for (int iy = 0; iy < g.height; ++iy)
        for (int ix = 0; ix < g.width; ++ix)
            if ((g.cell_center(ix, iy) - center).norm() <= radius) g.set(ix, iy, true);
    return g;
}

// Double-loop symmetric squared chamfer value; the directional sums reduce
// separately (matching the symmetric reduction the library commits to).
inline double chamfer_bruteforce(const std::vector<Vec2>& p, const std::vector<Vec2>& q) {
    double sum_pq = 0.0, sum_qp = 0.0;
    for (const Vec2& a : p) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& b : q) best = std::min(best, (a - b).squaredNorm());
        sum_pq += best;
    }
    for (const Vec2& b : q) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& a : p) best = std::min(best, (b - a).squaredNorm());
        sum_qp += best;
    }
    return sum_pq + sum_qp;
}

// True when every robot surface point across the trajectory keeps a safe
// margin from bilinear patch boundaries, so finite differences of SDF-backed
// costs stay on one smooth patch.
inline bool fd_safe_for_sdf(const RobotModel& model, const diffplan::SceneSdf& sdf, const Mat& traj,
                            double margin_cells) {
    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        for (const Vec2& p : diffplan::fk_surface_points(model, traj.row(h))) {
            double u = (p.x() - sdf.grid.origin.x()) / sdf.grid.resolution - 0.5;
            double v = (p.y() - sdf.grid.origin.y()) / sdf.grid.resolution - 0.5;
            if (u < margin_cells || v < margin_cells || u > sdf.grid.width - 1 - margin_cells ||
                v > sdf.grid.height - 1 - margin_cells)
                return false;
            double fu = u - std::floor(u), fv = v - std::floor(v);
            if (fu < margin_cells || fu > 1.0 - margin_cells) return false;
            if (fv < margin_cells || fv > 1.0 - margin_cells) return false;
        }
    }
    return true;
}

}  // namespace oracle
