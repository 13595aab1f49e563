#include "diffplan/objective.hpp"

#include <algorithm>

namespace diffplan {

void CostWeights::validate() const {
    if (lambda_collision < 0 || lambda_smoothness < 0 || lambda_limit < 0 || energy_weight < 0 ||
        eps_collision < 0 || eps_limit < 0)
        throw input_error("cost weights and margins must be non-negative");
}

std::vector<Vec2> TaskEnergy::default_object_footprint() {
    // rectangle outline, 0.20 x 0.14 m, centered on the carried frame
    std::vector<Vec2> pts;
    const double hx = 0.10, hy = 0.07;
    for (int k = 0; k < 4; ++k) {
        double fx = -hx + 2.0 * hx * k / 3.0;
        pts.emplace_back(fx, -hy);
        pts.emplace_back(fx, hy);
    }
    pts.emplace_back(-hx, 0.0);
    pts.emplace_back(hx, 0.0);
    return pts;
}

TaskEnergy TaskEnergy::from_task(const RobotModel& model, const TaskSpec& task) {
    TaskEnergy e;
    switch (task.task_type) {
        case TaskType::goal_reach: {
            if (!task.goal_pose) throw input_error("goal_reach task missing goal_pose");
            e.kind = Kind::goal_reach;
            for (const Vec2& p : model.gripper_template) e.goal_points.push_back(task.goal_pose->apply(p));
            break;
        }
        case TaskType::place: {
            if (task.target_area_polygon.empty()) throw input_error("place task missing target area");
            e.kind = Kind::place;
            e.object_points = default_object_footprint();
            e.grasp_offset = Pose2{};
            // sample the area boundary densely enough for a stable chamfer target
            double perimeter = 0.0;
            const auto& poly = task.target_area_polygon;
            for (std::size_t i = 0; i < poly.size(); ++i)
                perimeter += (poly[(i + 1) % poly.size()] - poly[i]).norm();
            int count = std::max<int>(16, static_cast<int>(perimeter / 0.05));
            for (int k = 0; k < count; ++k) {
                double s = perimeter * k / count;
                for (std::size_t i = 0; i < poly.size(); ++i) {
                    Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
                    double len = (b - a).norm();
                    if (s <= len || i + 1 == poly.size()) {
                        double f = (len > 0.0) ? std::min(s / len, 1.0) : 0.0;
                        e.target_area_points.push_back(a + f * (b - a));
                        break;
                    }
                    s -= len;
                }
            }
            break;
        }
        case TaskType::grasp: {
            if (task.grasp_candidates.empty()) throw input_error("grasp task missing candidates");
            e.kind = Kind::grasp_surrogate;
            e.grasp_candidates = task.grasp_candidates;
            break;
        }
    }
    return e;
}

TermGrad cost_collision(const RobotModel& model, const SceneSdf& sdf, const Trajectory& traj,
                        double eps_collision, int threads) {
    if (!(eps_collision > 0.0)) throw input_error("collision margin must be positive");
    const int H = static_cast<int>(traj.rows());
    TermGrad out;
    out.gradient = Mat::Zero(H, traj.cols());
    std::vector<double> step_value(H, 0.0);
    threads = resolve_threads(threads);

    // steps are independent; each owns its gradient row, values reduced in order
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int h = 0; h < H; ++h) {
        Config q = traj.row(h);
        std::vector<Vec2> points = fk_surface_points(model, q);
        PointJacobians jac = jacobian_points(model, q);
        double value = 0.0;
        Vec grad_row = Vec::Zero(traj.cols());
        for (std::size_t i = 0; i < points.size(); ++i) {
            SdfQuery sq = query_sdf(sdf, points[i]);
            double d = sq.value;
            double phi, dphi;
            if (d < 0.0) {
                phi = -d + 0.5 * eps_collision;
                dphi = -1.0;
            } else if (d <= eps_collision) {
                phi = (d - eps_collision) * (d - eps_collision) / (2.0 * eps_collision);
                dphi = (d - eps_collision) / eps_collision;
            } else {
                continue;
            }
            value += phi;
            grad_row.noalias() += jac.surface[i].transpose() * (dphi * sq.gradient);
        }
        step_value[h] = value;
        out.gradient.row(h) = grad_row;
    }
    for (int h = 0; h < H; ++h) out.value += step_value[h];
    return out;
}

TermGrad cost_smoothness(const Trajectory& traj) {
    const int H = static_cast<int>(traj.rows());
    if (H < 3) throw dimension_error("smoothness cost needs at least 3 steps");
    TermGrad out;
    out.gradient = Mat::Zero(H, traj.cols());
    for (int h = 0; h + 2 < H; ++h) {
        Vec r = traj.row(h + 2) - 2.0 * traj.row(h + 1) + traj.row(h);
        out.value += r.squaredNorm();
        out.gradient.row(h) += 2.0 * r.transpose();
        out.gradient.row(h + 1) -= 4.0 * r.transpose();
        out.gradient.row(h + 2) += 2.0 * r.transpose();
    }
    return out;
}

TermGrad cost_joint_limits(const RobotModel& model, const Trajectory& traj, double eps_limit) {
    if (eps_limit < 0.0) throw input_error("joint limit margin must be >= 0");
    const int H = static_cast<int>(traj.rows());
    TermGrad out;
    out.gradient = Mat::Zero(H, traj.cols());
    for (int h = 0; h < H; ++h) {
        for (int j = 0; j < traj.cols(); ++j) {
            double lower = model.joint_lower[j] + eps_limit;
            double upper = model.joint_upper[j] - eps_limit;
            double q = traj(h, j);
            if (q < lower) {
                out.value += (lower - q) * (lower - q);
                out.gradient(h, j) += -2.0 * (lower - q);
            } else if (q > upper) {
                out.value += (q - upper) * (q - upper);
                out.gradient(h, j) += 2.0 * (q - upper);
            }
        }
    }
    return out;
}

ChamferResult chamfer(std::span<const Vec2> p, std::span<const Vec2> q) {
    if (p.empty() || q.empty()) throw dimension_error("chamfer requires non-empty point sets");
    ChamferResult out;
    out.grad_p.assign(p.size(), Vec2::Zero());
    out.grad_q.assign(q.size(), Vec2::Zero());
    // the two directional sums accumulate separately so the result is exactly
    // symmetric in the argument order
    double sum_pq = 0.0, sum_qp = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::size_t best = 0;
        double best_d = (p[i] - q[0]).squaredNorm();
        for (std::size_t j = 1; j < q.size(); ++j) {
            double d = (p[i] - q[j]).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        sum_pq += best_d;
        Vec2 diff = 2.0 * (p[i] - q[best]);
        out.grad_p[i] += diff;
        out.grad_q[best] -= diff;
    }
    for (std::size_t j = 0; j < q.size(); ++j) {
        std::size_t best = 0;
        double best_d = (q[j] - p[0]).squaredNorm();
        for (std::size_t i = 1; i < p.size(); ++i) {
            double d = (q[j] - p[i]).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        sum_qp += best_d;
        Vec2 diff = 2.0 * (q[j] - p[best]);
        out.grad_q[j] += diff;
        out.grad_p[best] -= diff;
    }
    out.value = sum_pq + sum_qp;
    return out;
}

TermGrad energy_goal_reach(const RobotModel& model, const Trajectory& traj,
                           std::span<const Vec2> goal_points) {
    if (goal_points.empty()) throw dimension_error("goal point cloud is empty");
    const int H = static_cast<int>(traj.rows());
    Config q_last = traj.row(H - 1);
    std::vector<Vec2> ee = fk_gripper_points(model, q_last);
    ChamferResult ch = chamfer(ee, goal_points);
    PointJacobians jac = jacobian_points(model, q_last);
    TermGrad out;
    out.value = ch.value;
    out.gradient = Mat::Zero(H, traj.cols());
    Vec row = Vec::Zero(traj.cols());
    for (std::size_t i = 0; i < ee.size(); ++i)
        row.noalias() += jac.gripper[i].transpose() * ch.grad_p[i];
    out.gradient.row(H - 1) = row;
    return out;
}

TermGrad energy_place(const RobotModel& model, const Trajectory& traj,
                      std::span<const Vec2> object_points, std::span<const Vec2> target_points,
                      const Pose2& grasp_offset) {
    if (object_points.empty() || target_points.empty())
        throw dimension_error("placement clouds must be non-empty");
    const int H = static_cast<int>(traj.rows());
    Config q_last = traj.row(H - 1);
    FkFrames f = fk_frames(model, q_last);
    Pose2 ee{f.ee_position, f.ee_heading};

    // object points ride on the end effector through the grasp offset
    std::vector<Vec2> carried_local;  // in the end-effector frame
    carried_local.reserve(object_points.size());
    for (const Vec2& p : object_points) carried_local.push_back(grasp_offset.apply(p));
    std::vector<Vec2> world;
    world.reserve(object_points.size());
    for (const Vec2& p : carried_local) world.push_back(ee.apply(p));

    ChamferResult ch = chamfer(world, target_points);
    TermGrad out;
    out.value = ch.value;
    out.gradient = Mat::Zero(H, traj.cols());
    Eigen::Matrix3Xd Jee = jacobian_end_effector(model, q_last);
    Vec row = Vec::Zero(traj.cols());
    double c = std::cos(ee.heading), s = std::sin(ee.heading);
    for (std::size_t i = 0; i < world.size(); ++i) {
        // d world_i / dq = J_pos + d heading/dq * perp(R * local)
        const Vec2& l = carried_local[i];
        Vec2 rot(c * l.x() - s * l.y(), s * l.x() + c * l.y());
        Vec2 perp(-rot.y(), rot.x());
        const Vec2& g = ch.grad_p[i];
        row.noalias() += Jee.topRows<2>().transpose() * g;
        row.noalias() += Jee.row(2).transpose() * (g.dot(perp));
    }
    out.gradient.row(H - 1) = row;
    return out;
}

TermGrad energy_grasp_surrogate(const RobotModel& model, const Trajectory& traj,
                                std::span<const Pose2> candidates, double beta, double w_ang) {
    if (candidates.empty()) throw dimension_error("grasp surrogate needs at least one candidate");
    if (!(beta > 0.0)) throw input_error("grasp softmin temperature must be positive");
    const int H = static_cast<int>(traj.rows());
    Config q_last = traj.row(H - 1);
    FkFrames f = fk_frames(model, q_last);

    std::vector<double> dist(candidates.size());
    std::vector<Vec2> dpos(candidates.size());
    std::vector<double> dang(candidates.size());
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        Vec2 dp = f.ee_position - candidates[j].position;
        double da = wrap_angle(f.ee_heading - candidates[j].heading);
        dist[j] = dp.squaredNorm() + w_ang * da * da;
        dpos[j] = 2.0 * dp;
        dang[j] = 2.0 * w_ang * da;
        dmin = std::min(dmin, dist[j]);
    }
    double denom = 0.0;
    std::vector<double> weight(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        weight[j] = std::exp(-beta * (dist[j] - dmin));
        denom += weight[j];
    }
    TermGrad out;
    out.value = dmin - std::log(denom) / beta;
    out.gradient = Mat::Zero(H, traj.cols());
    Eigen::Matrix3Xd Jee = jacobian_end_effector(model, q_last);
    Vec row = Vec::Zero(traj.cols());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        double wj = weight[j] / denom;
        row.noalias() += Jee.topRows<2>().transpose() * (wj * dpos[j]);
        row.noalias() += Jee.row(2).transpose() * (wj * dang[j]);
    }
    out.gradient.row(H - 1) = row;
    return out;
}

TermGrad task_energy(const RobotModel& model, const Trajectory& traj, const TaskEnergy& energy) {
    switch (energy.kind) {
        case TaskEnergy::Kind::goal_reach:
            return energy_goal_reach(model, traj, energy.goal_points);
        case TaskEnergy::Kind::place:
            return energy_place(model, traj, energy.object_points, energy.target_area_points,
                                energy.grasp_offset);
        case TaskEnergy::Kind::grasp_surrogate:
            return energy_grasp_surrogate(model, traj, energy.grasp_candidates, energy.beta,
                                          energy.w_ang);
    }
    throw input_error("unknown energy kind");
}

ObjectiveReport evaluate_objective(const RobotModel& model, const SceneSdf& sdf,
                                   const Trajectory& traj, const TaskEnergy& energy,
                                   const CostWeights& weights, double grad_clip, int threads) {
    weights.validate();
    if (traj.cols() != model.dof()) throw dimension_error("trajectory width != robot dof");

    ObjectiveReport rep;
    rep.gradient = Mat::Zero(traj.rows(), traj.cols());

    if (weights.energy_weight > 0.0) {
        TermGrad e = task_energy(model, traj, energy);
        rep.energy = e.value;
        rep.gradient.noalias() -= weights.energy_weight * e.gradient;
    }
    if (weights.lambda_collision > 0.0) {
        TermGrad c = cost_collision(model, sdf, traj, weights.eps_collision, threads);
        rep.c_collision = c.value;
        rep.gradient.noalias() -= weights.lambda_collision * c.gradient;
    }
    if (weights.lambda_smoothness > 0.0) {
        TermGrad c = cost_smoothness(traj);
        rep.c_smoothness = c.value;
        rep.gradient.noalias() -= weights.lambda_smoothness * c.gradient;
    }
    if (weights.lambda_limit > 0.0) {
        TermGrad c = cost_joint_limits(model, traj, weights.eps_limit);
        rep.c_limit = c.value;
        rep.gradient.noalias() -= weights.lambda_limit * c.gradient;
    }
    rep.total = -(weights.energy_weight * rep.energy + weights.lambda_collision * rep.c_collision +
                  weights.lambda_smoothness * rep.c_smoothness + weights.lambda_limit * rep.c_limit);

    if (!std::isfinite(rep.energy)) throw numeric_error("energy");
    if (!std::isfinite(rep.c_collision)) throw numeric_error("c_collision");
    if (!std::isfinite(rep.c_smoothness)) throw numeric_error("c_smoothness");
    if (!std::isfinite(rep.c_limit)) throw numeric_error("c_limit");
    if (!rep.gradient.allFinite()) throw numeric_error("gradient");

    rep.gradient = rep.gradient.cwiseMax(-grad_clip).cwiseMin(grad_clip);
    return rep;
}

}  // namespace diffplan
