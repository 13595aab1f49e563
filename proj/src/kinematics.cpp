#include "diffplan/kinematics.hpp"

#include <nlohmann/json.hpp>

namespace diffplan {

using njson = nlohmann::json;

int RobotModel::surface_point_count() const {
    int n = 0;
    for (const auto& part : surface_template) n += static_cast<int>(part.size());
    return n;
}

void RobotModel::validate() const {
    if (link_lengths.empty()) throw dimension_error("robot model needs at least one link");
    for (double l : link_lengths)
        if (!(l > 0.0)) throw dimension_error("link lengths must be positive");
    if (!(base_radius > 0.0)) throw dimension_error("base radius must be positive");
    const int d = dof();
    if (joint_lower.size() != d || joint_upper.size() != d)
        throw dimension_error("joint limit arrays must have length d");
    for (int i = 0; i < d; ++i)
        if (!(joint_lower[i] < joint_upper[i]))
            throw dimension_error("joint_lower must be strictly below joint_upper");
    if (surface_template.size() != static_cast<std::size_t>(1 + num_links()))
        throw dimension_error("surface_template needs one entry per body part");
}

RobotModel RobotModel::default_model() {
    RobotModel m;
    m.link_lengths = {0.4, 0.3, 0.2};
    m.base_radius = 0.25;
    const int d = m.dof();
    m.joint_lower = Vec::Constant(d, -1e9);
    m.joint_upper = Vec::Constant(d, 1e9);
    for (int j = 3; j < d; ++j) {
        m.joint_lower[j] = -2.9;
        m.joint_upper[j] = 2.9;
    }
    // 12 base-ring samples
    std::vector<Vec2> base_ring;
    for (int k = 0; k < 12; ++k) {
        double a = 2.0 * M_PI * k / 12.0;
        base_ring.emplace_back(m.base_radius * std::cos(a), m.base_radius * std::sin(a));
    }
    m.surface_template.push_back(base_ring);
    // 4 samples along each link axis
    for (double len : m.link_lengths) {
        std::vector<Vec2> pts;
        for (int k = 1; k <= 4; ++k) pts.emplace_back(len * 0.25 * k, 0.0);
        m.surface_template.push_back(pts);
    }
    m.gripper_template = {{0.00, 0.00},  {0.00, 0.07},  {0.00, -0.07}, {0.05, 0.07},
                          {0.05, -0.07}, {0.10, 0.07},  {0.10, -0.07}, {0.15, 0.07},
                          {0.15, -0.07}, {0.15, 0.00},  {0.07, 0.00},  {0.11, 0.035}};
    return m;
}

FkFrames fk_frames(const RobotModel& model, const Config& q) {
    if (q.size() != model.dof()) throw dimension_error("configuration length != robot dof");
    FkFrames f;
    f.base = Vec2(q[0], q[1]);
    f.base_yaw = q[2];
    const int n = model.num_links();
    f.joint_origin.resize(n);
    f.link_angle.resize(n);
    Vec2 origin = f.base;
    double angle = q[2];
    for (int j = 0; j < n; ++j) {
        angle += q[3 + j];
        f.joint_origin[j] = origin;
        f.link_angle[j] = angle;
        origin += model.link_lengths[j] * Vec2(std::cos(angle), std::sin(angle));
    }
    f.ee_position = origin;
    f.ee_heading = angle;
    return f;
}

Pose2 fk_end_effector(const RobotModel& model, const Config& q) {
    FkFrames f = fk_frames(model, q);
    return Pose2{f.ee_position, f.ee_heading};
}

std::vector<Vec2> fk_surface_points(const RobotModel& model, const Config& q) {
    FkFrames f = fk_frames(model, q);
    std::vector<Vec2> out;
    out.reserve(model.surface_point_count());
    {
        double c = std::cos(f.base_yaw), s = std::sin(f.base_yaw);
        for (const Vec2& p : model.surface_template[0])
            out.emplace_back(f.base.x() + c * p.x() - s * p.y(),
                             f.base.y() + s * p.x() + c * p.y());
    }
    for (int j = 0; j < model.num_links(); ++j) {
        double c = std::cos(f.link_angle[j]), s = std::sin(f.link_angle[j]);
        for (const Vec2& p : model.surface_template[1 + j])
            out.emplace_back(f.joint_origin[j].x() + c * p.x() - s * p.y(),
                             f.joint_origin[j].y() + s * p.x() + c * p.y());
    }
    return out;
}

std::vector<Vec2> fk_gripper_points(const RobotModel& model, const Config& q) {
    FkFrames f = fk_frames(model, q);
    std::vector<Vec2> out;
    out.reserve(model.gripper_template.size());
    double c = std::cos(f.ee_heading), s = std::sin(f.ee_heading);
    for (const Vec2& p : model.gripper_template)
        out.emplace_back(f.ee_position.x() + c * p.x() - s * p.y(),
                         f.ee_position.y() + s * p.x() + c * p.y());
    return out;
}

namespace {
inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

// Jacobian of a world point rigidly attached to body `body`:
//   body = 0       base disc (rotates about the base center with yaw only)
//   body = 1..n    link j = body-1 (affected by yaw and arm joints <= j)
//   body = n+1     end effector (affected by yaw and all arm joints)
Eigen::Matrix2Xd point_jacobian(const RobotModel& model, const FkFrames& f, const Vec2& world,
                                int body) {
    const int d = model.dof();
    Eigen::Matrix2Xd J = Eigen::Matrix2Xd::Zero(2, d);
    J(0, 0) = 1.0;
    J(1, 1) = 1.0;
    J.col(2) = perp(world - f.base);
    const int n = model.num_links();
    const int last_joint = (body == 0) ? -1 : std::min(body - 1, n - 1);
    for (int k = 0; k <= last_joint; ++k) J.col(3 + k) = perp(world - f.joint_origin[k]);
    if (body == n + 1)
        for (int k = 0; k < n; ++k) J.col(3 + k) = perp(world - f.joint_origin[k]);
    return J;
}
}  // namespace

PointJacobians jacobian_points(const RobotModel& model, const Config& q) {
    FkFrames f = fk_frames(model, q);
    PointJacobians out;
    std::vector<Vec2> surface = fk_surface_points(model, q);
    out.surface.reserve(surface.size());
    std::size_t idx = 0;
    for (std::size_t b = 0; b < model.surface_template.size(); ++b)
        for (std::size_t k = 0; k < model.surface_template[b].size(); ++k, ++idx)
            out.surface.push_back(point_jacobian(model, f, surface[idx], static_cast<int>(b)));
    std::vector<Vec2> gripper = fk_gripper_points(model, q);
    out.gripper.reserve(gripper.size());
    for (const Vec2& p : gripper)
        out.gripper.push_back(point_jacobian(model, f, p, model.num_links() + 1));
    return out;
}

Eigen::Matrix3Xd jacobian_end_effector(const RobotModel& model, const Config& q) {
    FkFrames f = fk_frames(model, q);
    const int d = model.dof();
    Eigen::Matrix3Xd J = Eigen::Matrix3Xd::Zero(3, d);
    J(0, 0) = 1.0;
    J(1, 1) = 1.0;
    Vec2 r = perp(f.ee_position - f.base);
    J(0, 2) = r.x();
    J(1, 2) = r.y();
    J(2, 2) = 1.0;
    for (int k = 0; k < model.num_links(); ++k) {
        Vec2 rk = perp(f.ee_position - f.joint_origin[k]);
        J(0, 3 + k) = rk.x();
        J(1, 3 + k) = rk.y();
        J(2, 3 + k) = 1.0;
    }
    return J;
}

Vec joint_violation_amount(const RobotModel& model, const Config& q, double margin) {
    if (margin < 0.0) throw dimension_error("joint limit margin must be >= 0");
    if (q.size() != model.dof()) throw dimension_error("configuration length != robot dof");
    Vec out = Vec::Zero(q.size());
    for (int j = 0; j < q.size(); ++j) {
        double lower = model.joint_lower[j] + margin;
        double upper = model.joint_upper[j] - margin;
        if (q[j] < lower)
            out[j] = lower - q[j];
        else if (q[j] > upper)
            out[j] = q[j] - upper;
    }
    return out;
}

namespace {
njson points_to_json(const std::vector<Vec2>& pts) {
    njson arr = njson::array();
    for (const Vec2& p : pts) arr.push_back({p.x(), p.y()});
    return arr;
}

std::vector<Vec2> points_from_json(const njson& arr) {
    std::vector<Vec2> out;
    for (const auto& p : arr) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return out;
}
}  // namespace

std::string robot_model_to_json(const RobotModel& model) {
    njson j;
    j["link_lengths"] = model.link_lengths;
    j["base_radius"] = model.base_radius;
    j["joint_lower"] = std::vector<double>(model.joint_lower.begin(), model.joint_lower.end());
    j["joint_upper"] = std::vector<double>(model.joint_upper.begin(), model.joint_upper.end());
    njson st = njson::array();
    for (const auto& part : model.surface_template) st.push_back(points_to_json(part));
    j["surface_template"] = st;
    j["gripper_template"] = points_to_json(model.gripper_template);
    return j.dump();
}

RobotModel robot_model_from_json(const std::string& text) {
    njson j;
    try {
        j = njson::parse(text);
    } catch (const std::exception& e) {
        throw input_error(std::string("robot model parse failure: ") + e.what());
    }
    RobotModel m;
    m.link_lengths = j.at("link_lengths").get<std::vector<double>>();
    m.base_radius = j.at("base_radius").get<double>();
    auto lower = j.at("joint_lower").get<std::vector<double>>();
    auto upper = j.at("joint_upper").get<std::vector<double>>();
    m.joint_lower = Eigen::Map<Vec>(lower.data(), lower.size());
    m.joint_upper = Eigen::Map<Vec>(upper.data(), upper.size());
    for (const auto& part : j.at("surface_template")) m.surface_template.push_back(points_from_json(part));
    m.gripper_template = points_from_json(j.at("gripper_template"));
    m.validate();
    return m;
}

}  // namespace diffplan
