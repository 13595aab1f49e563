#include "diffplan/scene.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace diffplan {

using njson = nlohmann::json;

void OccupancyGrid::validate() const {
    if (!(resolution > 0.0)) throw dimension_error("grid resolution must be positive");
    if (width <= 0 || height <= 0) throw dimension_error("grid must have positive extent");
    if (cells.size() != static_cast<std::size_t>(width) * height)
        throw dimension_error("grid cell count != width * height");
}

namespace {

constexpr double kInf = 1e18;

// 1D squared distance transform, lower envelope of parabolas.
void dt_1d(const std::vector<double>& f, int n, std::vector<double>& d, std::vector<int>& v,
           std::vector<double>& z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

// Exact squared Euclidean cell distances to the nearest source cell.
std::vector<double> edt_squared(const OccupancyGrid& grid, bool sources_are_occupied, int threads) {
    const int w = grid.width, h = grid.height;
    std::vector<double> field(static_cast<std::size_t>(w) * h);
    for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix)
            field[static_cast<std::size_t>(iy) * w + ix] =
                (grid.occupied(ix, iy) == sources_are_occupied) ? 0.0 : kInf;

    // column pass (along y), then row pass (along x); passes are independent
    // per column/row so any thread count yields identical output
#pragma omp parallel num_threads(threads)
    {
        std::vector<double> f(std::max(w, h)), d(std::max(w, h)), z(std::max(w, h) + 1);
        std::vector<int> v(std::max(w, h));
#pragma omp for
        for (int ix = 0; ix < w; ++ix) {
            for (int iy = 0; iy < h; ++iy) f[iy] = field[static_cast<std::size_t>(iy) * w + ix];
            dt_1d(f, h, d, v, z);
            for (int iy = 0; iy < h; ++iy) field[static_cast<std::size_t>(iy) * w + ix] = d[iy];
        }
#pragma omp for
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) f[ix] = field[static_cast<std::size_t>(iy) * w + ix];
            dt_1d(f, w, d, v, z);
            for (int ix = 0; ix < w; ++ix) field[static_cast<std::size_t>(iy) * w + ix] = d[ix];
        }
    }
    return field;
}

double sqrt_or_sentinel(double squared_cells, double resolution) {
    if (squared_cells >= kInf * 0.5) return kFarSentinel;
    double m = std::sqrt(squared_cells) * resolution;
    return std::min(m, kFarSentinel);
}

}  // namespace

SceneSdf build_sdf(const OccupancyGrid& grid, int threads) {
    grid.validate();
    threads = resolve_threads(threads);
    std::vector<double> to_occupied = edt_squared(grid, true, threads);
    std::vector<double> to_free = edt_squared(grid, false, threads);
    SceneSdf sdf;
    sdf.grid = grid;
    sdf.distances.resize(to_occupied.size());
    for (std::size_t i = 0; i < to_occupied.size(); ++i) {
        double outside = sqrt_or_sentinel(to_occupied[i], grid.resolution);
        double inside = sqrt_or_sentinel(to_free[i], grid.resolution);
        sdf.distances[i] = outside - inside;
    }
    return sdf;
}

SdfQuery query_sdf(const SceneSdf& sdf, const Vec2& p) {
    const OccupancyGrid& g = sdf.grid;
    const int w = g.width, h = g.height;
    double u = (p.x() - g.origin.x()) / g.resolution - 0.5;
    double v = (p.y() - g.origin.y()) / g.resolution - 0.5;
    const bool outside = u < 0.0 || u > w - 1 || v < 0.0 || v > h - 1;
    double cu = std::clamp(u, 0.0, double(w - 1));
    double cv = std::clamp(v, 0.0, double(h - 1));

    // patch selection; queries exactly on a node take the lower-index patch
    auto patch_index = [](double c, int n) {
        double fl = std::floor(c);
        int i = static_cast<int>(fl);
        if (c == fl && i > 0) --i;
        return std::min(std::max(i, 0), std::max(n - 2, 0));
    };
    int i0 = patch_index(cu, w);
    int j0 = patch_index(cv, h);
    int i1 = std::min(i0 + 1, w - 1);
    int j1 = std::min(j0 + 1, h - 1);
    double fx = cu - i0;
    double fy = cv - j0;

    double d00 = sdf.at(i0, j0), d10 = sdf.at(i1, j0);
    double d01 = sdf.at(i0, j1), d11 = sdf.at(i1, j1);

    SdfQuery q;
    q.value = (1 - fx) * (1 - fy) * d00 + fx * (1 - fy) * d10 + (1 - fx) * fy * d01 + fx * fy * d11;
    if (!outside) {
        q.gradient.x() = ((1 - fy) * (d10 - d00) + fy * (d11 - d01)) / g.resolution;
        q.gradient.y() = ((1 - fx) * (d01 - d00) + fx * (d11 - d10)) / g.resolution;
    }
    return q;
}

std::string task_type_name(TaskType t) {
    switch (t) {
        case TaskType::goal_reach: return "goal_reach";
        case TaskType::place: return "place";
        case TaskType::grasp: return "grasp";
    }
    throw input_error("unknown task type");
}

TaskType task_type_from_name(const std::string& name) {
    if (name == "goal_reach") return TaskType::goal_reach;
    if (name == "place") return TaskType::place;
    if (name == "grasp") return TaskType::grasp;
    throw input_error("unknown task type '" + name + "'");
}

namespace {

std::vector<Vec2> boundary_midpoints(const SceneSdf& sdf) {
    const OccupancyGrid& g = sdf.grid;
    std::vector<Vec2> out;
    for (int iy = 0; iy < g.height; ++iy) {
        for (int ix = 0; ix < g.width; ++ix) {
            bool occ = g.occupied(ix, iy);
            if (ix + 1 < g.width && occ != g.occupied(ix + 1, iy))
                out.push_back(g.origin + g.resolution * Vec2(ix + 1.0, iy + 0.5));
            if (iy + 1 < g.height && occ != g.occupied(ix, iy + 1))
                out.push_back(g.origin + g.resolution * Vec2(ix + 0.5, iy + 1.0));
        }
    }
    return out;
}

std::vector<Vec2> polygon_edge_samples(const std::vector<Vec2>& poly, int count) {
    std::vector<Vec2> out;
    if (poly.empty()) return out;
    double perimeter = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i)
        perimeter += (poly[(i + 1) % poly.size()] - poly[i]).norm();
    if (perimeter <= 0.0) {
        out.assign(count, poly[0]);
        return out;
    }
    for (int k = 0; k < count; ++k) {
        double s = perimeter * k / count;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
            double len = (b - a).norm();
            if (s <= len || i + 1 == poly.size()) {
                double f = (len > 0.0) ? std::min(s / len, 1.0) : 0.0;
                out.push_back(a + f * (b - a));
                break;
            }
            s -= len;
        }
    }
    return out;
}

}  // namespace

ScenePoints sample_scene_points(const SceneSdf& sdf, const RobotModel& model, const TaskSpec& task,
                                std::uint64_t seed) {
    Rng rng(seed);
    ScenePoints out;
    std::vector<Vec2> world;
    std::vector<PointClass> classes;
    world.reserve(kScenePointCount + kTaskPointCount);

    std::vector<Vec2> boundary = boundary_midpoints(sdf);
    if (boundary.empty()) {
        out.degenerate = true;
        world.assign(kScenePointCount, Vec2(kFarSentinel, kFarSentinel));
    } else {
        for (int k = 0; k < kScenePointCount; ++k)
            world.push_back(boundary[rng.uniform_index(boundary.size())]);
    }
    classes.assign(world.size(), PointClass::scene);

    std::vector<Vec2> task_pts;
    PointClass task_class = PointClass::goal;
    switch (task.task_type) {
        case TaskType::goal_reach: {
            if (!task.goal_pose) throw input_error("goal_reach task missing goal_pose");
            // oriented glyph: the gripper cloud plus a heading ray and a
            // one-sided lateral bar, so the pose (including its sign) is
            // unambiguous in the conditioning cloud
            const Pose2& goal = *task.goal_pose;
            std::vector<Vec2> tpl;
            for (const Vec2& p : model.gripper_template) tpl.push_back(goal.apply(p));
            for (int k = 0; k < 24; ++k)
                tpl.push_back(goal.apply(Vec2(0.02 + 0.38 * k / 23.0, 0.0)));
            for (int k = 0; k < 16; ++k)
                tpl.push_back(goal.apply(Vec2(0.20 * k / 15.0, 0.12)));
            for (int k = 0; k < kTaskPointCount; ++k) task_pts.push_back(tpl[k % tpl.size()]);
            task_class = PointClass::goal;
            break;
        }
        case TaskType::place: {
            if (task.target_area_polygon.empty()) throw input_error("place task missing target area");
            task_pts = polygon_edge_samples(task.target_area_polygon, kTaskPointCount);
            task_class = PointClass::target_area;
            break;
        }
        case TaskType::grasp: {
            if (task.grasp_candidates.empty()) throw input_error("grasp task missing candidates");
            std::vector<Vec2> tpl;
            for (const Pose2& cand : task.grasp_candidates)
                for (const Vec2& p : model.gripper_template) tpl.push_back(cand.apply(p));
            for (int k = 0; k < kTaskPointCount; ++k) task_pts.push_back(tpl[k % tpl.size()]);
            task_class = PointClass::target_object;
            break;
        }
    }
    for (const Vec2& p : task_pts) {
        world.push_back(p);
        classes.push_back(task_class);
    }

    // express everything in the initial base frame
    Pose2 base{Vec2(task.start[0], task.start[1]), task.start[2]};
    Pose2 inv = base.inverse();
    out.points.resize(2, static_cast<Eigen::Index>(world.size()));
    for (std::size_t i = 0; i < world.size(); ++i) out.points.col(static_cast<Eigen::Index>(i)) = inv.apply(world[i]);
    out.classes = std::move(classes);
    return out;
}

void GeneratorSpec::validate() const {
    if (!(room_size > 1.0) || !(resolution > 0.0)) throw input_error("bad generator bounds");
    if (min_obstacles < 0 || max_obstacles < min_obstacles) throw input_error("bad obstacle counts");
    if (!(min_obstacle_size > 0.0) || max_obstacle_size < min_obstacle_size)
        throw input_error("bad obstacle sizes");
    if (max_attempts < 1) throw input_error("max_attempts must be >= 1");
}

bool bfs_reachable(const SceneSdf& sdf, const Vec2& from, const Vec2& to, double clearance,
                   double goal_tolerance) {
    const OccupancyGrid& g = sdf.grid;
    auto cell_of = [&](const Vec2& p) {
        int ix = static_cast<int>(std::floor((p.x() - g.origin.x()) / g.resolution));
        int iy = static_cast<int>(std::floor((p.y() - g.origin.y()) / g.resolution));
        return std::pair<int, int>(ix, iy);
    };
    auto [sx, sy] = cell_of(from);
    if (!g.in_bounds(sx, sy) || sdf.at(sx, sy) <= clearance) return false;

    std::vector<std::uint8_t> seen(static_cast<std::size_t>(g.width) * g.height, 0);
    std::deque<std::pair<int, int>> queue;
    queue.emplace_back(sx, sy);
    seen[static_cast<std::size_t>(sy) * g.width + sx] = 1;
    const double tol2 = goal_tolerance * goal_tolerance;
    while (!queue.empty()) {
        auto [cx, cy] = queue.front();
        queue.pop_front();
        if ((g.cell_center(cx, cy) - to).squaredNorm() <= tol2) return true;
        const int dx[4] = {1, -1, 0, 0};
        const int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            int nx = cx + dx[k], ny = cy + dy[k];
            if (!g.in_bounds(nx, ny)) continue;
            std::size_t idx = static_cast<std::size_t>(ny) * g.width + nx;
            if (seen[idx] || sdf.at(nx, ny) <= clearance) continue;
            seen[idx] = 1;
            queue.emplace_back(nx, ny);
        }
    }
    return false;
}

namespace {

std::optional<Config> sample_start_config(const SceneSdf& sdf, const RobotModel& model,
                                          const GeneratorSpec& spec, Rng& rng) {
    const double margin = 0.45;
    for (int tries = 0; tries < 200; ++tries) {
        Vec2 pos(rng.uniform(margin, spec.room_size - margin),
                 rng.uniform(margin, spec.room_size - margin));
        if (query_sdf(sdf, pos).value <= model.base_radius + 0.05) continue;
        Config q(model.dof());
        q[0] = pos.x();
        q[1] = pos.y();
        q[2] = rng.uniform(-M_PI, M_PI);
        for (int j = 3; j < model.dof(); ++j) q[j] = rng.uniform(-1.6, 1.6);
        bool clear = true;
        for (const Vec2& p : fk_surface_points(model, q))
            if (query_sdf(sdf, p).value <= 0.02) {
                clear = false;
                break;
            }
        if (clear) return q;
    }
    return std::nullopt;
}

std::optional<TaskSpec> sample_task_payload(const SceneSdf& sdf, const RobotModel& model,
                                            const GeneratorSpec& spec, const Config& start, Rng& rng) {
    const double margin = 0.45;
    Vec2 start_base(start[0], start[1]);
    for (int tries = 0; tries < 200; ++tries) {
        Vec2 gpos(rng.uniform(margin, spec.room_size - margin),
                  rng.uniform(margin, spec.room_size - margin));
        if (query_sdf(sdf, gpos).value <= spec.goal_clearance) continue;
        if ((gpos - start_base).norm() < spec.min_start_goal_dist) continue;
        if (!bfs_reachable(sdf, start_base, gpos, model.base_radius + 0.02, spec.reach_radius))
            continue;
        TaskSpec task;
        task.start = start;
        task.task_type = spec.task_type;
        switch (spec.task_type) {
            case TaskType::goal_reach:
                task.goal_pose = Pose2{gpos, rng.uniform(-M_PI, M_PI)};
                break;
            case TaskType::place: {
                const double half = 0.2;
                if (query_sdf(sdf, gpos).value <= half + 0.1) continue;
                task.target_area_polygon = {gpos + Vec2(-half, -half), gpos + Vec2(half, -half),
                                            gpos + Vec2(half, half), gpos + Vec2(-half, half)};
                break;
            }
            case TaskType::grasp: {
                double theta0 = rng.uniform(-M_PI, M_PI);
                for (int k = 0; k < 3; ++k)
                    task.grasp_candidates.push_back(Pose2{gpos, theta0 + k * 2.0 * M_PI / 3.0});
                break;
            }
        }
        return task;
    }
    return std::nullopt;
}

OccupancyGrid random_layout(const GeneratorSpec& spec, Rng& rng, int* obstacle_count) {
    OccupancyGrid grid;
    grid.resolution = spec.resolution;
    grid.origin = Vec2(0.0, 0.0);
    grid.width = static_cast<int>(std::lround(spec.room_size / spec.resolution));
    grid.height = grid.width;
    grid.cells.assign(static_cast<std::size_t>(grid.width) * grid.height, 0);

    int n_obstacles = spec.min_obstacles +
                      static_cast<int>(rng.uniform_index(spec.max_obstacles - spec.min_obstacles + 1));
    if (obstacle_count) *obstacle_count = n_obstacles;
    const double margin = 0.8;
    for (int o = 0; o < n_obstacles; ++o) {
        Vec2 c(rng.uniform(margin, spec.room_size - margin),
               rng.uniform(margin, spec.room_size - margin));
        bool disc = rng.uniform() < spec.disc_fraction;
        double sx = rng.uniform(spec.min_obstacle_size, spec.max_obstacle_size);
        double sy = disc ? sx : rng.uniform(spec.min_obstacle_size, spec.max_obstacle_size);
        for (int iy = 0; iy < grid.height; ++iy) {
            for (int ix = 0; ix < grid.width; ++ix) {
                Vec2 p = grid.cell_center(ix, iy);
                bool inside = disc ? (p - c).norm() <= sx * 0.5
                                   : (std::abs(p.x() - c.x()) <= sx * 0.5 &&
                                      std::abs(p.y() - c.y()) <= sy * 0.5);
                if (inside) grid.set(ix, iy, true);
            }
        }
    }
    return grid;
}

}  // namespace

GeneratedScene generate_scene(std::uint64_t seed, const GeneratorSpec& spec, const RobotModel& model) {
    spec.validate();
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
        Rng rng(sub_seed(seed, static_cast<std::uint64_t>(attempt)));
        int obstacle_count = 0;
        OccupancyGrid grid = random_layout(spec, rng, &obstacle_count);
        SceneSdf sdf = build_sdf(grid);
        auto start = sample_start_config(sdf, model, spec, rng);
        if (!start) continue;
        auto task = sample_task_payload(sdf, model, spec, *start, rng);
        if (!task) continue;
        return GeneratedScene{std::move(grid), std::move(*task), obstacle_count};
    }
    throw generation_error("no connected scene after " + std::to_string(spec.max_attempts) +
                           " attempts");
}

TaskSpec sample_task(const SceneSdf& sdf, const RobotModel& model, const GeneratorSpec& spec,
                     std::uint64_t seed) {
    Rng rng(seed);
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
        auto start = sample_start_config(sdf, model, spec, rng);
        if (!start) continue;
        auto task = sample_task_payload(sdf, model, spec, *start, rng);
        if (task) return *task;
    }
    throw generation_error("no feasible task in scene after " + std::to_string(spec.max_attempts) +
                           " attempts");
}

namespace {

njson pose_to_json(const Pose2& p) {
    return njson{{"position", {p.position.x(), p.position.y()}}, {"heading", p.heading}};
}

Pose2 pose_from_json(const njson& j) {
    Pose2 p;
    p.position = Vec2(j.at("position").at(0).get<double>(), j.at("position").at(1).get<double>());
    p.heading = j.at("heading").get<double>();
    return p;
}

}  // namespace

std::string scene_to_json(const OccupancyGrid& grid, const TaskSpec& task) {
    grid.validate();
    njson j;
    j["schema_version"] = 1;
    j["resolution"] = grid.resolution;
    j["origin"] = {grid.origin.x(), grid.origin.y()};
    j["width"] = grid.width;
    j["height"] = grid.height;
    // row-major bit array, LSB-first within each byte
    std::vector<std::uint8_t> packed((grid.cells.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < grid.cells.size(); ++i)
        if (grid.cells[i]) packed[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    j["occupancy"] = base64_encode(packed);

    njson ann;
    ann["start"] = std::vector<double>(task.start.begin(), task.start.end());
    ann["task_type"] = task_type_name(task.task_type);
    if (task.goal_pose) ann["goal_pose"] = pose_to_json(*task.goal_pose);
    if (!task.target_area_polygon.empty()) {
        njson poly = njson::array();
        for (const Vec2& p : task.target_area_polygon) poly.push_back({p.x(), p.y()});
        ann["target_area_polygon"] = poly;
    }
    if (!task.grasp_candidates.empty()) {
        njson cands = njson::array();
        for (const Pose2& p : task.grasp_candidates) cands.push_back(pose_to_json(p));
        ann["grasp_candidates"] = cands;
    }
    j["annotations"] = ann;
    return j.dump();
}

GeneratedScene scene_from_json(const std::string& text) {
    njson j;
    try {
        j = njson::parse(text);
    } catch (const std::exception& e) {
        throw input_error(std::string("scene parse failure: ") + e.what());
    }
    GeneratedScene out;
    OccupancyGrid& g = out.grid;
    g.resolution = j.at("resolution").get<double>();
    g.origin = Vec2(j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>());
    g.width = j.at("width").get<int>();
    g.height = j.at("height").get<int>();
    std::vector<std::uint8_t> packed = base64_decode(j.at("occupancy").get<std::string>());
    std::size_t n = static_cast<std::size_t>(g.width) * g.height;
    if (packed.size() < (n + 7) / 8) throw input_error("occupancy payload too short");
    g.cells.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.cells[i] = (packed[i >> 3] >> (i & 7)) & 1u;
    g.validate();

    const njson& ann = j.at("annotations");
    auto start = ann.at("start").get<std::vector<double>>();
    out.task.start = Eigen::Map<Vec>(start.data(), start.size());
    out.task.task_type = task_type_from_name(ann.at("task_type").get<std::string>());
    if (ann.contains("goal_pose")) out.task.goal_pose = pose_from_json(ann.at("goal_pose"));
    if (ann.contains("target_area_polygon"))
        for (const auto& p : ann.at("target_area_polygon"))
            out.task.target_area_polygon.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    if (ann.contains("grasp_candidates"))
        for (const auto& p : ann.at("grasp_candidates"))
            out.task.grasp_candidates.push_back(pose_from_json(p));
    return out;
}

void save_scene(const std::string& path, const OccupancyGrid& grid, const TaskSpec& task) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot write scene file: " + path);
    f << scene_to_json(grid, task) << "\n";
}

GeneratedScene load_scene(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("missing scene file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return scene_from_json(text);
}

}  // namespace diffplan
