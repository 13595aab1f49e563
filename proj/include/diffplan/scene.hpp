#pragma once

#include <optional>
#include <string>
#include <vector>

#include "diffplan/kinematics.hpp"

namespace diffplan {

/// Free-space distance reported when a scene has no obstacle (or no free cell).
constexpr double kFarSentinel = 1e6;

struct OccupancyGrid {
    double resolution = 0.05;       // meters per cell
    Vec2 origin{0.0, 0.0};          // world position of the corner of cell (0, 0)
    int width = 0, height = 0;      // cell counts (x, y)
    std::vector<std::uint8_t> cells;  // row-major, 1 = occupied

    bool occupied(int ix, int iy) const { return cells[static_cast<std::size_t>(iy) * width + ix] != 0; }
    void set(int ix, int iy, bool v) { cells[static_cast<std::size_t>(iy) * width + ix] = v ? 1 : 0; }
    Vec2 cell_center(int ix, int iy) const {
        return origin + resolution * Vec2(ix + 0.5, iy + 0.5);
    }
    bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < width && iy >= 0 && iy < height; }
    void validate() const;
};

/// Signed distances at cell centers (meters, negative inside obstacles) with
/// bilinear interpolated queries. Immutable after build; queries are pure.
struct SceneSdf {
    OccupancyGrid grid;
    std::vector<double> distances;  // row-major, one per cell

    double at(int ix, int iy) const { return distances[static_cast<std::size_t>(iy) * grid.width + ix]; }
};

struct SdfQuery {
    double value = 0.0;
    Vec2 gradient{0.0, 0.0};
};

/// Exact Euclidean distance transform of the grid (outside minus inside),
/// converted to meters. All-free and all-occupied grids produce the far
/// sentinel with the appropriate sign.
SceneSdf build_sdf(const OccupancyGrid& grid, int threads = 1);

/// Bilinear interpolation of cell-center distances with the exact gradient of
/// the interpolant. Out-of-bounds queries clamp to the edge value with zero
/// gradient in the clamped direction. At patch boundaries the patch with the
/// lower index is used.
SdfQuery query_sdf(const SceneSdf& sdf, const Vec2& p);

enum class PointClass : std::uint8_t { scene = 0, target_object = 1, target_area = 2, goal = 3 };

struct ScenePoints {
    Eigen::Matrix2Xd points;             // columns are points
    std::vector<PointClass> classes;     // one label per column
    bool degenerate = false;             // no obstacle boundary existed; padded with far points
};

enum class TaskType : std::uint8_t { goal_reach = 0, place = 1, grasp = 2 };

std::string task_type_name(TaskType t);
TaskType task_type_from_name(const std::string& name);

/// Task definition stored with a scene: start configuration plus the
/// task-type specific goal payload.
struct TaskSpec {
    Config start;
    TaskType task_type = TaskType::goal_reach;
    std::optional<Pose2> goal_pose;                 // goal_reach
    std::vector<Vec2> target_area_polygon;          // place
    std::vector<Pose2> grasp_candidates;            // grasp
};

/// Deterministic conditioning cloud: 512 obstacle-boundary points plus 64
/// task points, expressed in the frame of the start configuration's base pose.
ScenePoints sample_scene_points(const SceneSdf& sdf, const RobotModel& model, const TaskSpec& task,
                                std::uint64_t seed);

constexpr int kScenePointCount = 512;
constexpr int kTaskPointCount = 64;

struct GeneratorSpec {
    double room_size = 6.0;       // meters, square room
    double resolution = 0.05;     // meters per cell
    int min_obstacles = 3;
    int max_obstacles = 8;
    double min_obstacle_size = 0.3;   // meters
    double max_obstacle_size = 1.0;   // meters
    double disc_fraction = 0.4;       // fraction of obstacles that are discs
    double goal_clearance = 0.12;     // required free distance at the goal position
    double reach_radius = 0.75;       // base must connect to within this range of the goal
    double min_start_goal_dist = 1.2; // meters between start base and goal position
    int max_attempts = 100;
    TaskType task_type = TaskType::goal_reach;

    void validate() const;
};

struct GeneratedScene {
    OccupancyGrid grid;
    TaskSpec task;
    int obstacle_count = 0;  // as drawn by the generator; 0 for loaded scenes
};

/// Procedural room with 3-8 rectangular/circular obstacles and a BFS-validated
/// reachable task annotation. Pure function of (seed, spec); throws
/// generation_error after max_attempts rejected layouts.
GeneratedScene generate_scene(std::uint64_t seed, const GeneratorSpec& spec, const RobotModel& model);

/// Sample a fresh task (start + goal payload) inside an existing scene.
TaskSpec sample_task(const SceneSdf& sdf, const RobotModel& model, const GeneratorSpec& spec,
                     std::uint64_t seed);

/// Grid cells with clearance above the robot base radius, 4-connected BFS.
bool bfs_reachable(const SceneSdf& sdf, const Vec2& from, const Vec2& to, double clearance,
                   double goal_tolerance);

std::string scene_to_json(const OccupancyGrid& grid, const TaskSpec& task);
GeneratedScene scene_from_json(const std::string& text);

void save_scene(const std::string& path, const OccupancyGrid& grid, const TaskSpec& task);
GeneratedScene load_scene(const std::string& path);

}  // namespace diffplan
