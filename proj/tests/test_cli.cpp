#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "diffplan/diffusion.hpp"

// End-to-end checks of the installed command-line binary (path supplied via
// the DIFFPLAN_CLI environment variable by the build).

namespace fs = std::filesystem;
using njson = nlohmann::json;

namespace {

std::string cli_path() {
    const char* env = std::getenv("DIFFPLAN_CLI");
    REQUIRE_MESSAGE(env != nullptr, "DIFFPLAN_CLI must point at the built binary");
    return env;
}

int run_cli(const std::string& args) {
    std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string file_bytes(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE_MESSAGE(f, ("missing file " + path.string()).c_str());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// one tiny dataset + checkpoint shared by the pipeline-dependent cases
struct CliPipeline {
    fs::path root = fresh_dir("diffplan_cli_pipeline");
    fs::path data = root / "data";
    fs::path ckpt = root / "model.ckpt";

    CliPipeline() {
        REQUIRE(run_cli("gen-data --scenes 2 --tasks-per-scene 2 --seed 501 --threads 2 --out-dir " +
                        data.string() + " --set expert.descent_steps=150") == 0);
        REQUIRE(run_cli("train --data " + data.string() + " --out " + ckpt.string() +
                        " --epochs 2 --batch-size 4 --threads 2 --seed 1") == 0);
    }
};

CliPipeline& pipeline() {
    static CliPipeline p;
    return p;
}

}  // namespace

TEST_CASE("cli: gen-scenes is deterministic and counts match") {
    fs::path dir_a = fresh_dir("diffplan_cli_scenes_a");
    fs::path dir_b = fresh_dir("diffplan_cli_scenes_b");
    REQUIRE(run_cli("gen-scenes --count 3 --seed 7 --out-dir " + dir_a.string()) == 0);
    REQUIRE(run_cli("gen-scenes --count 3 --seed 7 --out-dir " + dir_b.string()) == 0);

    std::vector<fs::path> files_a;
    for (const auto& e : fs::directory_iterator(dir_a)) files_a.push_back(e.path());
    CHECK(files_a.size() == 3);
    for (const auto& f : files_a) CHECK(file_bytes(f) == file_bytes(dir_b / f.filename()));
}

TEST_CASE("cli: scene files round trip through load and save byte-identically") {
    fs::path dir = fresh_dir("diffplan_cli_roundtrip");
    REQUIRE(run_cli("gen-scenes --count 2 --seed 11 --out-dir " + dir.string()) == 0);
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string original = file_bytes(e.path());
        diffplan::GeneratedScene scene = diffplan::load_scene(e.path().string());
        fs::path copy = e.path();
        copy += ".copy";
        diffplan::save_scene(copy.string(), scene.grid, scene.task);
        CHECK(file_bytes(copy) == original);
    }
}

TEST_CASE("cli: blocked generator exits with the generation-failure code") {
    fs::path dir = fresh_dir("diffplan_cli_blocked");
    int code = run_cli("gen-scenes --count 1 --seed 1 --out-dir " + dir.string() +
                       " --set generator.min_obstacle_size=8 --set generator.max_obstacle_size=9" +
                       " --set generator.max_attempts=5");
    CHECK(code == 2);
}

TEST_CASE("cli: unknown override key exits with the malformed-input code") {
    fs::path dir = fresh_dir("diffplan_cli_badkey");
    CHECK(run_cli("gen-scenes --count 1 --out-dir " + dir.string() + " --set nosuch.key=1") == 5);
}

TEST_CASE("cli: missing artifacts exit with code 3") {
    CHECK(run_cli("plan --checkpoint /nonexistent.ckpt --scene /nonexistent.json") == 3);
    CHECK(run_cli("eval --checkpoint /nonexistent.ckpt --scene-dir /nonexistent --out /tmp/x.csv") ==
          3);
}

TEST_CASE("cli: plan is deterministic and respects the config file") {
    CliPipeline& p = pipeline();
    fs::path scene;
    for (const auto& e : fs::directory_iterator(p.data / "scenes")) scene = e.path();
    REQUIRE(!scene.empty());

    fs::path out_a = p.root / "traj_a.json";
    fs::path out_b = p.root / "traj_b.json";
    std::string base = "plan --checkpoint " + p.ckpt.string() + " --scene " + scene.string() +
                       " --seed 9 --out ";
    REQUIRE(run_cli(base + out_a.string()) == 0);
    REQUIRE(run_cli(base + out_b.string()) == 0);
    CHECK(file_bytes(out_a) == file_bytes(out_b));

    // same parameters through a config file give the same trajectory
    njson cfg{{"checkpoint", p.ckpt.string()},
              {"scene_file", scene.string()},
              {"seed", 9},
              {"K", 10},
              {"guidance_enabled", true}};
    fs::path cfg_path = p.root / "plan.json";
    std::ofstream(cfg_path) << cfg.dump();
    fs::path out_c = p.root / "traj_c.json";
    REQUIRE(run_cli("plan --config " + cfg_path.string() + " --out " + out_c.string()) == 0);
    CHECK(file_bytes(out_c) == file_bytes(out_a));

    // unknown config keys are rejected
    cfg["surprise"] = 1;
    std::ofstream(cfg_path) << cfg.dump();
    CHECK(run_cli("plan --config " + cfg_path.string() + " --out " + out_c.string()) == 5);
}

TEST_CASE("cli: checkpoint dof mismatch exits with code 4") {
    CliPipeline& p = pipeline();
    fs::path scene;
    for (const auto& e : fs::directory_iterator(p.data / "scenes")) scene = e.path();

    // a robot with two links has dof 5, the checkpoint was trained with 6
    diffplan::RobotModel two_link = diffplan::RobotModel::default_model();
    two_link.link_lengths = {0.4, 0.3};
    two_link.joint_lower = diffplan::Vec::Constant(5, -2.9);
    two_link.joint_upper = diffplan::Vec::Constant(5, 2.9);
    two_link.joint_lower.head(3).setConstant(-1e9);
    two_link.joint_upper.head(3).setConstant(1e9);
    two_link.surface_template.pop_back();
    fs::path robot = p.root / "two_link.json";
    std::ofstream(robot) << diffplan::robot_model_to_json(two_link);

    CHECK(run_cli("--robot " + robot.string() + " plan --checkpoint " + p.ckpt.string() +
                  " --scene " + scene.string() + " --out " + (p.root / "t.json").string()) == 4);
}

TEST_CASE("cli: eval and ablate emit deterministic artifacts") {
    CliPipeline& p = pipeline();
    fs::path csv_a = p.root / "eval_a.csv";
    fs::path csv_b = p.root / "eval_b.csv";
    std::string base = "eval --checkpoint " + p.ckpt.string() + " --scene-dir " +
                       (p.data / "scenes").string() + " --planner unguided --seeds 0 --threads 2 --out ";
    REQUIRE(run_cli(base + csv_a.string()) == 0);
    REQUIRE(run_cli(base + csv_b.string()) == 0);
    CHECK(file_bytes(csv_a) == file_bytes(csv_b));
    CHECK(file_bytes(csv_a).rfind("task_id,planner,seed,success,", 0) == 0);

    fs::path ab = p.root / "ablation";
    REQUIRE(run_cli("ablate --checkpoint " + p.ckpt.string() + " --scene-dir " +
                    (p.data / "scenes").string() + " --seeds 0 --threads 2 --out-dir " +
                    ab.string()) == 0);
    CHECK(fs::exists(ab / "comparison.csv"));
    CHECK(fs::exists(ab / "success_rate.svg"));
}

TEST_CASE("cli: plot emits figures and flags malformed input") {
    CliPipeline& p = pipeline();
    fs::path plots = p.root / "plots";

    // empty benchmark CSV still produces a valid figure with a no-data note
    fs::path empty_csv = p.root / "empty.csv";
    std::ofstream(empty_csv)
        << "task_id,planner,seed,success,pos_error,ang_error,collision_any,max_depth,"
           "joint_violation_rate,sparc_config,sparc_ee,solve_time_s\n";
    REQUIRE(run_cli("plot --csv " + empty_csv.string() + " --out " + plots.string()) == 0);
    std::string svg = file_bytes(plots / "success_rate.svg");
    CHECK(svg.find("no data") != std::string::npos);
    CHECK(svg.find("<svg") != std::string::npos);

    // deterministic bytes
    fs::path plots2 = p.root / "plots2";
    REQUIRE(run_cli("plot --csv " + empty_csv.string() + " --out " + plots2.string()) == 0);
    CHECK(file_bytes(plots2 / "success_rate.svg") == svg);

    fs::path bad_csv = p.root / "bad.csv";
    std::ofstream(bad_csv) << "definitely,not,a,known,header\n1,2,3,4,5\n";
    CHECK(run_cli("plot --csv " + bad_csv.string() + " --out " + plots.string()) == 5);
}

TEST_CASE("cli: overlay endpoint coincides with the goal marker for an expert trajectory") {
    CliPipeline& p = pipeline();
    std::vector<diffplan::DatasetRecord> records =
        diffplan::read_dataset_jsonl((p.data / "dataset.jsonl").string());
    REQUIRE(!records.empty());
    const diffplan::DatasetRecord& rec = records.front();

    // write the expert trajectory in the planner output format
    njson rows = njson::array();
    for (Eigen::Index h = 0; h < rec.trajectory.rows(); ++h) {
        njson row = njson::array();
        for (Eigen::Index c = 0; c < rec.trajectory.cols(); ++c) row.push_back(rec.trajectory(h, c));
        rows.push_back(row);
    }
    fs::path traj_path = p.root / "expert_traj.json";
    std::ofstream(traj_path) << njson{{"q", rows}}.dump();

    fs::path diag = p.root / "diag.csv";
    std::ofstream(diag) << "step,phi,e,c_collision,c_smoothness,c_limit\n0,-1,0.5,0.2,0.2,0.1\n";
    fs::path plots = p.root / "overlay_plots";
    REQUIRE(run_cli("plot --csv " + diag.string() + " --scene " +
                    (p.data / rec.scene_file).string() + " --trajectory " + traj_path.string() +
                    " --out " + plots.string()) == 0);

    std::string svg = file_bytes(plots / "overlay.svg");
    // the last two circles are the goal marker and the end-effector endpoint
    auto find_circle = [&](std::size_t from, double& cx, double& cy) {
        std::size_t pos = svg.find("<circle cx=\"", from);
        REQUIRE(pos != std::string::npos);
        REQUIRE(std::sscanf(svg.c_str() + pos, "<circle cx=\"%lf\" cy=\"%lf\"", &cx, &cy) == 2);
        return pos + 1;
    };
    double gx, gy, ex, ey;
    std::size_t next = find_circle(0, gx, gy);
    find_circle(next, ex, ey);
    CHECK(std::hypot(gx - ex, gy - ey) <= 1.0);  // within one pixel at default scale
}
