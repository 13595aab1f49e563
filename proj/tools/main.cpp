// Command-line surface: scene/data generation, training, planning, evaluation,
// ablation, and plot emission. Exit codes: 0 ok, 2 generation failure,
// 3 missing artifact, 4 dimension mismatch, 5 malformed input.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "diffplan/eval.hpp"
#include "diffplan/expert.hpp"
#include "diffplan/svg.hpp"

namespace fs = std::filesystem;
using njson = nlohmann::json;
using namespace diffplan;

namespace {

constexpr int kExitGeneration = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitDimension = 4;
constexpr int kExitMalformed = 5;

std::string out_dir_override(const std::string& requested) {
    if (const char* env = std::getenv("DIFFPLAN_OUT_DIR"); env && *env) return env;
    return requested;
}

void print_summary(const njson& j) { std::cout << j.dump() << std::endl; }

struct Overrides {
    GeneratorSpec generator;
    ExpertConfig expert;
    CostWeights weights;
    int extra_steps = 10;
    double grad_clip = kDefaultGradClip;

    void apply(const std::string& key, const std::string& value) {
        auto d = [&] { return std::stod(value); };
        auto i = [&] { return std::stoi(value); };
        if (key == "generator.room_size") generator.room_size = d();
        else if (key == "generator.resolution") generator.resolution = d();
        else if (key == "generator.min_obstacles") generator.min_obstacles = i();
        else if (key == "generator.max_obstacles") generator.max_obstacles = i();
        else if (key == "generator.min_obstacle_size") generator.min_obstacle_size = d();
        else if (key == "generator.max_obstacle_size") generator.max_obstacle_size = d();
        else if (key == "generator.disc_fraction") generator.disc_fraction = d();
        else if (key == "generator.goal_clearance") generator.goal_clearance = d();
        else if (key == "generator.reach_radius") generator.reach_radius = d();
        else if (key == "generator.min_start_goal_dist") generator.min_start_goal_dist = d();
        else if (key == "generator.max_attempts") generator.max_attempts = i();
        else if (key == "generator.task_type") generator.task_type = task_type_from_name(value);
        else if (key == "expert.restarts") expert.restarts = i();
        else if (key == "expert.descent_steps") expert.descent_steps = i();
        else if (key == "expert.step_size") expert.step_size = d();
        else if (key == "expert.goal_ik_attempts") expert.goal_ik_attempts = i();
        else if (key == "expert.horizon") expert.horizon = i();
        else if (key == "weights.lambda_collision") weights.lambda_collision = d();
        else if (key == "weights.lambda_smoothness") weights.lambda_smoothness = d();
        else if (key == "weights.lambda_limit") weights.lambda_limit = d();
        else if (key == "weights.energy_weight") weights.energy_weight = d();
        else if (key == "weights.eps_collision") weights.eps_collision = d();
        else if (key == "weights.eps_limit") weights.eps_limit = d();
        else if (key == "sampler.extra_steps") extra_steps = i();
        else if (key == "sampler.grad_clip") grad_clip = d();
        else throw input_error("unknown override key '" + key + "'");
    }

    void apply_all(const std::vector<std::string>& pairs) {
        for (const std::string& kv : pairs) {
            auto pos = kv.find('=');
            if (pos == std::string::npos) throw input_error("override must be key=value: " + kv);
            apply(kv.substr(0, pos), kv.substr(pos + 1));
        }
    }
};

RobotModel load_robot(const std::string& path) {
    if (path.empty()) return RobotModel::default_model();
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("missing robot model: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return robot_model_from_json(text);
}

std::vector<BenchmarkTask> collect_scene_tasks(const std::string& scene_dir) {
    if (!fs::is_directory(scene_dir)) throw artifact_error("missing scene directory: " + scene_dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(scene_dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    std::vector<BenchmarkTask> tasks;
    for (const std::string& f : files) tasks.push_back({fs::path(f).stem().string(), f});
    if (tasks.empty()) throw artifact_error("no scene files in " + scene_dir);
    return tasks;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    if (seeds.empty()) throw input_error("empty seed list");
    return seeds;
}

void write_trajectory_json(const std::string& path, const Trajectory& traj) {
    njson rows = njson::array();
    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        njson row = njson::array();
        for (Eigen::Index c = 0; c < traj.cols(); ++c) row.push_back(traj(h, c));
        rows.push_back(row);
    }
    njson j;
    j["q"] = rows;
    write_text_file(path, j.dump() + "\n");
}

Trajectory read_trajectory_json(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("missing trajectory file: " + path);
    njson j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw input_error(std::string("trajectory parse failure: ") + e.what());
    }
    const njson& rows = j.at("q");
    if (rows.empty()) throw input_error("trajectory file has no rows");
    Trajectory traj(rows.size(), rows[0].size());
    for (std::size_t h = 0; h < rows.size(); ++h)
        for (std::size_t c = 0; c < rows[h].size(); ++c)
            traj(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(c)) = rows[h][c].get<double>();
    return traj;
}

void write_diagnostics_csv(const std::string& path, const std::vector<StepTrace>& trace) {
    std::string out = "step,phi,e,c_collision,c_smoothness,c_limit\n";
    char line[256];
    for (const StepTrace& s : trace) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", s.step, s.phi, s.energy,
                      s.c_collision, s.c_smoothness, s.c_limit);
        out += line;
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------- gen-scenes

int cmd_gen_scenes(int count, std::uint64_t seed, std::string out_dir, const Overrides& ov,
                   const std::string& robot_path) {
    RobotModel model = load_robot(robot_path);
    out_dir = out_dir_override(out_dir);
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        std::uint64_t scene_seed = seed + static_cast<std::uint64_t>(i);
        GeneratedScene scene = generate_scene(scene_seed, ov.generator, model);
        char name[64];
        std::snprintf(name, sizeof(name), "scene_%06llu.json",
                      static_cast<unsigned long long>(scene_seed));
        save_scene((fs::path(out_dir) / name).string(), scene.grid, scene.task);
    }
    print_summary({{"cmd", "gen-scenes"}, {"count", count}, {"seed", seed}, {"out_dir", out_dir},
                   {"status", "ok"}});
    return 0;
}

// ------------------------------------------------------------------ gen-data

int cmd_gen_data(int scenes, std::uint64_t seed, int tasks_per_scene, std::string out_dir,
                 int threads, const Overrides& ov, const std::string& robot_path) {
    RobotModel model = load_robot(robot_path);
    out_dir = out_dir_override(out_dir);
    fs::create_directories(out_dir);
    std::vector<std::uint64_t> scene_seeds;
    for (int i = 0; i < scenes; ++i) scene_seeds.push_back(seed + static_cast<std::uint64_t>(i));
    ExpertConfig cfg = ov.expert;
    cfg.threads = threads;
    DatasetOutput out = generate_dataset(model, scene_seeds, tasks_per_scene, ov.generator, cfg,
                                         out_dir);
    print_summary({{"cmd", "gen-data"},
                   {"scenes", scenes},
                   {"tasks_per_scene", tasks_per_scene},
                   {"solved", out.manifest.solved},
                   {"discarded", out.manifest.discarded},
                   {"train", out.manifest.train_indices.size()},
                   {"test", out.manifest.test_indices.size()},
                   {"out_dir", out_dir},
                   {"status", "ok"}});
    return 0;
}

// --------------------------------------------------------------------- train

std::vector<TrainSample> make_samples(const RobotModel& model,
                                      const std::vector<DatasetRecord>& records,
                                      const std::vector<int>& indices, const std::string& data_dir) {
    std::map<std::string, SceneSdf> sdf_cache;
    std::vector<TrainSample> samples;
    for (int idx : indices) {
        const DatasetRecord& rec = records.at(static_cast<std::size_t>(idx));
        auto it = sdf_cache.find(rec.scene_file);
        if (it == sdf_cache.end()) {
            GeneratedScene scene = load_scene((fs::path(data_dir) / rec.scene_file).string());
            it = sdf_cache.emplace(rec.scene_file, build_sdf(scene.grid)).first;
        }
        TrainSample s;
        s.traj_base = world_to_base_frame(rec.trajectory, rec.q0);
        ScenePoints pts = sample_scene_points(it->second, model, rec.task,
                                              sub_seed(0x9e11, static_cast<std::uint64_t>(idx)));
        s.features = encode_scene_features<float>(pts);
        samples.push_back(std::move(s));
    }
    return samples;
}

int cmd_train(const std::string& data_dir, const std::string& out_path, TrainConfig cfg,
              const std::string& robot_path) {
    RobotModel model = load_robot(robot_path);
    std::vector<DatasetRecord> records =
        read_dataset_jsonl((fs::path(data_dir) / "dataset.jsonl").string());
    std::ifstream mf(fs::path(data_dir) / "manifest.json", std::ios::binary);
    if (!mf) throw artifact_error("missing manifest under " + data_dir);
    std::string mtext((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
    DatasetManifest manifest = manifest_from_json(mtext);
    if (records.empty()) throw artifact_error("dataset is empty: " + data_dir);
    for (const DatasetRecord& rec : records)
        if (rec.trajectory.cols() != model.dof()) throw dimension_error("dataset dof != robot dof");

    std::vector<TrainSample> train_set = make_samples(model, records, manifest.train_indices, data_dir);
    std::vector<TrainSample> holdout = make_samples(model, records, manifest.test_indices, data_dir);
    if (cfg.loss_curve_path.empty()) {
        fs::path parent = fs::path(out_path).parent_path();
        cfg.loss_curve_path = (parent.empty() ? fs::path(".") : parent) / "loss_curve.csv";
    }

    TrainResult result = train(train_set, holdout, cfg);
    Checkpoint ckpt{result.params, result.normalizer, result.schedule,
                    static_cast<int>(train_set[0].traj_base.rows()),
                    static_cast<int>(train_set[0].traj_base.cols())};
    save_checkpoint(out_path, ckpt);
    print_summary({{"cmd", "train"},
                   {"train_size", train_set.size()},
                   {"holdout_size", holdout.size()},
                   {"epochs", cfg.epochs},
                   {"final_train_loss", result.curve.back().train_loss},
                   {"final_holdout_loss", result.curve.back().holdout_loss},
                   {"checkpoint", out_path},
                   {"status", "ok"}});
    return 0;
}

// ---------------------------------------------------------------------- plan

struct PlanArgs {
    std::string checkpoint, scene_file, out_path, diagnostics_path;
    std::uint64_t seed = 0;
    int extra_steps = 10;
    bool guidance_enabled = true;
    CostWeights weights;
    int threads = 1;
};

PlanArgs plan_args_from_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("missing planner config: " + path);
    njson j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw input_error(std::string("planner config parse failure: ") + e.what());
    }
    static const std::vector<std::string> allowed = {"checkpoint", "scene_file", "task",
                                                     "weights",    "K",          "guidance_enabled",
                                                     "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw input_error("unknown planner config key '" + it.key() + "'");
    PlanArgs args;
    args.checkpoint = j.at("checkpoint").get<std::string>();
    args.scene_file = j.at("scene_file").get<std::string>();
    if (j.contains("K")) args.extra_steps = j.at("K").get<int>();
    if (j.contains("guidance_enabled")) args.guidance_enabled = j.at("guidance_enabled").get<bool>();
    if (j.contains("seed")) args.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("weights")) {
        const njson& w = j.at("weights");
        static const std::vector<std::string> wkeys = {"lambda_collision", "lambda_smoothness",
                                                       "lambda_limit",     "energy_weight",
                                                       "eps_collision",    "eps_limit"};
        for (auto it = w.begin(); it != w.end(); ++it)
            if (std::find(wkeys.begin(), wkeys.end(), it.key()) == wkeys.end())
                throw input_error("unknown weights key '" + it.key() + "'");
        if (w.contains("lambda_collision")) args.weights.lambda_collision = w.at("lambda_collision");
        if (w.contains("lambda_smoothness"))
            args.weights.lambda_smoothness = w.at("lambda_smoothness");
        if (w.contains("lambda_limit")) args.weights.lambda_limit = w.at("lambda_limit");
        if (w.contains("energy_weight")) args.weights.energy_weight = w.at("energy_weight");
        if (w.contains("eps_collision")) args.weights.eps_collision = w.at("eps_collision");
        if (w.contains("eps_limit")) args.weights.eps_limit = w.at("eps_limit");
    }
    return args;
}

int cmd_plan(const PlanArgs& args, const std::string& robot_path) {
    RobotModel model = load_robot(robot_path);
    Checkpoint ckpt = load_checkpoint(args.checkpoint);
    if (ckpt.dof != model.dof()) throw dimension_error("checkpoint dof != robot dof");
    GeneratedScene scene = load_scene(args.scene_file);
    SceneSdf sdf = build_sdf(scene.grid, args.threads);

    GuidanceConfig cfg;
    cfg.weights = args.weights;
    cfg.extra_steps = args.extra_steps;
    cfg.guidance_enabled = args.guidance_enabled;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    PlanResult result = plan(model, sdf, ckpt, scene.task, cfg);

    write_trajectory_json(args.out_path, result.trajectory);
    if (!args.diagnostics_path.empty())
        write_diagnostics_csv(args.diagnostics_path, result.diagnostics.trace);
    print_summary({{"cmd", "plan"},
                   {"scene", args.scene_file},
                   {"seed", args.seed},
                   {"guidance", args.guidance_enabled},
                   {"out", args.out_path},
                   {"status", "ok"}});
    return 0;
}

// ---------------------------------------------------------------------- eval

int cmd_eval(const std::string& checkpoint_path, const std::string& scene_dir,
             const std::string& planner, const std::string& seeds, const std::string& out_csv,
             int threads, const std::string& timing, const Overrides& ov,
             const std::string& robot_path) {
    RobotModel model = load_robot(robot_path);
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (ckpt.dof != model.dof()) throw dimension_error("checkpoint dof != robot dof");
    std::vector<BenchmarkTask> tasks = collect_scene_tasks(scene_dir);
    BenchmarkConfig cfg;
    cfg.seeds = parse_seed_list(seeds);
    cfg.weights = ov.weights;
    cfg.extra_steps = ov.extra_steps;
    cfg.threads = threads;
    cfg.wall_time = (timing == "wall");
    BenchmarkResult result = run_benchmark(model, ckpt, tasks, planner_from_name(planner), cfg);
    write_benchmark_csv(out_csv, result.rows);
    print_summary({{"cmd", "eval"},
                   {"planner", planner},
                   {"tasks", tasks.size()},
                   {"success_rate", result.aggregates.success_rate},
                   {"collision_rate", result.aggregates.collision_rate},
                   {"out", out_csv},
                   {"status", "ok"}});
    return 0;
}

// -------------------------------------------------------------------- ablate

int cmd_ablate(const std::string& checkpoint_path, const std::string& scene_dir,
               const std::string& seeds, std::string out_dir, int threads, const Overrides& ov,
               const std::string& robot_path) {
    RobotModel model = load_robot(robot_path);
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (ckpt.dof != model.dof()) throw dimension_error("checkpoint dof != robot dof");
    out_dir = out_dir_override(out_dir);
    fs::create_directories(out_dir);
    std::vector<BenchmarkTask> tasks = collect_scene_tasks(scene_dir);
    BenchmarkConfig cfg;
    cfg.seeds = parse_seed_list(seeds);
    cfg.weights = ov.weights;
    cfg.extra_steps = ov.extra_steps;
    cfg.threads = threads;

    std::vector<BenchmarkRow> all_rows;
    njson rates;
    for (PlannerKind kind : {PlannerKind::guided, PlannerKind::unguided, PlannerKind::langevin}) {
        BenchmarkResult result = run_benchmark(model, ckpt, tasks, kind, cfg);
        rates[planner_name(kind)] = result.aggregates.success_rate;
        all_rows.insert(all_rows.end(), result.rows.begin(), result.rows.end());
    }
    std::string csv_path = (fs::path(out_dir) / "comparison.csv").string();
    write_benchmark_csv(csv_path, all_rows);
    write_text_file((fs::path(out_dir) / "success_rate.svg").string(), svg_success_bars(all_rows));
    print_summary({{"cmd", "ablate"}, {"tasks", tasks.size()}, {"success_rates", rates},
                   {"out_dir", out_dir}, {"status", "ok"}});
    return 0;
}

// ---------------------------------------------------------------------- plot

std::vector<StepTrace> read_diagnostics_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("missing csv: " + path);
    std::string header;
    std::getline(f, header);
    std::vector<StepTrace> trace;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        StepTrace s{};
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &s.step, &s.phi, &s.energy,
                        &s.c_collision, &s.c_smoothness, &s.c_limit) != 6)
            throw input_error("malformed diagnostics row: " + line);
        trace.push_back(s);
    }
    return trace;
}

std::vector<BenchmarkRow> read_benchmark_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("missing csv: " + path);
    std::string header;
    std::getline(f, header);
    std::vector<BenchmarkRow> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 12) throw input_error("malformed benchmark row: " + line);
        BenchmarkRow row;
        row.task_id = fields[0];
        row.planner = planner_from_name(fields[1]);
        row.seed = std::stoull(fields[2]);
        row.report.success = fields[3] == "1";
        row.report.pos_error = std::stod(fields[4]);
        row.report.ang_error = std::stod(fields[5]);
        row.report.collision.any = fields[6] == "1";
        row.report.collision.max_depth = std::stod(fields[7]);
        row.report.joint_violation_rate = std::stod(fields[8]);
        row.report.sparc_config = std::stod(fields[9]);
        row.report.sparc_ee = std::stod(fields[10]);
        row.report.solve_time_s = std::stod(fields[11]);
        rows.push_back(row);
    }
    return rows;
}

int cmd_plot(const std::string& csv_path, std::string out_dir, const std::string& scene_path,
             const std::string& traj_path, const std::string& robot_path) {
    out_dir = out_dir_override(out_dir);
    fs::create_directories(out_dir);
    njson emitted = njson::array();

    std::ifstream f(csv_path, std::ios::binary);
    if (!f) throw artifact_error("missing csv: " + csv_path);
    std::string header;
    std::getline(f, header);
    f.close();
    if (header.rfind("task_id,", 0) == 0) {
        std::string path = (fs::path(out_dir) / "success_rate.svg").string();
        write_text_file(path, svg_success_bars(read_benchmark_csv(csv_path)));
        emitted.push_back(path);
    } else if (header.rfind("step,phi", 0) == 0) {
        std::string path = (fs::path(out_dir) / "phi_trace.svg").string();
        std::vector<std::pair<std::string, std::vector<StepTrace>>> runs;
        runs.emplace_back(fs::path(csv_path).stem().string(), read_diagnostics_csv(csv_path));
        write_text_file(path, svg_phi_trace(runs));
        emitted.push_back(path);
    } else {
        throw input_error("unrecognized csv header: " + header);
    }

    if (!scene_path.empty() && !traj_path.empty()) {
        RobotModel model = load_robot(robot_path);
        GeneratedScene scene = load_scene(scene_path);
        Trajectory traj = read_trajectory_json(traj_path);
        std::string path = (fs::path(out_dir) / "overlay.svg").string();
        write_text_file(path, svg_trajectory_overlay(model, scene.grid, scene.task, traj));
        emitted.push_back(path);
    }
    print_summary({{"cmd", "plot"}, {"out_dir", out_dir}, {"figures", emitted}, {"status", "ok"}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"guided diffusion trajectory planner for a planar mobile manipulator"};
    app.require_subcommand(1);

    std::string robot_path;
    app.add_option("--robot", robot_path, "robot model JSON (default: built-in 3-link model)");

    auto* gen_scenes = app.add_subcommand("gen-scenes", "generate procedural scene files");
    int gs_count = 10;
    std::uint64_t gs_seed = 0;
    std::string gs_out = "scenes";
    std::vector<std::string> gs_set;
    gen_scenes->add_option("--count", gs_count, "number of scenes");
    gen_scenes->add_option("--seed", gs_seed, "base seed");
    gen_scenes->add_option("--out-dir", gs_out, "output directory");
    gen_scenes->add_option("--set", gs_set, "override module defaults (key=value)");

    auto* gen_data = app.add_subcommand("gen-data", "generate expert demonstration dataset");
    int gd_scenes = 20, gd_tasks = 10, gd_threads = 1;
    std::uint64_t gd_seed = 0;
    std::string gd_out = "data";
    std::vector<std::string> gd_set;
    gen_data->add_option("--scenes", gd_scenes, "number of scenes");
    gen_data->add_option("--tasks-per-scene", gd_tasks, "tasks per scene");
    gen_data->add_option("--seed", gd_seed, "base seed");
    gen_data->add_option("--out-dir", gd_out, "output directory");
    gen_data->add_option("--threads", gd_threads, "worker threads");
    gen_data->add_option("--set", gd_set, "override module defaults (key=value)");

    auto* train_cmd = app.add_subcommand("train", "train the denoiser on a dataset");
    std::string tr_data = "data", tr_out = "checkpoint.ckpt", tr_curve;
    TrainConfig tr_cfg;
    train_cmd->add_option("--data", tr_data, "dataset directory (dataset.jsonl + manifest.json)");
    train_cmd->add_option("--out", tr_out, "checkpoint output path");
    train_cmd->add_option("--epochs", tr_cfg.epochs, "training epochs");
    train_cmd->add_option("--batch-size", tr_cfg.batch_size, "batch size");
    train_cmd->add_option("--lr", tr_cfg.learning_rate, "learning rate");
    train_cmd->add_option("--seed", tr_cfg.seed, "training seed");
    train_cmd->add_option("--threads", tr_cfg.threads, "worker threads");
    train_cmd->add_option("--loss-curve", tr_curve, "loss curve CSV path");

    auto* plan_cmd = app.add_subcommand("plan", "sample one trajectory for a scene");
    std::string pl_config, pl_ckpt, pl_scene, pl_out = "trajectory.json", pl_diag;
    std::uint64_t pl_seed = 0;
    int pl_K = 10, pl_threads = 1;
    bool pl_no_guidance = false;
    std::vector<std::string> pl_set;
    plan_cmd->add_option("--config", pl_config, "planner config JSON");
    plan_cmd->add_option("--checkpoint", pl_ckpt, "checkpoint path");
    plan_cmd->add_option("--scene", pl_scene, "scene file");
    plan_cmd->add_option("--out", pl_out, "trajectory output JSON");
    plan_cmd->add_option("--diagnostics", pl_diag, "per-step diagnostics CSV");
    plan_cmd->add_option("--seed", pl_seed, "sampling seed");
    plan_cmd->add_option("--K", pl_K, "extra refinement steps");
    plan_cmd->add_flag("--no-guidance", pl_no_guidance, "disable objective guidance");
    plan_cmd->add_option("--threads", pl_threads, "worker threads");
    plan_cmd->add_option("--set", pl_set, "override module defaults (key=value)");

    auto* eval_cmd = app.add_subcommand("eval", "score a planner over a scene set");
    std::string ev_ckpt, ev_scenes, ev_planner = "guided", ev_seeds = "0", ev_out = "eval.csv",
                ev_timing = "none";
    int ev_threads = 1;
    std::vector<std::string> ev_set;
    eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--scene-dir", ev_scenes, "directory of scene files")->required();
    eval_cmd->add_option("--planner", ev_planner, "guided | unguided | langevin");
    eval_cmd->add_option("--seeds", ev_seeds, "comma-separated seed list");
    eval_cmd->add_option("--out", ev_out, "output CSV");
    eval_cmd->add_option("--threads", ev_threads, "worker threads");
    eval_cmd->add_option("--timing", ev_timing, "none (deterministic, default) | wall");
    eval_cmd->add_option("--set", ev_set, "override module defaults (key=value)");

    auto* ablate_cmd = app.add_subcommand("ablate", "compare guided / unguided / langevin");
    std::string ab_ckpt, ab_scenes, ab_seeds = "0", ab_out = "ablation";
    int ab_threads = 1;
    std::vector<std::string> ab_set;
    ablate_cmd->add_option("--checkpoint", ab_ckpt, "checkpoint path")->required();
    ablate_cmd->add_option("--scene-dir", ab_scenes, "directory of scene files")->required();
    ablate_cmd->add_option("--seeds", ab_seeds, "comma-separated seed list");
    ablate_cmd->add_option("--out-dir", ab_out, "output directory");
    ablate_cmd->add_option("--threads", ab_threads, "worker threads");
    ablate_cmd->add_option("--set", ab_set, "override module defaults (key=value)");

    auto* plot_cmd = app.add_subcommand("plot", "emit SVG figures from CSV artifacts");
    std::string pt_csv, pt_out = "plots", pt_scene, pt_traj;
    plot_cmd->add_option("--csv", pt_csv, "benchmark or diagnostics CSV")->required();
    plot_cmd->add_option("--out", pt_out, "output directory");
    plot_cmd->add_option("--scene", pt_scene, "scene file for the trajectory overlay");
    plot_cmd->add_option("--trajectory", pt_traj, "trajectory JSON for the overlay");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen_scenes->parsed()) {
            Overrides ov;
            ov.apply_all(gs_set);
            return cmd_gen_scenes(gs_count, gs_seed, gs_out, ov, robot_path);
        }
        if (gen_data->parsed()) {
            Overrides ov;
            ov.apply_all(gd_set);
            return cmd_gen_data(gd_scenes, gd_seed, gd_tasks, gd_out, gd_threads, ov, robot_path);
        }
        if (train_cmd->parsed()) {
            tr_cfg.loss_curve_path = tr_curve;
            return cmd_train(tr_data, tr_out, tr_cfg, robot_path);
        }
        if (plan_cmd->parsed()) {
            Overrides ov;
            ov.apply_all(pl_set);
            PlanArgs args;
            if (!pl_config.empty()) args = plan_args_from_config(pl_config);
            if (!pl_ckpt.empty()) args.checkpoint = pl_ckpt;
            if (!pl_scene.empty()) args.scene_file = pl_scene;
            if (plan_cmd->count("--seed")) args.seed = pl_seed;
            if (plan_cmd->count("--K")) args.extra_steps = pl_K;
            if (pl_no_guidance) args.guidance_enabled = false;
            if (plan_cmd->count("--set")) args.weights = ov.weights;
            args.out_path = pl_out;
            args.diagnostics_path = pl_diag;
            args.threads = pl_threads;
            if (args.checkpoint.empty() || args.scene_file.empty())
                throw artifact_error("plan needs --checkpoint and --scene (or --config)");
            return cmd_plan(args, robot_path);
        }
        if (eval_cmd->parsed()) {
            Overrides ov;
            ov.apply_all(ev_set);
            return cmd_eval(ev_ckpt, ev_scenes, ev_planner, ev_seeds, ev_out, ev_threads, ev_timing,
                            ov, robot_path);
        }
        if (ablate_cmd->parsed()) {
            Overrides ov;
            ov.apply_all(ab_set);
            return cmd_ablate(ab_ckpt, ab_scenes, ab_seeds, ab_out, ab_threads, ov, robot_path);
        }
        if (plot_cmd->parsed()) {
            return cmd_plot(pt_csv, pt_out, pt_scene, pt_traj, robot_path);
        }
    } catch (const generation_error& e) {
        std::cerr << "generation failure: " << e.what() << "\n";
        return kExitGeneration;
    } catch (const artifact_error& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const dimension_error& e) {
        std::cerr << "dimension mismatch: " << e.what() << "\n";
        return kExitDimension;
    } catch (const input_error& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return kExitMalformed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
