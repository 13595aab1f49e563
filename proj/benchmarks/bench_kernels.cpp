// Timing harness for the OpenMP kernels against their serial references:
// distance-field construction, collision-cost gradients, training batches.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "diffplan/expert.hpp"
#include "diffplan/reference.hpp"

using namespace diffplan;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <class F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        double t0 = now_s();
        fn();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

void report(const char* kernel, double serial_s, double parallel_s, double max_diff) {
    std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   max|diff| %.3g\n",
                kernel, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s, max_diff);
}

}  // namespace

int main() {
    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("kernel benchmark, %d thread(s)\n\n", threads);

    RobotModel model = RobotModel::default_model();
    GeneratorSpec gen;
    GeneratedScene scene = generate_scene(7, gen, model);

    // ---- distance field -------------------------------------------------
    {
        // brute-force reference on a cropped grid, production kernel on both
        OccupancyGrid small = scene.grid;
        small.width = 60;
        small.height = 60;
        small.cells.assign(static_cast<std::size_t>(small.width) * small.height, 0);
        for (int iy = 0; iy < small.height; ++iy)
            for (int ix = 0; ix < small.width; ++ix)
                small.set(ix, iy, scene.grid.occupied(ix, iy));

        SceneSdf ref = ref::build_sdf_bruteforce(small);
        SceneSdf fast = build_sdf(small, threads);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < ref.distances.size(); ++i)
            max_diff = std::max(max_diff, std::abs(ref.distances[i] - fast.distances[i]));

        double serial = time_best_of(3, [&] { build_sdf(scene.grid, 1); });
        double parallel = time_best_of(3, [&] { build_sdf(scene.grid, threads); });
        report("distance field (120x120)", serial, parallel, max_diff);
    }

    SceneSdf sdf = build_sdf(scene.grid, threads);

    // ---- collision cost --------------------------------------------------
    {
        Rng rng(11);
        Trajectory traj(50, model.dof());
        for (int h = 0; h < 50; ++h) {
            traj(h, 0) = rng.uniform(0.5, 5.5);
            traj(h, 1) = rng.uniform(0.5, 5.5);
            for (int j = 2; j < model.dof(); ++j) traj(h, j) = rng.uniform(-1.5, 1.5);
        }
        TermGrad ref_grad = ref::cost_collision_serial(model, sdf, traj, 0.03);
        TermGrad fast_grad = cost_collision(model, sdf, traj, 0.03, threads);
        double max_diff = (ref_grad.gradient - fast_grad.gradient).cwiseAbs().maxCoeff();
        max_diff = std::max(max_diff, std::abs(ref_grad.value - fast_grad.value));

        double serial = time_best_of(5, [&] { cost_collision(model, sdf, traj, 0.03, 1); });
        double parallel = time_best_of(5, [&] { cost_collision(model, sdf, traj, 0.03, threads); });
        report("collision cost (H=50)", serial, parallel, max_diff);
    }

    // ---- training batch --------------------------------------------------
    {
        const int H = 50, d = model.dof(), B = 16;
        Rng rng(23);
        std::vector<TrainSample> samples(B);
        TaskSpec task = scene.task;
        ScenePoints pts = sample_scene_points(sdf, model, task, 3);
        for (int b = 0; b < B; ++b) {
            samples[b].traj_base = rng.gaussian_matrix(H, d);
            samples[b].features = encode_scene_features<float>(pts);
        }
        std::vector<const TrainSample*> batch;
        for (const auto& s : samples) batch.push_back(&s);
        std::vector<Trajectory> trajs;
        for (const auto& s : samples) trajs.push_back(s.traj_base);
        Normalizer norm = Normalizer::fit(trajs);
        NoiseSchedule schedule = NoiseSchedule::linear(50);
        DenoiserParams params;
        params.init(d, H, 5);

        DenoiserParams ref_grads, fast_grads;
        Rng r1(77), r2(77);
        double l_ref = ref::training_loss_serial(params, schedule, batch, norm, r1, &ref_grads);
        double l_fast = training_loss(params, schedule, batch, norm, r2, &fast_grads, threads);
        double max_diff = std::abs(l_ref - l_fast);
        auto rt = ref_grads.tensors();
        auto ft = fast_grads.tensors();
        for (std::size_t i = 0; i < rt.size(); ++i) {
            Eigen::Map<const Eigen::MatrixXf> a(rt[i].data, rt[i].rows, rt[i].cols);
            Eigen::Map<const Eigen::MatrixXf> b(ft[i].data, ft[i].rows, ft[i].cols);
            max_diff = std::max<double>(max_diff, (a - b).cwiseAbs().maxCoeff());
        }

        double serial = time_best_of(3, [&] {
            Rng r(5);
            training_loss(params, schedule, batch, norm, r, &fast_grads, 1);
        });
        double parallel = time_best_of(3, [&] {
            Rng r(5);
            training_loss(params, schedule, batch, norm, r, &fast_grads, threads);
        });
        report("training batch (B=16)", serial, parallel, max_diff);
    }

    return 0;
}
