#pragma once

#include "diffplan/diffusion.hpp"
#include "diffplan/objective.hpp"

// Serial reference implementations of the parallel kernels. They are written
// independently of the production code paths (brute force where affordable)
// and are used by the tests and the kernel benchmark for cross-checking.

namespace diffplan::ref {

/// O(cells x cells) signed distance field; exact, usable on small grids only.
SceneSdf build_sdf_bruteforce(const OccupancyGrid& grid);

/// Plain single-threaded loop over steps and surface points.
TermGrad cost_collision_serial(const RobotModel& model, const SceneSdf& sdf, const Trajectory& traj,
                               double eps_collision);

/// Strictly sequential batch loss/gradient accumulation in sample order.
double training_loss_serial(const DenoiserParams& params, const NoiseSchedule& schedule,
                            const std::vector<const TrainSample*>& batch,
                            const Normalizer& normalizer, Rng& rng, DenoiserParams* grads);

}  // namespace diffplan::ref
