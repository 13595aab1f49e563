#pragma once

#include <string>
#include <vector>

#include "diffplan/eval.hpp"

namespace diffplan {

// Deterministic SVG emitters: fixed float formatting, no timestamps, so equal
// inputs produce byte-identical files.

constexpr double kSvgPixelsPerMeter = 100.0;

/// Success-rate bars per planner from benchmark rows. An empty row set yields
/// a valid SVG with a "no data" annotation.
std::string svg_success_bars(const std::vector<BenchmarkRow>& rows);

/// Objective traces (phi vs step) for one or more planning runs.
std::string svg_phi_trace(const std::vector<std::pair<std::string, std::vector<StepTrace>>>& runs);

/// Occupancy map with the base path, end-effector path, and goal marker.
std::string svg_trajectory_overlay(const RobotModel& model, const OccupancyGrid& grid,
                                   const TaskSpec& task, const Trajectory& traj);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace diffplan
