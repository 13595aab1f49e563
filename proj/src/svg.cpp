#include "diffplan/svg.hpp"

#include <cstdio>
#include <fstream>
#include <map>

namespace diffplan {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string svg_open(double width, double height) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
           fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n";
}

const char* kBarColors[] = {"#4c78a8", "#f58518", "#54a24b", "#e45756"};

}  // namespace

std::string svg_success_bars(const std::vector<BenchmarkRow>& rows) {
    std::map<std::string, std::pair<int, int>> per_planner;  // name -> (successes, total)
    for (const BenchmarkRow& row : rows) {
        auto& entry = per_planner[planner_name(row.planner)];
        entry.first += row.report.success ? 1 : 0;
        entry.second += 1;
    }
    const double width = 420, height = 300, base_y = 250, bar_w = 80;
    std::string out = svg_open(width, height);
    out += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
           "\" fill=\"white\"/>\n";
    if (per_planner.empty()) {
        out += "<text x=\"" + fmt(width / 2) + "\" y=\"" + fmt(height / 2) +
               "\" text-anchor=\"middle\" font-size=\"16\">no data</text>\n";
        out += "</svg>\n";
        return out;
    }
    out += "<line x1=\"40\" y1=\"" + fmt(base_y) + "\" x2=\"" + fmt(width - 20) + "\" y2=\"" +
           fmt(base_y) + "\" stroke=\"black\"/>\n";
    int i = 0;
    for (const auto& [name, counts] : per_planner) {
        double rate = counts.second > 0 ? 100.0 * counts.first / counts.second : 0.0;
        double bar_h = 2.0 * rate;  // 100% == 200 px
        double x = 60 + i * (bar_w + 40);
        out += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(base_y - bar_h) + "\" width=\"" + fmt(bar_w) +
               "\" height=\"" + fmt(bar_h) + "\" fill=\"" + kBarColors[i % 4] + "\"/>\n";
        out += "<text x=\"" + fmt(x + bar_w / 2) + "\" y=\"" + fmt(base_y + 18) +
               "\" text-anchor=\"middle\" font-size=\"13\">" + name + "</text>\n";
        out += "<text x=\"" + fmt(x + bar_w / 2) + "\" y=\"" + fmt(base_y - bar_h - 6) +
               "\" text-anchor=\"middle\" font-size=\"12\">" + fmt(rate) + "%</text>\n";
        ++i;
    }
    out += "</svg>\n";
    return out;
}

std::string svg_phi_trace(const std::vector<std::pair<std::string, std::vector<StepTrace>>>& runs) {
    const double width = 520, height = 320, margin = 45;
    std::string out = svg_open(width, height);
    out += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
           "\" fill=\"white\"/>\n";
    bool any = false;
    double lo = 0.0, hi = 0.0;
    std::size_t max_len = 0;
    for (const auto& [name, trace] : runs)
        for (const StepTrace& s : trace) {
            if (!any) {
                lo = hi = s.phi;
                any = true;
            }
            lo = std::min(lo, s.phi);
            hi = std::max(hi, s.phi);
            max_len = std::max(max_len, trace.size());
        }
    if (!any) {
        out += "<text x=\"" + fmt(width / 2) + "\" y=\"" + fmt(height / 2) +
               "\" text-anchor=\"middle\" font-size=\"16\">no data</text>\n";
        out += "</svg>\n";
        return out;
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    int color = 0;
    for (const auto& [name, trace] : runs) {
        std::string pts;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            double x = margin + (width - 2 * margin) * (max_len > 1 ? double(i) / (max_len - 1) : 0.0);
            double y = height - margin - (height - 2 * margin) * (trace[i].phi - lo) / (hi - lo);
            pts += fmt(x) + "," + fmt(y) + " ";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(kBarColors[color % 4]) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        out += "<text x=\"" + fmt(width - margin) + "\" y=\"" + fmt(margin + 16.0 * color) +
               "\" text-anchor=\"end\" font-size=\"12\" fill=\"" +
               std::string(kBarColors[color % 4]) + "\">" + name + "</text>\n";
        ++color;
    }
    out += "<text x=\"" + fmt(width / 2) + "\" y=\"" + fmt(height - 8) +
           "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
    out += "</svg>\n";
    return out;
}

std::string svg_trajectory_overlay(const RobotModel& model, const OccupancyGrid& grid,
                                   const TaskSpec& task, const Trajectory& traj) {
    const double scale = kSvgPixelsPerMeter;
    const double width = grid.width * grid.resolution * scale;
    const double height = grid.height * grid.resolution * scale;
    auto px = [&](const Vec2& world) {
        // y flipped so +y points up in the figure
        return Vec2((world.x() - grid.origin.x()) * scale,
                    height - (world.y() - grid.origin.y()) * scale);
    };
    std::string out = svg_open(width, height);
    out += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
           "\" fill=\"white\"/>\n";
    // occupied cells, merged per row-run to keep files small
    for (int iy = 0; iy < grid.height; ++iy) {
        int run_start = -1;
        for (int ix = 0; ix <= grid.width; ++ix) {
            bool occ = ix < grid.width && grid.occupied(ix, iy);
            if (occ && run_start < 0) run_start = ix;
            if (!occ && run_start >= 0) {
                Vec2 corner = grid.origin + grid.resolution * Vec2(run_start, iy + 1.0);
                Vec2 top_left = px(corner);
                out += "<rect x=\"" + fmt(top_left.x()) + "\" y=\"" + fmt(top_left.y()) +
                       "\" width=\"" + fmt((ix - run_start) * grid.resolution * scale) +
                       "\" height=\"" + fmt(grid.resolution * scale) + "\" fill=\"#b0b0b0\"/>\n";
                run_start = -1;
            }
        }
    }
    auto polyline = [&](const std::vector<Vec2>& pts, const char* color) {
        std::string s = "<polyline fill=\"none\" stroke=\"";
        s += color;
        s += "\" stroke-width=\"2\" points=\"";
        for (const Vec2& p : pts) {
            Vec2 v = px(p);
            s += fmt(v.x()) + "," + fmt(v.y()) + " ";
        }
        s += "\"/>\n";
        return s;
    };
    std::vector<Vec2> base_path, ee_path;
    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        base_path.emplace_back(traj(h, 0), traj(h, 1));
        ee_path.push_back(fk_end_effector(model, traj.row(h)).position);
    }
    out += polyline(base_path, "#4c78a8");
    out += polyline(ee_path, "#e45756");

    Vec2 goal_world;
    switch (task.task_type) {
        case TaskType::goal_reach: goal_world = task.goal_pose->position; break;
        case TaskType::grasp: goal_world = task.grasp_candidates.front().position; break;
        case TaskType::place: {
            Vec2 c = Vec2::Zero();
            for (const Vec2& p : task.target_area_polygon) c += p;
            goal_world = c / static_cast<double>(task.target_area_polygon.size());
            break;
        }
    }
    Vec2 goal_px = px(goal_world);
    out += "<circle cx=\"" + fmt(goal_px.x()) + "\" cy=\"" + fmt(goal_px.y()) +
           "\" r=\"5\" fill=\"none\" stroke=\"#54a24b\" stroke-width=\"2\"/>\n";
    Vec2 end_px = px(ee_path.back());
    out += "<circle cx=\"" + fmt(end_px.x()) + "\" cy=\"" + fmt(end_px.y()) +
           "\" r=\"2.5\" fill=\"#e45756\"/>\n";
    out += "</svg>\n";
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot write file: " + path);
    f << content;
}

}  // namespace diffplan
