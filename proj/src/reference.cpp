#include "diffplan/reference.hpp"

namespace diffplan::ref {

SceneSdf build_sdf_bruteforce(const OccupancyGrid& grid) {
    grid.validate();
    SceneSdf sdf;
    sdf.grid = grid;
    sdf.distances.resize(grid.cells.size());
    for (int iy = 0; iy < grid.height; ++iy) {
        for (int ix = 0; ix < grid.width; ++ix) {
            bool occ = grid.occupied(ix, iy);
            double best2 = std::numeric_limits<double>::infinity();
            for (int jy = 0; jy < grid.height; ++jy)
                for (int jx = 0; jx < grid.width; ++jx)
                    if (grid.occupied(jx, jy) != occ) {
                        double dx = jx - ix, dy = jy - iy;
                        best2 = std::min(best2, dx * dx + dy * dy);
                    }
            double dist = std::isfinite(best2)
                              ? std::min(std::sqrt(best2) * grid.resolution, kFarSentinel)
                              : kFarSentinel;
            sdf.distances[static_cast<std::size_t>(iy) * grid.width + ix] = occ ? -dist : dist;
        }
    }
    return sdf;
}

TermGrad cost_collision_serial(const RobotModel& model, const SceneSdf& sdf, const Trajectory& traj,
                               double eps_collision) {
    TermGrad out;
    out.gradient = Mat::Zero(traj.rows(), traj.cols());
    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        Config q = traj.row(h);
        std::vector<Vec2> points = fk_surface_points(model, q);
        PointJacobians jac = jacobian_points(model, q);
        for (std::size_t i = 0; i < points.size(); ++i) {
            SdfQuery sq = query_sdf(sdf, points[i]);
            double d = sq.value;
            if (d >= eps_collision) continue;
            double phi, dphi;
            if (d < 0.0) {
                phi = -d + 0.5 * eps_collision;
                dphi = -1.0;
            } else {
                phi = (d - eps_collision) * (d - eps_collision) / (2.0 * eps_collision);
                dphi = (d - eps_collision) / eps_collision;
            }
            out.value += phi;
            out.gradient.row(h) += (jac.surface[i].transpose() * (dphi * sq.gradient)).transpose();
        }
    }
    return out;
}

double training_loss_serial(const DenoiserParams& params, const NoiseSchedule& schedule,
                            const std::vector<const TrainSample*>& batch,
                            const Normalizer& normalizer, Rng& rng, DenoiserParams* grads) {
    if (batch.empty()) throw dimension_error("training batch is empty");
    const int B = static_cast<int>(batch.size());
    const int H = static_cast<int>(batch[0]->traj_base.rows());
    const int d = static_cast<int>(batch[0]->traj_base.cols());

    std::vector<int> ts(B);
    std::vector<Eigen::MatrixXf> noises(B);
    for (int b = 0; b < B; ++b) {
        ts[b] = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(schedule.T)));
        noises[b] = rng.gaussian_matrix(H, d).cast<float>();
    }
    if (grads) {
        grads->cast_from(params);
        grads->set_zero();
    }
    DenoiserParams sample_grad;
    if (grads) sample_grad.cast_from(params);

    double loss = 0.0;
    DenoiserWorkspace<float> ws;
    for (int b = 0; b < B; ++b) {
        Eigen::MatrixXf tau0 = normalizer.normalize(batch[b]->traj_base).cast<float>();
        double abar = schedule.alpha_bar(ts[b]);
        Eigen::MatrixXf tau_t = (std::sqrt(abar) * tau0 + std::sqrt(1.0 - abar) * noises[b]).eval();
        Eigen::MatrixXf eps_hat =
            denoiser_forward<float>(params, tau_t, ts[b], batch[b]->features, ws);
        Eigen::MatrixXf resid = eps_hat - noises[b];
        loss += resid.cast<double>().squaredNorm();
        if (grads) {
            sample_grad.set_zero();
            Eigen::MatrixXf d_out = (2.0f / static_cast<float>(B)) * resid;
            denoiser_backward<float>(params, ws, d_out, sample_grad);
            auto dst = grads->tensors();
            auto src = sample_grad.tensors();
            for (std::size_t i = 0; i < dst.size(); ++i)
                Eigen::Map<Eigen::MatrixXf>(dst[i].data, dst[i].rows, dst[i].cols) +=
                    Eigen::Map<const Eigen::MatrixXf>(src[i].data, src[i].rows, src[i].cols);
        }
    }
    return loss / B;
}

}  // namespace diffplan::ref
