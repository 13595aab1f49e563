#include "diffplan/diffusion.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace diffplan {

using njson = nlohmann::json;

NoiseSchedule NoiseSchedule::linear(int T) {
    if (T < 2) throw dimension_error("schedule needs T >= 2");
    NoiseSchedule s;
    s.T = T;
    double scale = 1000.0 / T;
    double beta_start = 1e-4 * scale;
    double beta_end = 2e-2 * scale;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    double abar = 1.0;
    for (int i = 0; i < T; ++i) {
        s.betas[i] = beta_start + (beta_end - beta_start) * i / (T - 1);
        s.alphas[i] = 1.0 - s.betas[i];
        abar *= s.alphas[i];
        s.alpha_bars[i] = abar;
    }
    s.posterior_vars.resize(T);
    for (int t = 1; t <= T; ++t) {
        double abar_prev = (t == 1) ? 1.0 : s.alpha_bars[t - 2];
        s.posterior_vars[t - 1] = (1.0 - abar_prev) / (1.0 - s.alpha_bars[t - 1]) * s.betas[t - 1];
    }
    s.posterior_vars[0] = s.posterior_vars.size() > 1 ? s.posterior_vars[1] : s.betas[0];
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    if (T < 1 || static_cast<int>(betas.size()) != T) throw dimension_error("bad schedule size");
    for (int i = 0; i < T; ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw dimension_error("beta out of (0, 1)");
        if (i > 0 && !(betas[i] > betas[i - 1])) throw dimension_error("betas must increase");
        if (i > 0 && !(alpha_bars[i] < alpha_bars[i - 1]))
            throw dimension_error("alpha_bar must decrease");
        if (!(posterior_vars[i] > 0.0 && posterior_vars[i] <= betas[i]))
            throw dimension_error("posterior variance out of (0, beta]");
    }
}

Normalizer Normalizer::fit(const std::vector<Trajectory>& data) {
    if (data.empty()) throw dimension_error("normalizer needs data");
    const Eigen::Index d = data.front().cols();
    Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
    Vec hi = Vec::Constant(d, -std::numeric_limits<double>::infinity());
    for (const Trajectory& traj : data) {
        if (traj.cols() != d) throw dimension_error("inconsistent trajectory widths");
        lo = lo.cwiseMin(traj.colwise().minCoeff().transpose());
        hi = hi.cwiseMax(traj.colwise().maxCoeff().transpose());
    }
    // degenerate dims get a unit span so the map stays invertible
    for (Eigen::Index j = 0; j < d; ++j)
        if (!(hi[j] - lo[j] > 1e-9)) {
            lo[j] -= 0.5;
            hi[j] += 0.5;
        }
    Normalizer n;
    n.minimum = lo;
    n.maximum = hi;
    return n;
}

void Normalizer::validate() const {
    if (minimum.size() != maximum.size() || minimum.size() == 0)
        throw dimension_error("bad normalizer");
    for (Eigen::Index j = 0; j < minimum.size(); ++j)
        if (!(maximum[j] > minimum[j])) throw dimension_error("normalizer span must be positive");
}

Mat Normalizer::normalize(const Mat& rows) const {
    Mat out(rows.rows(), rows.cols());
    Vec c = center(), h = halfspan();
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
        out.col(j) = (rows.col(j).array() - c[j]) / h[j];
    return out;
}

Mat Normalizer::denormalize(const Mat& rows) const {
    Mat out(rows.rows(), rows.cols());
    Vec c = center(), h = halfspan();
    for (Eigen::Index j = 0; j < rows.cols(); ++j) out.col(j) = rows.col(j).array() * h[j] + c[j];
    return out;
}

Vec Normalizer::normalize_config(const Vec& q) const {
    return ((q - center()).array() / halfspan().array()).matrix();
}

Vec Normalizer::denormalize_config(const Vec& q) const {
    return (q.array() * halfspan().array()).matrix() + center();
}

Mat Normalizer::gradient_to_normalized(const Mat& grad) const {
    Mat out(grad.rows(), grad.cols());
    Vec h = halfspan();
    for (Eigen::Index j = 0; j < grad.cols(); ++j) out.col(j) = grad.col(j) * h[j];
    return out;
}

Mat forward_noise(const NoiseSchedule& schedule, const Mat& tau0, int t, const Mat& eps) {
    if (t < 1 || t > schedule.T) throw dimension_error("diffusion step out of range");
    if (eps.rows() != tau0.rows() || eps.cols() != tau0.cols())
        throw dimension_error("noise shape != trajectory shape");
    double abar = schedule.alpha_bar(t);
    return std::sqrt(abar) * tau0 + std::sqrt(1.0 - abar) * eps;
}

Mat posterior_mean(const NoiseSchedule& schedule, const Mat& tau_t, int t, const Mat& eps_hat) {
    double a = schedule.alpha(t);
    double abar = schedule.alpha_bar(t);
    return (tau_t - ((1.0 - a) / std::sqrt(1.0 - abar)) * eps_hat) / std::sqrt(a);
}

Trajectory world_to_base_frame(const Trajectory& traj, const Config& q0) {
    Pose2 base{Vec2(q0[0], q0[1]), q0[2]};
    Pose2 inv = base.inverse();
    Trajectory out = traj;
    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        Vec2 p = inv.apply(Vec2(traj(h, 0), traj(h, 1)));
        out(h, 0) = p.x();
        out(h, 1) = p.y();
        out(h, 2) = traj(h, 2) - q0[2];
    }
    return out;
}

Trajectory base_frame_to_world(const Trajectory& traj, const Config& q0) {
    Pose2 base{Vec2(q0[0], q0[1]), q0[2]};
    Trajectory out = traj;
    for (Eigen::Index h = 0; h < traj.rows(); ++h) {
        Vec2 p = base.apply(Vec2(traj(h, 0), traj(h, 1)));
        out(h, 0) = p.x();
        out(h, 1) = p.y();
        out(h, 2) = traj(h, 2) + q0[2];
    }
    return out;
}

Mat world_gradient_to_base_frame(const Mat& grad, const Config& q0) {
    double c = std::cos(q0[2]), s = std::sin(q0[2]);
    Mat out = grad;
    for (Eigen::Index h = 0; h < grad.rows(); ++h) {
        double gx = grad(h, 0), gy = grad(h, 1);
        out(h, 0) = c * gx + s * gy;
        out(h, 1) = -s * gx + c * gy;
    }
    return out;
}

namespace {

njson pose_to_json(const Pose2& p) {
    return njson{{"position", {p.position.x(), p.position.y()}}, {"heading", p.heading}};
}

Pose2 pose_from_json(const njson& j) {
    return Pose2{Vec2(j.at("position").at(0).get<double>(), j.at("position").at(1).get<double>()),
                 j.at("heading").get<double>()};
}

}  // namespace

std::string dataset_record_to_json(const DatasetRecord& rec) {
    njson j;
    j["scene_file"] = rec.scene_file;
    j["task_type"] = task_type_name(rec.task_type);
    j["q0"] = std::vector<double>(rec.q0.begin(), rec.q0.end());
    njson rows = njson::array();
    for (Eigen::Index h = 0; h < rec.trajectory.rows(); ++h) {
        njson row = njson::array();
        for (Eigen::Index c = 0; c < rec.trajectory.cols(); ++c) row.push_back(rec.trajectory(h, c));
        rows.push_back(row);
    }
    j["trajectory"] = rows;
    njson goal;
    if (rec.task.goal_pose) goal["goal_pose"] = pose_to_json(*rec.task.goal_pose);
    if (!rec.task.target_area_polygon.empty()) {
        njson poly = njson::array();
        for (const Vec2& p : rec.task.target_area_polygon) poly.push_back({p.x(), p.y()});
        goal["target_area_polygon"] = poly;
    }
    if (!rec.task.grasp_candidates.empty()) {
        njson cands = njson::array();
        for (const Pose2& p : rec.task.grasp_candidates) cands.push_back(pose_to_json(p));
        goal["grasp_candidates"] = cands;
    }
    j["goal"] = goal;
    return j.dump();
}

DatasetRecord dataset_record_from_json(const std::string& line) {
    njson j;
    try {
        j = njson::parse(line);
    } catch (const std::exception& e) {
        throw input_error(std::string("dataset record parse failure: ") + e.what());
    }
    DatasetRecord rec;
    rec.scene_file = j.at("scene_file").get<std::string>();
    rec.task_type = task_type_from_name(j.at("task_type").get<std::string>());
    auto q0 = j.at("q0").get<std::vector<double>>();
    rec.q0 = Eigen::Map<Vec>(q0.data(), q0.size());
    const njson& rows = j.at("trajectory");
    if (rows.empty()) throw input_error("dataset record has empty trajectory");
    rec.trajectory.resize(rows.size(), rows[0].size());
    for (std::size_t h = 0; h < rows.size(); ++h)
        for (std::size_t c = 0; c < rows[h].size(); ++c)
            rec.trajectory(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(c)) =
                rows[h][c].get<double>();
    rec.task.start = rec.q0;
    rec.task.task_type = rec.task_type;
    const njson& goal = j.at("goal");
    if (goal.contains("goal_pose")) rec.task.goal_pose = pose_from_json(goal.at("goal_pose"));
    if (goal.contains("target_area_polygon"))
        for (const auto& p : goal.at("target_area_polygon"))
            rec.task.target_area_polygon.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    if (goal.contains("grasp_candidates"))
        for (const auto& p : goal.at("grasp_candidates"))
            rec.task.grasp_candidates.push_back(pose_from_json(p));
    return rec;
}

std::vector<DatasetRecord> read_dataset_jsonl(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("missing dataset file: " + path);
    std::vector<DatasetRecord> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(dataset_record_from_json(line));
    }
    return out;
}

void write_dataset_jsonl(const std::string& path, const std::vector<DatasetRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot write dataset file: " + path);
    for (const DatasetRecord& rec : records) f << dataset_record_to_json(rec) << "\n";
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || batch_size < 1 || epochs < 1 || T < 2)
        throw input_error("bad training configuration");
}

NoiseDraws draw_training_noise(const NoiseSchedule& schedule, int batch, int horizon, int dof,
                               Rng& rng) {
    NoiseDraws draws;
    draws.ts.resize(batch);
    draws.eps.resize(batch);
    for (int b = 0; b < batch; ++b) {
        draws.ts[b] = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(schedule.T)));
        draws.eps[b] = rng.gaussian_matrix(horizon, dof).cast<float>();
    }
    return draws;
}

double training_loss_core(const std::vector<const TrainSample*>& batch, const Normalizer& normalizer,
                          const NoiseSchedule& schedule, const NoiseDraws& draws,
                          const PredictStub& predict) {
    if (batch.empty()) throw dimension_error("training batch is empty");
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        Eigen::MatrixXf tau0 = normalizer.normalize(batch[b]->traj_base).cast<float>();
        double abar = schedule.alpha_bar(draws.ts[b]);
        Eigen::MatrixXf tau_t =
            (std::sqrt(abar) * tau0 + std::sqrt(1.0 - abar) * draws.eps[b]).eval();
        Eigen::MatrixXf eps_hat = predict(tau_t, draws.ts[b], static_cast<int>(b));
        loss += (eps_hat - draws.eps[b]).cast<double>().squaredNorm();
    }
    return loss / static_cast<double>(batch.size());
}

double training_loss(const DenoiserParams& params, const NoiseSchedule& schedule,
                     const std::vector<const TrainSample*>& batch, const Normalizer& normalizer,
                     Rng& rng, DenoiserParams* grads, int threads) {
    if (batch.empty()) throw dimension_error("training batch is empty");
    const int B = static_cast<int>(batch.size());
    const int H = static_cast<int>(batch[0]->traj_base.rows());
    const int d = static_cast<int>(batch[0]->traj_base.cols());
    threads = resolve_threads(threads);

    // draw (t, eps) serially so the stream is identical for any thread count
    NoiseDraws draws = draw_training_noise(schedule, B, H, d, rng);
    const std::vector<int>& ts = draws.ts;
    const std::vector<Eigen::MatrixXf>& noises = draws.eps;

    // per-sample gradients are folded into `grads` in sample order after every
    // group, so any thread count produces bit-identical results
    const int group = std::max(threads, 1);
    std::vector<DenoiserParams> grad_slots(grads ? group : 0);
    std::vector<double> loss_slots(group, 0.0);
    std::vector<int> bad_sample(group, -1);
    if (grads) {
        for (auto& g : grad_slots) g.cast_from(params);
        grads->cast_from(params);
        grads->set_zero();
    }

    double loss = 0.0;
    for (int base = 0; base < B; base += group) {
        const int count = std::min(group, B - base);
        std::fill(loss_slots.begin(), loss_slots.end(), 0.0);
        std::fill(bad_sample.begin(), bad_sample.end(), -1);
#pragma omp parallel for num_threads(threads) schedule(static)
        for (int k = 0; k < count; ++k) {
            const int b = base + k;
            const TrainSample& sample = *batch[b];
            Eigen::MatrixXf tau0 = normalizer.normalize(sample.traj_base).cast<float>();
            double abar = schedule.alpha_bar(ts[b]);
            Eigen::MatrixXf tau_t =
                (std::sqrt(abar) * tau0 + std::sqrt(1.0 - abar) * noises[b]).eval();
            DenoiserWorkspace<float> ws;
            Eigen::MatrixXf eps_hat = denoiser_forward<float>(params, tau_t, ts[b], sample.features, ws);
            Eigen::MatrixXf resid = eps_hat - noises[b];
            double sample_loss = resid.cast<double>().squaredNorm();
            if (!std::isfinite(sample_loss)) {
                bad_sample[k] = b;
                continue;
            }
            loss_slots[k] = sample_loss;
            if (grads) {
                grad_slots[k].set_zero();
                Eigen::MatrixXf d_out = (2.0f / static_cast<float>(B)) * resid;
                denoiser_backward<float>(params, ws, d_out, grad_slots[k]);
            }
        }
        for (int k = 0; k < count; ++k) {
            if (bad_sample[k] >= 0)
                throw numeric_error("training sample " + std::to_string(bad_sample[k]));
            loss += loss_slots[k];
            if (grads) {
                auto dst = grads->tensors();
                auto src = grad_slots[k].tensors();
                for (std::size_t i = 0; i < dst.size(); ++i)
                    Eigen::Map<Eigen::MatrixXf>(dst[i].data, dst[i].rows, dst[i].cols) +=
                        Eigen::Map<const Eigen::MatrixXf>(src[i].data, src[i].rows, src[i].cols);
            }
        }
    }
    return loss / B;
}

namespace {

// Adam with double-precision moments; parameters stay float32.
struct AdamState {
    std::vector<Eigen::ArrayXXd> m, v;
    int step = 0;

    void init(DenoiserParams& params) {
        for (auto& t : params.tensors()) {
            m.emplace_back(Eigen::ArrayXXd::Zero(t.rows, t.cols));
            v.emplace_back(Eigen::ArrayXXd::Zero(t.rows, t.cols));
        }
    }

    void update(DenoiserParams& params, const DenoiserParams& grads, double lr) {
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++step;
        auto ps = params.tensors();
        auto gs = grads.tensors();
        double bc1 = 1.0 - std::pow(b1, step);
        double bc2 = 1.0 - std::pow(b2, step);
        for (std::size_t i = 0; i < ps.size(); ++i) {
            Eigen::Map<Eigen::MatrixXf> p(ps[i].data, ps[i].rows, ps[i].cols);
            Eigen::Map<const Eigen::MatrixXf> g(gs[i].data, gs[i].rows, gs[i].cols);
            Eigen::ArrayXXd gd = g.cast<double>().array();
            m[i] = b1 * m[i] + (1.0 - b1) * gd;
            v[i] = b2 * v[i] + (1.0 - b2) * gd.square();
            Eigen::ArrayXXd stepv = lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            p.array() -= stepv.cast<float>();
        }
    }
};

double holdout_loss(const DenoiserParams& params, const NoiseSchedule& schedule,
                    const std::vector<TrainSample>& holdout, const Normalizer& normalizer,
                    const std::vector<int>& ts, const std::vector<Eigen::MatrixXf>& noises,
                    int threads) {
    if (holdout.empty()) return 0.0;
    const int B = static_cast<int>(holdout.size());
    std::vector<double> losses(B, 0.0);
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int b = 0; b < B; ++b) {
        Eigen::MatrixXf tau0 = normalizer.normalize(holdout[b].traj_base).cast<float>();
        double abar = schedule.alpha_bar(ts[b]);
        Eigen::MatrixXf tau_t = (std::sqrt(abar) * tau0 + std::sqrt(1.0 - abar) * noises[b]).eval();
        DenoiserWorkspace<float> ws;
        Eigen::MatrixXf eps_hat =
            denoiser_forward<float>(params, tau_t, ts[b], holdout[b].features, ws);
        losses[b] = (eps_hat - noises[b]).cast<double>().squaredNorm();
    }
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / B;
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& holdout_set, const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) throw dimension_error("training set is empty");
    const int H = static_cast<int>(train_set[0].traj_base.rows());
    const int d = static_cast<int>(train_set[0].traj_base.cols());
    const int threads = resolve_threads(config.threads);

    TrainResult result;
    result.schedule = NoiseSchedule::linear(config.T);
    std::vector<Trajectory> trajs;
    trajs.reserve(train_set.size());
    for (const TrainSample& s : train_set) trajs.push_back(s.traj_base);
    result.normalizer = Normalizer::fit(trajs);
    result.params.init(d, H, sub_seed(config.seed, 0xA11C));

    // fixed holdout draws keep the validation curve comparable across epochs
    Rng holdout_rng(sub_seed(config.seed, 0x401D));
    std::vector<int> hold_ts(holdout_set.size());
    std::vector<Eigen::MatrixXf> hold_noise(holdout_set.size());
    for (std::size_t b = 0; b < holdout_set.size(); ++b) {
        hold_ts[b] = 1 + static_cast<int>(holdout_rng.uniform_index(config.T));
        hold_noise[b] = holdout_rng.gaussian_matrix(H, d).cast<float>();
    }

    Rng rng(sub_seed(config.seed, 0x7341));
    AdamState adam;
    adam.init(result.params);
    DenoiserParams grads;
    grads.cast_from(result.params);

    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::vector<const TrainSample*> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
                batch.push_back(&train_set[order[i]]);
            double loss = training_loss(result.params, result.schedule, batch, result.normalizer,
                                        rng, &grads, threads);
            adam.update(result.params, grads, config.learning_rate);
            epoch_loss += loss;
            ++batches;
        }
        double hold = holdout_loss(result.params, result.schedule, holdout_set, result.normalizer,
                                   hold_ts, hold_noise, threads);
        result.curve.push_back({epoch, epoch_loss / std::max(batches, 1), hold});
    }

    if (!config.loss_curve_path.empty()) {
        std::ofstream f(config.loss_curve_path, std::ios::binary);
        if (!f) throw artifact_error("cannot write loss curve: " + config.loss_curve_path);
        f << "epoch,train_loss,holdout_loss\n";
        char line[128];
        for (const auto& p : result.curve) {
            std::snprintf(line, sizeof(line), "%d,%.9g,%.9g\n", p.epoch, p.train_loss,
                          p.holdout_loss);
            f << line;
        }
    }
    return result;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    njson header;
    header["schema_version"] = 1;
    header["d"] = ckpt.dof;
    header["H"] = ckpt.horizon;
    header["T"] = ckpt.schedule.T;
    header["arch"] = {{"enc_width", ckpt.params.enc_width},
                      {"code_dim", ckpt.params.code_dim},
                      {"time_dim", ckpt.params.time_dim},
                      {"token_dim", ckpt.params.token_dim},
                      {"block_width", ckpt.params.block_width},
                      {"n_blocks", ckpt.params.n_blocks}};
    header["normalizer"] = {
        {"min", std::vector<double>(ckpt.normalizer.minimum.begin(), ckpt.normalizer.minimum.end())},
        {"max", std::vector<double>(ckpt.normalizer.maximum.begin(), ckpt.normalizer.maximum.end())}};
    header["schedule"] = {{"betas", ckpt.schedule.betas}};

    njson manifest = njson::array();
    std::size_t offset = 0;
    auto tensors = ckpt.params.tensors();
    for (const auto& t : tensors) {
        manifest.push_back({{"name", t.name},
                            {"shape", {t.rows, t.cols}},
                            {"byte_offset", offset}});
        offset += static_cast<std::size_t>(t.rows) * t.cols * sizeof(float);
    }
    header["manifest"] = manifest;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw artifact_error("cannot write checkpoint: " + path);
    f << header.dump() << "\n";
    // row-major tensor serialization
    for (const auto& t : tensors) {
        Eigen::Map<const Eigen::MatrixXf> m(t.data, t.rows, t.cols);
        for (Eigen::Index r = 0; r < t.rows; ++r)
            for (Eigen::Index c = 0; c < t.cols; ++c) {
                float v = m(r, c);
                f.write(reinterpret_cast<const char*>(&v), sizeof(float));
            }
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw artifact_error("missing checkpoint: " + path);
    std::string header_line;
    if (!std::getline(f, header_line)) throw input_error("checkpoint missing header");
    njson header;
    try {
        header = njson::parse(header_line);
    } catch (const std::exception& e) {
        throw input_error(std::string("checkpoint header parse failure: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.dof = header.at("d").get<int>();
    ckpt.horizon = header.at("H").get<int>();
    const njson& arch = header.at("arch");
    ckpt.params.enc_width = arch.at("enc_width").get<int>();
    ckpt.params.code_dim = arch.at("code_dim").get<int>();
    ckpt.params.time_dim = arch.at("time_dim").get<int>();
    ckpt.params.token_dim = arch.at("token_dim").get<int>();
    ckpt.params.block_width = arch.at("block_width").get<int>();
    ckpt.params.n_blocks = arch.at("n_blocks").get<int>();
    ckpt.params.init(ckpt.dof, ckpt.horizon, 0);

    auto mins = header.at("normalizer").at("min").get<std::vector<double>>();
    auto maxs = header.at("normalizer").at("max").get<std::vector<double>>();
    ckpt.normalizer.minimum = Eigen::Map<Vec>(mins.data(), mins.size());
    ckpt.normalizer.maximum = Eigen::Map<Vec>(maxs.data(), maxs.size());
    ckpt.normalizer.validate();

    auto betas = header.at("schedule").at("betas").get<std::vector<double>>();
    NoiseSchedule& s = ckpt.schedule;
    s.T = static_cast<int>(betas.size());
    s.betas = betas;
    s.alphas.resize(s.T);
    s.alpha_bars.resize(s.T);
    double abar = 1.0;
    for (int i = 0; i < s.T; ++i) {
        s.alphas[i] = 1.0 - s.betas[i];
        abar *= s.alphas[i];
        s.alpha_bars[i] = abar;
    }
    s.posterior_vars.resize(s.T);
    for (int t = 1; t <= s.T; ++t) {
        double abar_prev = (t == 1) ? 1.0 : s.alpha_bars[t - 2];
        s.posterior_vars[t - 1] = (1.0 - abar_prev) / (1.0 - s.alpha_bars[t - 1]) * s.betas[t - 1];
    }
    s.posterior_vars[0] = s.posterior_vars.size() > 1 ? s.posterior_vars[1] : s.betas[0];
    s.validate();

    auto tensors = ckpt.params.tensors();
    const njson& manifest = header.at("manifest");
    if (manifest.size() != tensors.size()) throw input_error("checkpoint manifest size mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const njson& entry = manifest[i];
        if (entry.at("name").get<std::string>() != tensors[i].name)
            throw input_error("checkpoint manifest order mismatch");
        Eigen::Index rows = entry.at("shape").at(0).get<Eigen::Index>();
        Eigen::Index cols = entry.at("shape").at(1).get<Eigen::Index>();
        if (rows != tensors[i].rows || cols != tensors[i].cols)
            throw dimension_error("checkpoint tensor shape mismatch for " + tensors[i].name);
        Eigen::Map<Eigen::MatrixXf> m(tensors[i].data, rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                float v;
                f.read(reinterpret_cast<char*>(&v), sizeof(float));
                if (!f) throw input_error("checkpoint blob truncated");
                m(r, c) = v;
            }
    }
    if (!ckpt.params.all_finite()) throw input_error("checkpoint contains non-finite parameters");
    return ckpt;
}

}  // namespace diffplan
