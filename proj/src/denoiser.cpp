#include "diffplan/denoiser.hpp"

namespace diffplan {

namespace {

template <class Real>
Eigen::Matrix<Real, Eigen::Dynamic, 1> sinusoidal_embedding(int dim, Real value) {
    Eigen::Matrix<Real, Eigen::Dynamic, 1> out(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        Real freq = std::exp(Real(-std::log(10000.0)) * Real(i) / Real(half));
        out[i] = std::sin(value * freq);
        out[half + i] = std::cos(value * freq);
    }
    return out;
}

template <class Real>
inline Real sigmoid(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

template <class Real, class Derived>
auto silu(const Eigen::MatrixBase<Derived>& x) {
    return x.derived().unaryExpr([](Real v) { return v * sigmoid(v); });
}

template <class Real, class Derived>
auto silu_deriv(const Eigen::MatrixBase<Derived>& x) {
    return x.derived().unaryExpr([](Real v) {
        Real s = sigmoid(v);
        return s * (Real(1) + v * (Real(1) - s));
    });
}

}  // namespace

template <class Real>
void DenoiserNetT<Real>::init(int dof_, int horizon_, std::uint64_t seed) {
    dof = dof_;
    horizon = horizon_;
    Rng rng(seed);
    auto randn = [&](MatR& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        Real scale = Real(1) / std::sqrt(Real(cols));
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = Real(rng.gaussian()) * scale;
    };
    auto zeros = [](VecR& v, Eigen::Index n) { v = VecR::Zero(n); };

    randn(enc1_w, enc_width, kSceneFeatureDim);
    zeros(enc1_b, enc_width);
    randn(enc2_w, code_dim, enc_width);
    zeros(enc2_b, code_dim);
    randn(tok_w, token_dim, dof);
    zeros(tok_b, token_dim);
    blocks.resize(n_blocks);
    for (auto& b : blocks) {
        randn(b.cond_w, block_width, code_dim + time_dim);
        zeros(b.cond_b, block_width);
        randn(b.w1, block_width, token_dim);
        zeros(b.b1, block_width);
        randn(b.w2, token_dim, block_width);
        zeros(b.b2, token_dim);
    }
    // zero head: an untrained model predicts zero noise
    head_w = MatR::Zero(dof, token_dim);
    head_b = VecR::Zero(dof);
}

template <class Real>
void DenoiserNetT<Real>::set_zero() {
    for (auto& t : tensors())
        Eigen::Map<MatR>(t.data, t.rows, t.cols).setZero();
}

template <class Real>
bool DenoiserNetT<Real>::all_finite() const {
    for (const auto& t : tensors()) {
        Eigen::Map<const MatR> m(t.data, t.rows, t.cols);
        if (!m.allFinite()) return false;
    }
    return true;
}

template <class Real>
std::size_t DenoiserNetT<Real>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += static_cast<std::size_t>(t.rows) * t.cols;
    return n;
}

template <class Real>
std::vector<typename DenoiserNetT<Real>::TensorRef> DenoiserNetT<Real>::tensors() {
    std::vector<TensorRef> out;
    auto add_m = [&](const std::string& name, MatR& m) {
        out.push_back({name, m.data(), m.rows(), m.cols()});
    };
    auto add_v = [&](const std::string& name, VecR& v) {
        out.push_back({name, v.data(), v.rows(), 1});
    };
    add_m("enc1.w", enc1_w);
    add_v("enc1.b", enc1_b);
    add_m("enc2.w", enc2_w);
    add_v("enc2.b", enc2_b);
    add_m("tok.w", tok_w);
    add_v("tok.b", tok_b);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        std::string p = "block" + std::to_string(i);
        add_m(p + ".cond.w", blocks[i].cond_w);
        add_v(p + ".cond.b", blocks[i].cond_b);
        add_m(p + ".w1", blocks[i].w1);
        add_v(p + ".b1", blocks[i].b1);
        add_m(p + ".w2", blocks[i].w2);
        add_v(p + ".b2", blocks[i].b2);
    }
    add_m("head.w", head_w);
    add_v("head.b", head_b);
    return out;
}

template <class Real>
std::vector<typename DenoiserNetT<Real>::ConstTensorRef> DenoiserNetT<Real>::tensors() const {
    std::vector<ConstTensorRef> out;
    for (auto& t : const_cast<DenoiserNetT<Real>*>(this)->tensors())
        out.push_back({t.name, t.data, t.rows, t.cols});
    return out;
}

template <class Real>
template <class Other>
void DenoiserNetT<Real>::cast_from(const DenoiserNetT<Other>& other) {
    dof = other.dof;
    horizon = other.horizon;
    enc_width = other.enc_width;
    code_dim = other.code_dim;
    time_dim = other.time_dim;
    token_dim = other.token_dim;
    block_width = other.block_width;
    n_blocks = other.n_blocks;
    init(dof, horizon, 0);  // allocate shapes
    auto dst = tensors();
    auto src = other.tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        Eigen::Map<MatR> d(dst[i].data, dst[i].rows, dst[i].cols);
        Eigen::Map<const Eigen::Matrix<Other, Eigen::Dynamic, Eigen::Dynamic>> s(
            src[i].data, src[i].rows, src[i].cols);
        d = s.template cast<Real>();
    }
}

template <class Real>
Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> encode_scene_features(const ScenePoints& pts) {
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> f(kSceneFeatureDim, pts.points.cols());
    f.setZero();
    constexpr double kCoordScale = 6.0;  // room-scale normalization, meters
    for (Eigen::Index m = 0; m < pts.points.cols(); ++m) {
        double x = pts.points(0, m), y = pts.points(1, m);
        int row = 0;
        f(row++, m) = static_cast<Real>(x / kCoordScale);
        f(row++, m) = static_cast<Real>(y / kCoordScale);
        for (int k = 0; k < kSceneFeatureBaseFreqs; ++k) {
            double omega = M_PI * (1 << k) / kCoordScale;
            f(row++, m) = static_cast<Real>(std::sin(omega * x));
            f(row++, m) = static_cast<Real>(std::cos(omega * x));
            f(row++, m) = static_cast<Real>(std::sin(omega * y));
            f(row++, m) = static_cast<Real>(std::cos(omega * y));
        }
        f(row + static_cast<int>(pts.classes[static_cast<std::size_t>(m)]), m) = Real(1);
    }
    return f;
}

template <class Real>
Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> denoiser_forward(
    const DenoiserNetT<Real>& net, const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& traj,
    int t, const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& scene_features,
    DenoiserWorkspace<Real>& ws) {
    using MatR = typename DenoiserNetT<Real>::MatR;
    using VecR = typename DenoiserNetT<Real>::VecR;
    if (traj.rows() != net.horizon || traj.cols() != net.dof)
        throw dimension_error("denoiser input shape != (H, d)");
    if (scene_features.rows() != kSceneFeatureDim)
        throw dimension_error("scene feature rows != feature dim");

    const Eigen::Index M = scene_features.cols();
    const Eigen::Index H = traj.rows();

    ws.features = scene_features;
    ws.u1.noalias() = net.enc1_w * scene_features;
    ws.u1.colwise() += net.enc1_b;
    ws.a1 = silu<Real>(ws.u1);
    ws.u2.noalias() = net.enc2_w * ws.a1;
    ws.u2.colwise() += net.enc2_b;
    ws.a2 = silu<Real>(ws.u2);

    ws.code.resize(net.code_dim);
    ws.argmax.assign(static_cast<std::size_t>(net.code_dim), 0);
    for (int j = 0; j < net.code_dim; ++j) {
        Eigen::Index best = 0;
        Real best_v = ws.a2(j, 0);
        for (Eigen::Index m = 1; m < M; ++m)
            if (ws.a2(j, m) > best_v) {
                best_v = ws.a2(j, m);
                best = m;
            }
        ws.code[j] = best_v;
        ws.argmax[static_cast<std::size_t>(j)] = best;
    }

    ws.cond_in.resize(net.code_dim + net.time_dim);
    ws.cond_in.head(net.code_dim) = ws.code;
    ws.cond_in.tail(net.time_dim) = sinusoidal_embedding<Real>(net.time_dim, Real(t));
    ws.cond.resize(net.blocks.size());
    for (std::size_t b = 0; b < net.blocks.size(); ++b) {
        ws.cond[b].noalias() = net.blocks[b].cond_w * ws.cond_in;
        ws.cond[b] += net.blocks[b].cond_b;
    }

    ws.traj_input = traj;
    ws.x0.noalias() = net.tok_w * traj.transpose();
    ws.x0.colwise() += net.tok_b;
    for (Eigen::Index h = 0; h < H; ++h)
        ws.x0.col(h) += sinusoidal_embedding<Real>(net.token_dim, Real(h));

    ws.block_u.resize(net.blocks.size());
    ws.block_a.resize(net.blocks.size());
    ws.block_x.resize(net.blocks.size());
    MatR x = ws.x0;
    for (std::size_t b = 0; b < net.blocks.size(); ++b) {
        ws.block_x[b] = x;
        MatR& u = ws.block_u[b];
        u.noalias() = net.blocks[b].w1 * x;
        u.colwise() += net.blocks[b].b1 + ws.cond[b];
        ws.block_a[b] = silu<Real>(u);
        x.noalias() += net.blocks[b].w2 * ws.block_a[b];
        x.colwise() += net.blocks[b].b2;
    }
    ws.x_final = x;

    MatR out_cols;  // d x H
    out_cols.noalias() = net.head_w * x;
    out_cols.colwise() += net.head_b;
    return out_cols.transpose();
}

template <class Real>
void denoiser_backward(const DenoiserNetT<Real>& net, const DenoiserWorkspace<Real>& ws,
                       const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& d_out,
                       DenoiserNetT<Real>& grads) {
    using MatR = typename DenoiserNetT<Real>::MatR;
    using VecR = typename DenoiserNetT<Real>::VecR;

    MatR D = d_out.transpose();  // d x H
    grads.head_w.noalias() += D * ws.x_final.transpose();
    grads.head_b += D.rowwise().sum();

    MatR dx;
    dx.noalias() = net.head_w.transpose() * D;  // token_dim x H
    VecR dcond_in = VecR::Zero(net.code_dim + net.time_dim);
    for (std::size_t bi = net.blocks.size(); bi-- > 0;) {
        const auto& b = net.blocks[bi];
        auto& gb = grads.blocks[bi];
        MatR da;
        da.noalias() = b.w2.transpose() * dx;
        gb.w2.noalias() += dx * ws.block_a[bi].transpose();
        gb.b2 += dx.rowwise().sum();
        MatR du = da.array() * silu_deriv<Real>(ws.block_u[bi]).array();
        gb.w1.noalias() += du * ws.block_x[bi].transpose();
        VecR du_sum = du.rowwise().sum();
        gb.b1 += du_sum;
        gb.cond_w.noalias() += du_sum * ws.cond_in.transpose();
        gb.cond_b += du_sum;
        dcond_in.noalias() += b.cond_w.transpose() * du_sum;
        dx.noalias() += b.w1.transpose() * du;
    }

    // dx is now the gradient at the tokens
    grads.tok_b += dx.rowwise().sum();
    grads.tok_w.noalias() += dx * ws.traj_input;

    MatR da2 = MatR::Zero(net.code_dim, ws.a2.cols());
    for (int j = 0; j < net.code_dim; ++j)
        da2(j, ws.argmax[static_cast<std::size_t>(j)]) += dcond_in[j];
    MatR du2 = da2.array() * silu_deriv<Real>(ws.u2).array();
    grads.enc2_w.noalias() += du2 * ws.a1.transpose();
    grads.enc2_b += du2.rowwise().sum();
    MatR da1;
    da1.noalias() = net.enc2_w.transpose() * du2;
    MatR du1 = da1.array() * silu_deriv<Real>(ws.u1).array();
    grads.enc1_w.noalias() += du1 * ws.features.transpose();
    grads.enc1_b += du1.rowwise().sum();
}

Mat predict_noise(const DenoiserParams& net, const Mat& traj_normalized, int t,
                  const ScenePoints& scene) {
    DenoiserWorkspace<float> ws;
    Eigen::MatrixXf traj_f = traj_normalized.cast<float>();
    Eigen::MatrixXf features = encode_scene_features<float>(scene);
    Eigen::MatrixXf out = denoiser_forward<float>(net, traj_f, t, features, ws);
    return out.cast<double>();
}

// explicit instantiations: float is the production type, double backs the
// finite-difference gradient checks
template struct DenoiserNetT<float>;
template struct DenoiserNetT<double>;
template void DenoiserNetT<float>::cast_from<double>(const DenoiserNetT<double>&);
template void DenoiserNetT<double>::cast_from<float>(const DenoiserNetT<float>&);
template void DenoiserNetT<float>::cast_from<float>(const DenoiserNetT<float>&);
template void DenoiserNetT<double>::cast_from<double>(const DenoiserNetT<double>&);
template Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> encode_scene_features<float>(
    const ScenePoints&);
template Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> encode_scene_features<double>(
    const ScenePoints&);
template Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> denoiser_forward<float>(
    const DenoiserNetT<float>&, const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&, int,
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&, DenoiserWorkspace<float>&);
template Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> denoiser_forward<double>(
    const DenoiserNetT<double>&, const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&, int,
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&, DenoiserWorkspace<double>&);
template void denoiser_backward<float>(const DenoiserNetT<float>&, const DenoiserWorkspace<float>&,
                                       const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&,
                                       DenoiserNetT<float>&);
template void denoiser_backward<double>(const DenoiserNetT<double>&,
                                        const DenoiserWorkspace<double>&,
                                        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&,
                                        DenoiserNetT<double>&);

}  // namespace diffplan
