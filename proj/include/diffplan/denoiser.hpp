#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffplan/common.hpp"
#include "diffplan/scene.hpp"

namespace diffplan {

// Noise-prediction network over normalized trajectories:
//   - scene encoder: per-point 2-layer transform (widths 64/64) with an exact
//     permutation-invariant max pool to a 64-d scene code
//   - sinusoidal embeddings: diffusion step (128-d) and trajectory row (128-d)
//   - per-row token embed d -> 128, four width-256 residual blocks fused with
//     the projected (scene code ++ time embedding) by addition, head 128 -> d
// The scalar type is templated so tests can instantiate a float64 twin of the
// float32 production network for finite-difference verification.

// Per-point input features: normalized coordinates, sinusoidal coordinate
// features at four spatial frequencies per axis, and the one-hot point class.
constexpr int kSceneFeatureBaseFreqs = 4;
constexpr int kSceneFeatureDim = 2 + 4 * kSceneFeatureBaseFreqs + 4;

template <class Real>
struct DenoiserNetT {
    using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    using VecR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

    int dof = 0;
    int horizon = 0;
    int enc_width = 64;
    int code_dim = 64;
    int time_dim = 128;
    int token_dim = 128;
    int block_width = 256;
    int n_blocks = 4;

    MatR enc1_w; VecR enc1_b;
    MatR enc2_w; VecR enc2_b;
    MatR tok_w;  VecR tok_b;
    struct Block {
        MatR cond_w; VecR cond_b;  // projects (code ++ time embedding) into the block
        MatR w1; VecR b1;
        MatR w2; VecR b2;
    };
    std::vector<Block> blocks;
    MatR head_w; VecR head_b;

    void init(int dof_, int horizon_, std::uint64_t seed);
    void set_zero();
    bool all_finite() const;

    // flat parameter access in a fixed tensor order, used by the optimizer,
    // checkpoints and finite-difference probes
    std::size_t parameter_count() const;
    struct TensorRef {
        std::string name;
        Real* data;
        Eigen::Index rows, cols;  // cols == 1 for vectors
    };
    struct ConstTensorRef {
        std::string name;
        const Real* data;
        Eigen::Index rows, cols;
    };
    std::vector<TensorRef> tensors();
    std::vector<ConstTensorRef> tensors() const;

    template <class Other>
    void cast_from(const DenoiserNetT<Other>& other);
};

using DenoiserParams = DenoiserNetT<float>;

// Scene points packed as feature columns (kSceneFeatureDim x M).
template <class Real>
Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> encode_scene_features(const ScenePoints& pts);

template <class Real>
struct DenoiserWorkspace {
    using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    using VecR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
    MatR u1, a1, u2, a2;                 // encoder pre/post activations per point
    std::vector<Eigen::Index> argmax;    // pooled source per code unit
    VecR code, cond_in;
    std::vector<VecR> cond;              // per-block projected conditioning
    MatR x0;                             // tokens (token_dim x H)
    std::vector<MatR> block_u, block_a, block_x;  // per block
    MatR x_final;
    MatR features;                       // cached scene features used in the pass
    MatR traj_input;                     // cached trajectory input (H x d)
};

/// Forward pass; output is H x d noise prediction. `ws` caches activations for
/// the backward pass.
template <class Real>
Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> denoiser_forward(
    const DenoiserNetT<Real>& net, const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& traj,
    int t, const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& scene_features,
    DenoiserWorkspace<Real>& ws);

/// Accumulate parameter gradients of sum(d_out .* output) into `grads`.
template <class Real>
void denoiser_backward(const DenoiserNetT<Real>& net, const DenoiserWorkspace<Real>& ws,
                       const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& d_out,
                       DenoiserNetT<Real>& grads);

/// Convenience forward without retaining a workspace.
Mat predict_noise(const DenoiserParams& net, const Mat& traj_normalized, int t,
                  const ScenePoints& scene);

}  // namespace diffplan
