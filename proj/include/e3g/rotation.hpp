#pragma once

// Regional rotation heatmaps over (gamma, beta) anchors, per-cell refinement
// (theta, width, center offsets), grasp decoding and grasp NMS.

#include "e3g/region.hpp"

#include <vector>

namespace e3g {

inline constexpr int kRefineChannels = 6;  // score, theta, width, du, dv, dd
inline constexpr double kMaxDepthOffset = 0.02;
inline constexpr double kMaxPlaneOffset = 1.0;  // heatmap cells

struct AnchorGrid {
    std::vector<double> gamma;
    std::vector<double> beta;

    int size_gamma() const { return static_cast<int>(gamma.size()); }
    int size_beta() const { return static_cast<int>(beta.size()); }
    int cells() const { return size_gamma() * size_beta(); }
};

/// Bin centers -pi/2 + (i + 0.5) pi / A.
AnchorGrid build_anchor_grid(int a_gamma, int a_beta);

/// Bin of an angle in [-pi/2, pi/2]; an angle on a bin boundary goes to the lower bin.
int anchor_bin(double angle, int count);

struct RotationHeadConfig {
    int a_gamma = 6;
    int a_beta = 6;
    int hidden = 256;
};

/// Per region, per (gamma, beta) cell.
struct RotationOutput {
    Tensor scores;  // [k,Ag,Ab] in [0,1]
    Tensor theta;   // [k,Ag,Ab] radians
    Tensor width;   // meters
    Tensor offset_u, offset_v;  // heatmap cells
    Tensor offset_d;            // meters
};

ParameterSet init_rotation_params(const RotationHeadConfig& cfg, std::size_t region_feature_dim, std::mt19937_64& rng);

template <typename T>
struct RotationCache {
    BasicTensor<T> input;   // [k, D]
    BasicTensor<T> hidden_pre;
    BasicTensor<T> hidden;
};

/// Region features [k,Cf,g,g] -> raw head logits [k, Ag*Ab*6], channel-last.
template <typename T>
BasicTensor<T> rotation_head_logits(const BasicTensor<T>& region_features, const BasicParameterSet<T>& params,
                                    RotationCache<T>* cache = nullptr);

/// Gradient of the logits back to the region features.
template <typename T>
BasicTensor<T> rotation_head_backward(const BasicParameterSet<T>& params, const RotationCache<T>& cache,
                                      const BasicTensor<T>& grad_logits, const Shape& region_shape,
                                      BasicLayerGrads<T>& grads);

/// Bounded activations: sigmoid score, pi/2 tanh theta, w_max (tanh + 1) / 2
/// width, tanh in-plane offsets, 0.02 tanh depth offset.
RotationOutput activate_rotation_logits(const Tensor& logits, const RotationHeadConfig& cfg);

RotationOutput rotation_head_forward(const RegionBatch& regions, const ParameterSet& params,
                                     const RotationHeadConfig& cfg);

/// Dense targets for one batch of regions. Refinement targets are stored in
/// the normalized [-1,1] space the tanh outputs live in.
struct RotationTarget {
    Tensor scores;   // [k,Ag,Ab] in {0,1}
    Tensor refine;   // [k,Ag,Ab,5]: theta, width, du, dv, dd (normalized)
    Tensor mask;     // [k,Ag,Ab,5]: 1 on positive cells
    int assigned_labels = 0;
};

/// Each label goes to its nearest region center (by projected heatmap
/// position) if it lies within s/2 cells of it. A cell is positive when an
/// assigned label's (gamma, beta) falls in its bin; the label nearest the
/// cell's anchor angles supplies the refinement targets.
RotationTarget make_gt_rotation(const std::vector<GraspPose>& labels, const std::vector<RegionCenter>& centers,
                                const std::vector<float>& sizes, const AnchorGrid& anchors,
                                const CameraIntrinsics& intrinsics);

template <typename T>
struct RotationLoss {
    T classification{};  // BCE over all cells
    T refinement{};      // smooth-L1 over positive cells, normalized space
    BasicTensor<T> grad_logits;
};

/// Both rotation-head losses and their gradient w.r.t. the raw logits.
template <typename T>
RotationLoss<T> rotation_losses(const BasicTensor<T>& logits, const RotationTarget& target, T beta = T(0.1));

struct DecodeStats {
    int depth_fallbacks = 0;
};

/// Cells scoring >= score_thresh become grasps, sorted by score (descending).
std::vector<GraspPose> decode_grasps(const RotationOutput& out, const std::vector<RegionCenter>& centers,
                                     const AnchorGrid& anchors, const ImageFrame& frame, float score_thresh,
                                     DecodeStats* stats = nullptr);

/// Only the best cell of each region (plain anchor classification).
std::vector<GraspPose> decode_argmax_grasps(const RotationOutput& out, const std::vector<RegionCenter>& centers,
                                            const AnchorGrid& anchors, const ImageFrame& frame, float score_thresh,
                                            DecodeStats* stats = nullptr);

struct NmsConfig {
    double translation_m = 0.03;
    double rotation_rad = 30.0 * 3.14159265358979323846 / 180.0;
};

/// Greedy: a grasp is dropped if an already-kept grasp is closer than both
/// thresholds. Input must be sorted by score, descending.
std::vector<GraspPose> grasp_nms(const std::vector<GraspPose>& grasps, const NmsConfig& cfg = {});

void sort_by_score(std::vector<GraspPose>& grasps);

}  // namespace e3g
