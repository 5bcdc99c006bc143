#pragma once

// Geometry-aware encoder, top-down feature pyramid and the location heatmap
// head. The encoder is a stride-2 stem followed by four stages (stride-2 conv
// + stride-1 conv, each with ReLU), so its outputs C2..C5 sit at strides
// 4, 8, 16 and 32. The pyramid fuses them into one stride-4 map.

#include "e3g/geometry.hpp"
#include "e3g/layers.hpp"

#include <array>
#include <random>
#include <vector>

namespace e3g {

inline constexpr int kHeatmapStride = 4;

struct EncoderConfig {
    std::vector<int> stage_channels{16, 32, 64, 128};
    int input_channels = 6;
    int input_h = 96;
    int input_w = 96;
    int fpn_channels = 64;
    int head_channels = 32;

    void validate() const;
    int heatmap_h() const { return input_h / kHeatmapStride; }
    int heatmap_w() const { return input_w / kHeatmapStride; }
};

/// Graspability per stride-4 cell, values in [0,1].
struct LocationHeatmap {
    Tensor values;  // [1,h,w]
    int stride = kHeatmapStride;

    std::size_t height() const { return values.dim(1); }
    std::size_t width() const { return values.dim(2); }
    float at(std::size_t v, std::size_t u) const { return values[v * width() + u]; }
};

/// The fused stride-4 scene feature map.
template <typename T>
struct BasicFeaturePyramid {
    BasicTensor<T> fused;  // [1,Cf,h,w]
};
using FeaturePyramid = BasicFeaturePyramid<float>;

template <typename T>
using EncoderFeatures = std::array<BasicTensor<T>, 4>;  // C2..C5

template <typename T>
struct EncoderCache {
    ConvCache<T> stem;
    std::array<ConvCache<T>, 4> down;
    std::array<ConvCache<T>, 4> conv;
};

template <typename T>
struct FpnCache {
    std::array<ConvCache<T>, 4> lateral;
    ConvCache<T> smooth;
};

template <typename T>
struct HeadCache {
    ConvCache<T> conv;
    ConvCache<T> out;
    BasicTensor<T> prob;
};

ParameterSet init_backbone_params(const EncoderConfig& cfg, std::mt19937_64& rng);

/// input [1,6,H,W] -> C2..C5.
template <typename T>
EncoderFeatures<T> encoder_forward(const BasicTensor<T>& input, const BasicParameterSet<T>& params,
                                   const EncoderConfig& cfg, EncoderCache<T>* cache = nullptr);

/// Returns the gradient w.r.t. the encoder input.
template <typename T>
BasicTensor<T> encoder_backward(const BasicParameterSet<T>& params, const EncoderConfig& cfg,
                                const EncoderCache<T>& cache, const EncoderFeatures<T>& grad_levels,
                                BasicLayerGrads<T>& grads);

template <typename T>
BasicFeaturePyramid<T> fpn_forward(const EncoderFeatures<T>& levels, const BasicParameterSet<T>& params,
                                   const EncoderConfig& cfg, FpnCache<T>* cache = nullptr);

template <typename T>
EncoderFeatures<T> fpn_backward(const BasicParameterSet<T>& params, const EncoderConfig& cfg, const FpnCache<T>& cache,
                                const BasicTensor<T>& grad_fused, BasicLayerGrads<T>& grads);

/// 3x3 conv -> ReLU -> 1x1 conv -> sigmoid. Output [1,1,h,w].
template <typename T>
BasicTensor<T> heatmap_head_forward(const BasicFeaturePyramid<T>& pyramid, const BasicParameterSet<T>& params,
                                    HeadCache<T>* cache = nullptr);

/// grad_prob is the gradient w.r.t. the sigmoid output. Returns d(fused).
template <typename T>
BasicTensor<T> heatmap_head_backward(const BasicParameterSet<T>& params, const HeadCache<T>& cache,
                                     const BasicTensor<T>& grad_prob, BasicLayerGrads<T>& grads);

LocationHeatmap heatmap_head(const FeaturePyramid& pyramid, const ParameterSet& params);

/// Heatmap cell coordinate of an image pixel coordinate, and back.
inline double image_to_heatmap(double px) { return (px + 0.5) / kHeatmapStride - 0.5; }
inline double heatmap_to_image(double cell) { return (cell + 0.5) * kHeatmapStride - 0.5; }

struct HeatmapTarget {
    LocationHeatmap heatmap;
    int skipped = 0;  // labels behind the camera or outside the image
};

/// Gaussian splat (sigma in cells) at each label's projected cell, max-combined.
HeatmapTarget make_gt_heatmap(const std::vector<GraspPose>& labels, const CameraIntrinsics& intrinsics,
                              double sigma = 2.0);

}  // namespace e3g
