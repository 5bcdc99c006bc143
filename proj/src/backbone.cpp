#include "e3g/backbone.hpp"

#include <cmath>
#include <string>

namespace e3g {

namespace {

ConvSpec stem_spec() { return {"encoder.stem", 2, 1, true}; }
ConvSpec down_spec(int i) { return {"encoder.stage" + std::to_string(i + 1) + ".down", 2, 1, true}; }
ConvSpec stage_conv_spec(int i) { return {"encoder.stage" + std::to_string(i + 1) + ".conv", 1, 1, true}; }
ConvSpec lateral_spec(int i) { return {"fpn.lateral" + std::to_string(i + 2), 1, 0, false}; }
ConvSpec smooth_spec() { return {"fpn.smooth", 1, 1, false}; }
ConvSpec head_conv_spec() { return {"head.conv", 1, 1, true}; }
ConvSpec head_out_spec() { return {"head.out", 1, 0, false}; }

}  // namespace

void EncoderConfig::validate() const
{
    if (stage_channels.size() != 4) throw std::invalid_argument("encoder: exactly 4 stages required");
    for (std::size_t i = 0; i < 4; ++i) {
        if (stage_channels[i] < 1) throw std::invalid_argument("encoder: stage channels must be positive");
        if (i && stage_channels[i] <= stage_channels[i - 1])
            throw std::invalid_argument("encoder: stage channels must be strictly increasing");
    }
    if (input_channels != 6) throw std::invalid_argument("encoder: input must have 6 channels");
    if (input_h <= 0 || input_w <= 0 || input_h % 32 || input_w % 32)
        throw std::invalid_argument("encoder: input resolution " + std::to_string(input_h) + "x" +
                                    std::to_string(input_w) + " must be divisible by 32");
    if (fpn_channels < 1 || head_channels < 1) throw std::invalid_argument("encoder: fpn/head channels must be positive");
}

ParameterSet init_backbone_params(const EncoderConfig& cfg, std::mt19937_64& rng)
{
    cfg.validate();
    ParameterSet p;
    const auto& ch = cfg.stage_channels;
    init_conv(p, stem_spec().name, ch[0], cfg.input_channels, 3, rng);
    for (int i = 0; i < 4; ++i) {
        const int cin = i == 0 ? ch[0] : ch[i - 1];
        init_conv(p, down_spec(i).name, ch[i], cin, 3, rng);
        init_conv(p, stage_conv_spec(i).name, ch[i], ch[i], 3, rng);
        init_conv(p, lateral_spec(i).name, cfg.fpn_channels, ch[i], 1, rng);
    }
    init_conv(p, smooth_spec().name, cfg.fpn_channels, cfg.fpn_channels, 3, rng);
    init_conv(p, head_conv_spec().name, cfg.head_channels, cfg.fpn_channels, 3, rng);
    init_conv(p, head_out_spec().name, 1, cfg.head_channels, 1, rng);
    // Start the head with a low graspability prior.
    p[head_out_spec().name + ".bias"][0] = -2.0f;
    return p;
}

template <typename T>
EncoderFeatures<T> encoder_forward(const BasicTensor<T>& input, const BasicParameterSet<T>& params,
                                   const EncoderConfig& cfg, EncoderCache<T>* cache)
{
    cfg.validate();
    if (input.shape() != Shape{1, 6, static_cast<std::size_t>(cfg.input_h), static_cast<std::size_t>(cfg.input_w)})
        throw std::invalid_argument("encoder input " + input.shape().str() + " does not match configured " +
                                    std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));
    EncoderFeatures<T> levels;
    BasicTensor<T> x = conv_layer_forward(params, stem_spec(), input, cache ? &cache->stem : nullptr);
    for (int i = 0; i < 4; ++i) {
        x = conv_layer_forward(params, down_spec(i), x, cache ? &cache->down[i] : nullptr);
        x = conv_layer_forward(params, stage_conv_spec(i), x, cache ? &cache->conv[i] : nullptr);
        levels[i] = x;
    }
    return levels;
}

template <typename T>
BasicTensor<T> encoder_backward(const BasicParameterSet<T>& params, const EncoderConfig&, const EncoderCache<T>& cache,
                                const EncoderFeatures<T>& grad_levels, BasicLayerGrads<T>& grads)
{
    BasicTensor<T> g;
    for (int i = 3; i >= 0; --i) {
        g = g.empty() ? grad_levels[i] : add(g, grad_levels[i]);
        g = conv_layer_backward(params, stage_conv_spec(i), cache.conv[i], g, grads);
        g = conv_layer_backward(params, down_spec(i), cache.down[i], g, grads);
    }
    return conv_layer_backward(params, stem_spec(), cache.stem, g, grads);
}

template <typename T>
BasicFeaturePyramid<T> fpn_forward(const EncoderFeatures<T>& levels, const BasicParameterSet<T>& params,
                                   const EncoderConfig&, FpnCache<T>* cache)
{
    BasicTensor<T> top;
    for (int i = 3; i >= 0; --i) {
        BasicTensor<T> lat = conv_layer_forward(params, lateral_spec(i), levels[i], cache ? &cache->lateral[i] : nullptr);
        top = top.empty() ? std::move(lat) : add(lat, upsample_bilinear_2x(top));
    }
    return {conv_layer_forward(params, smooth_spec(), top, cache ? &cache->smooth : nullptr)};
}

template <typename T>
EncoderFeatures<T> fpn_backward(const BasicParameterSet<T>& params, const EncoderConfig&, const FpnCache<T>& cache,
                                const BasicTensor<T>& grad_fused, BasicLayerGrads<T>& grads)
{
    EncoderFeatures<T> out;
    // d(top) at each level, finest first; the sum's gradient reaches both branches.
    BasicTensor<T> g = conv_layer_backward(params, smooth_spec(), cache.smooth, grad_fused, grads);
    for (int i = 0; i < 4; ++i) {
        out[i] = conv_layer_backward(params, lateral_spec(i), cache.lateral[i], g, grads);
        if (i < 3) g = upsample_bilinear_2x_backward(g);
    }
    return out;
}

template <typename T>
BasicTensor<T> heatmap_head_forward(const BasicFeaturePyramid<T>& pyramid, const BasicParameterSet<T>& params,
                                    HeadCache<T>* cache)
{
    BasicTensor<T> x = conv_layer_forward(params, head_conv_spec(), pyramid.fused, cache ? &cache->conv : nullptr);
    x = conv_layer_forward(params, head_out_spec(), x, cache ? &cache->out : nullptr);
    BasicTensor<T> prob = sigmoid(x);
    if (cache) cache->prob = prob;
    return prob;
}

template <typename T>
BasicTensor<T> heatmap_head_backward(const BasicParameterSet<T>& params, const HeadCache<T>& cache,
                                     const BasicTensor<T>& grad_prob, BasicLayerGrads<T>& grads)
{
    BasicTensor<T> g = sigmoid_backward(cache.prob, grad_prob);
    g = conv_layer_backward(params, head_out_spec(), cache.out, g, grads);
    return conv_layer_backward(params, head_conv_spec(), cache.conv, g, grads);
}

LocationHeatmap heatmap_head(const FeaturePyramid& pyramid, const ParameterSet& params)
{
    Tensor prob = heatmap_head_forward(pyramid, params);
    const std::size_t h = prob.dim(2), w = prob.dim(3);
    return {prob.reshaped(Shape{1, h, w}), kHeatmapStride};
}

HeatmapTarget make_gt_heatmap(const std::vector<GraspPose>& labels, const CameraIntrinsics& intrinsics, double sigma)
{
    intrinsics.validate();
    const int h = intrinsics.height / kHeatmapStride, w = intrinsics.width / kHeatmapStride;
    HeatmapTarget target{{Tensor(Shape{1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}), kHeatmapStride}, 0};
    Tensor& hm = target.heatmap.values;
    const int reach = static_cast<int>(std::ceil(4.0 * sigma));
    for (const auto& g : labels) {
        if (!(g.z > 0)) {
            ++target.skipped;
            continue;
        }
        const Eigen::Vector2d px = project_point(g.translation(), intrinsics);
        const int cu = static_cast<int>(std::lround(image_to_heatmap(px.x())));
        const int cv = static_cast<int>(std::lround(image_to_heatmap(px.y())));
        if (cu < 0 || cu >= w || cv < 0 || cv >= h) {
            ++target.skipped;
            continue;
        }
        for (int v = std::max(0, cv - reach); v <= std::min(h - 1, cv + reach); ++v)
            for (int u = std::max(0, cu - reach); u <= std::min(w - 1, cu + reach); ++u) {
                const double d2 = static_cast<double>((u - cu) * (u - cu) + (v - cv) * (v - cv));
                const auto val = static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma)));
                float& cell = hm[static_cast<std::size_t>(v * w + u)];
                cell = std::max(cell, val);
            }
    }
    return target;
}

#define E3G_INSTANTIATE_BACKBONE(T)                                                                                  \
    template EncoderFeatures<T> encoder_forward(const BasicTensor<T>&, const BasicParameterSet<T>&,                  \
                                                const EncoderConfig&, EncoderCache<T>*);                             \
    template BasicTensor<T> encoder_backward(const BasicParameterSet<T>&, const EncoderConfig&,                      \
                                             const EncoderCache<T>&, const EncoderFeatures<T>&, BasicLayerGrads<T>&); \
    template BasicFeaturePyramid<T> fpn_forward(const EncoderFeatures<T>&, const BasicParameterSet<T>&,              \
                                                const EncoderConfig&, FpnCache<T>*);                                 \
    template EncoderFeatures<T> fpn_backward(const BasicParameterSet<T>&, const EncoderConfig&, const FpnCache<T>&,  \
                                             const BasicTensor<T>&, BasicLayerGrads<T>&);                            \
    template BasicTensor<T> heatmap_head_forward(const BasicFeaturePyramid<T>&, const BasicParameterSet<T>&,         \
                                                 HeadCache<T>*);                                                     \
    template BasicTensor<T> heatmap_head_backward(const BasicParameterSet<T>&, const HeadCache<T>&,                  \
                                                  const BasicTensor<T>&, BasicLayerGrads<T>&);

E3G_INSTANTIATE_BACKBONE(float)
E3G_INSTANTIATE_BACKBONE(double)

#undef E3G_INSTANTIATE_BACKBONE

}  // namespace e3g
