#include "e3g/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace e3g {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::size_t refine_index(std::size_t r, std::size_t cell, int ch, std::size_t cells)
{
    return (r * cells + cell) * kRefineChannels + static_cast<std::size_t>(ch);
}

GraspPose decode_cell(const RotationOutput& out, std::size_t r, std::size_t i, std::size_t j,
                      const RegionCenter& center, const AnchorGrid& anchors, const ImageFrame& frame,
                      DecodeStats* stats)
{
    const std::size_t idx = (r * anchors.gamma.size() + i) * anchors.beta.size() + j;
    GraspPose g;
    g.gamma = anchors.gamma[i];
    g.beta = anchors.beta[j];
    g.theta = out.theta[idx];
    g.width = out.width[idx];
    g.score = static_cast<double>(out.scores[idx]) * center.graspability;
    double z = center.depth_m + out.offset_d[idx];
    if (!(z > 0.0)) {
        z = center.depth_m;
        if (stats) ++stats->depth_fallbacks;
    }
    const Eigen::Vector3d p = pixel_to_point(heatmap_to_image(center.u + out.offset_u[idx]),
                                             heatmap_to_image(center.v + out.offset_v[idx]), z * 1000.0,
                                             frame.intrinsics);
    g.x = p.x();
    g.y = p.y();
    g.z = p.z();
    return g;
}

}  // namespace

AnchorGrid build_anchor_grid(int a_gamma, int a_beta)
{
    if (a_gamma < 2 || a_beta < 2) throw std::invalid_argument("anchor grid needs at least 2 bins per axis");
    auto centers = [](int a) {
        std::vector<double> c(static_cast<std::size_t>(a));
        for (int i = 0; i < a; ++i) c[static_cast<std::size_t>(i)] = -kPi / 2 + (i + 0.5) * kPi / a;
        // Exact mirror symmetry.
        for (int i = 0; i < a / 2; ++i) c[static_cast<std::size_t>(a - 1 - i)] = -c[static_cast<std::size_t>(i)];
        if (a % 2) c[static_cast<std::size_t>(a / 2)] = 0.0;
        return c;
    };
    return {centers(a_gamma), centers(a_beta)};
}

int anchor_bin(double angle, int count)
{
    double t = (angle + kPi / 2) / (kPi / count);
    const double nearest = std::round(t);
    if (std::abs(t - nearest) < 1e-9) t = nearest;
    const int bin = static_cast<int>(std::ceil(t)) - 1;
    return std::clamp(bin, 0, count - 1);
}

ParameterSet init_rotation_params(const RotationHeadConfig& cfg, std::size_t region_feature_dim, std::mt19937_64& rng)
{
    ParameterSet p;
    const auto out_dim = static_cast<std::size_t>(cfg.a_gamma * cfg.a_beta * kRefineChannels);
    init_linear(p, "rot.fc1", static_cast<std::size_t>(cfg.hidden), region_feature_dim, rng);
    init_linear(p, "rot.fc2", out_dim, static_cast<std::size_t>(cfg.hidden), rng, 0.1f);
    Tensor& bias = p["rot.fc2.bias"];
    for (std::size_t c = 0; c < out_dim; c += kRefineChannels) bias[c] = -2.0f;
    return p;
}

template <typename T>
BasicTensor<T> rotation_head_logits(const BasicTensor<T>& region_features, const BasicParameterSet<T>& params,
                                    RotationCache<T>* cache)
{
    const std::size_t k = region_features.dim(0);
    const BasicTensor<T> flat = region_features.reshaped(Shape{k, region_features.size() / k});
    BasicTensor<T> pre = linear(flat, params.at("rot.fc1.weight"), params.at("rot.fc1.bias"));
    BasicTensor<T> hidden = relu(pre);
    BasicTensor<T> logits = linear(hidden, params.at("rot.fc2.weight"), params.at("rot.fc2.bias"));
    if (cache) {
        cache->input = flat;
        cache->hidden_pre = std::move(pre);
        cache->hidden = std::move(hidden);
    }
    return logits;
}

template <typename T>
BasicTensor<T> rotation_head_backward(const BasicParameterSet<T>& params, const RotationCache<T>& cache,
                                      const BasicTensor<T>& grad_logits, const Shape& region_shape,
                                      BasicLayerGrads<T>& grads)
{
    auto g2 = linear_backward(cache.hidden, params.at("rot.fc2.weight"), grad_logits);
    grads.accumulate("rot.fc2.weight", g2.weight);
    grads.accumulate("rot.fc2.bias", g2.bias);
    const BasicTensor<T> gh = relu_backward(cache.hidden_pre, g2.input);
    auto g1 = linear_backward(cache.input, params.at("rot.fc1.weight"), gh);
    grads.accumulate("rot.fc1.weight", g1.weight);
    grads.accumulate("rot.fc1.bias", g1.bias);
    return g1.input.reshaped(region_shape);
}

RotationOutput activate_rotation_logits(const Tensor& logits, const RotationHeadConfig& cfg)
{
    const std::size_t k = logits.dim(0);
    const auto ag = static_cast<std::size_t>(cfg.a_gamma), ab = static_cast<std::size_t>(cfg.a_beta);
    const std::size_t cells = ag * ab;
    if (logits.dim(1) != cells * kRefineChannels)
        throw std::invalid_argument("rotation logits " + logits.shape().str() + " do not match anchor grid");
    const Shape s{k, ag, ab};
    RotationOutput out{Tensor(s), Tensor(s), Tensor(s), Tensor(s), Tensor(s), Tensor(s)};
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < cells; ++c) {
            const std::size_t o = r * cells + c;
            auto lg = [&](int ch) { return static_cast<double>(logits[refine_index(r, c, ch, cells)]); };
            out.scores[o] = static_cast<float>(1.0 / (1.0 + std::exp(-lg(0))));
            out.theta[o] = static_cast<float>(kPi / 2 * std::tanh(lg(1)));
            out.width[o] = static_cast<float>(kGripperMaxWidth * (std::tanh(lg(2)) + 1.0) / 2.0);
            out.offset_u[o] = static_cast<float>(kMaxPlaneOffset * std::tanh(lg(3)));
            out.offset_v[o] = static_cast<float>(kMaxPlaneOffset * std::tanh(lg(4)));
            out.offset_d[o] = static_cast<float>(kMaxDepthOffset * std::tanh(lg(5)));
        }
    return out;
}

RotationOutput rotation_head_forward(const RegionBatch& regions, const ParameterSet& params,
                                     const RotationHeadConfig& cfg)
{
    return activate_rotation_logits(rotation_head_logits(regions.features, params), cfg);
}

RotationTarget make_gt_rotation(const std::vector<GraspPose>& labels, const std::vector<RegionCenter>& centers,
                                const std::vector<float>& sizes, const AnchorGrid& anchors,
                                const CameraIntrinsics& intrinsics)
{
    const std::size_t k = centers.size();
    const auto ag = static_cast<std::size_t>(anchors.size_gamma()), ab = static_cast<std::size_t>(anchors.size_beta());
    const std::size_t cells = ag * ab;
    RotationTarget t{Tensor(Shape{std::max<std::size_t>(k, 1), ag, ab}),
                     Tensor(Shape{std::max<std::size_t>(k, 1), ag, ab, 5}),
                     Tensor(Shape{std::max<std::size_t>(k, 1), ag, ab, 5}), 0};
    if (k == 0) return t;

    // Per region and cell: index of the winning label and its angular distance.
    std::vector<int> winner(k * cells, -1);
    std::vector<double> best(k * cells, std::numeric_limits<double>::infinity());
    for (std::size_t li = 0; li < labels.size(); ++li) {
        const GraspPose& g = labels[li];
        if (!(g.z > 0)) continue;
        const Eigen::Vector2d px = project_point(g.translation(), intrinsics);
        const double lu = image_to_heatmap(px.x()), lv = image_to_heatmap(px.y());
        std::size_t nearest = k;
        double nearest_d = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < k; ++r) {
            const double d = std::hypot(lu - centers[r].u, lv - centers[r].v);
            if (d < nearest_d) {
                nearest_d = d;
                nearest = r;
            }
        }
        if (nearest == k || nearest_d > 0.5 * sizes[nearest]) continue;
        ++t.assigned_labels;
        const int bi = anchor_bin(g.gamma, anchors.size_gamma());
        const int bj = anchor_bin(g.beta, anchors.size_beta());
        const std::size_t cell = static_cast<std::size_t>(bi) * ab + static_cast<std::size_t>(bj);
        const double ad = std::hypot(g.gamma - anchors.gamma[static_cast<std::size_t>(bi)],
                                     g.beta - anchors.beta[static_cast<std::size_t>(bj)]);
        const std::size_t slot = nearest * cells + cell;
        if (ad < best[slot]) {
            best[slot] = ad;
            winner[slot] = static_cast<int>(li);
        }
    }

    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < cells; ++c) {
            const int li = winner[r * cells + c];
            if (li < 0) continue;
            const GraspPose& g = labels[static_cast<std::size_t>(li)];
            const Eigen::Vector2d px = project_point(g.translation(), intrinsics);
            const double du = std::clamp(image_to_heatmap(px.x()) - centers[r].u, -kMaxPlaneOffset, kMaxPlaneOffset);
            const double dv = std::clamp(image_to_heatmap(px.y()) - centers[r].v, -kMaxPlaneOffset, kMaxPlaneOffset);
            const double dd = std::clamp(g.z - centers[r].depth_m, -kMaxDepthOffset, kMaxDepthOffset);
            const double norm[5] = {g.theta / (kPi / 2), 2.0 * g.width / kGripperMaxWidth - 1.0, du / kMaxPlaneOffset,
                                    dv / kMaxPlaneOffset, dd / kMaxDepthOffset};
            t.scores[r * cells + c] = 1.0f;
            for (std::size_t ch = 0; ch < 5; ++ch) {
                t.refine[(r * cells + c) * 5 + ch] = static_cast<float>(std::clamp(norm[ch], -1.0, 1.0));
                t.mask[(r * cells + c) * 5 + ch] = 1.0f;
            }
        }
    return t;
}

template <typename T>
RotationLoss<T> rotation_losses(const BasicTensor<T>& logits, const RotationTarget& target, T beta)
{
    const std::size_t n = target.scores.size();
    if (logits.size() != n * kRefineChannels)
        throw std::invalid_argument("rotation_losses: logits " + logits.shape().str() + " do not match target " +
                                    target.scores.shape().str());
    BasicTensor<T> score_logit(Shape{n}), refine_logit(Shape{n, 5});
    for (std::size_t c = 0; c < n; ++c) {
        score_logit[c] = logits[c * kRefineChannels];
        for (std::size_t ch = 0; ch < 5; ++ch) refine_logit[c * 5 + ch] = logits[c * kRefineChannels + 1 + ch];
    }
    const BasicTensor<T> prob = sigmoid(score_logit);
    const BasicTensor<T> bounded = tanh(refine_logit);
    const auto cls = bce_loss(prob, target.scores.reshaped(Shape{n}).template cast<T>());
    const auto reg = smooth_l1_loss(bounded, target.refine.reshaped(Shape{n, 5}).template cast<T>(), beta,
                                    target.mask.reshaped(Shape{n, 5}).template cast<T>());
    const BasicTensor<T> g_score = sigmoid_backward(prob, cls.grad);
    const BasicTensor<T> g_refine = tanh_backward(bounded, reg.grad);
    RotationLoss<T> out{cls.value, reg.value, BasicTensor<T>(logits.shape())};
    for (std::size_t c = 0; c < n; ++c) {
        out.grad_logits[c * kRefineChannels] = g_score[c];
        for (std::size_t ch = 0; ch < 5; ++ch) out.grad_logits[c * kRefineChannels + 1 + ch] = g_refine[c * 5 + ch];
    }
    return out;
}

std::vector<GraspPose> decode_grasps(const RotationOutput& out, const std::vector<RegionCenter>& centers,
                                     const AnchorGrid& anchors, const ImageFrame& frame, float score_thresh,
                                     DecodeStats* stats)
{
    if (!(score_thresh >= 0.0f && score_thresh <= 1.0f)) throw std::invalid_argument("decode: threshold outside [0,1]");
    std::vector<GraspPose> grasps;
    const std::size_t ag = anchors.gamma.size(), ab = anchors.beta.size();
    for (std::size_t r = 0; r < centers.size(); ++r)
        for (std::size_t i = 0; i < ag; ++i)
            for (std::size_t j = 0; j < ab; ++j)
                if (out.scores[(r * ag + i) * ab + j] >= score_thresh)
                    grasps.push_back(decode_cell(out, r, i, j, centers[r], anchors, frame, stats));
    sort_by_score(grasps);
    return grasps;
}

std::vector<GraspPose> decode_argmax_grasps(const RotationOutput& out, const std::vector<RegionCenter>& centers,
                                            const AnchorGrid& anchors, const ImageFrame& frame, float score_thresh,
                                            DecodeStats* stats)
{
    std::vector<GraspPose> grasps;
    const std::size_t ag = anchors.gamma.size(), ab = anchors.beta.size();
    for (std::size_t r = 0; r < centers.size(); ++r) {
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < ag; ++i)
            for (std::size_t j = 0; j < ab; ++j)
                if (out.scores[(r * ag + i) * ab + j] > out.scores[(r * ag + bi) * ab + bj]) {
                    bi = i;
                    bj = j;
                }
        if (out.scores[(r * ag + bi) * ab + bj] >= score_thresh)
            grasps.push_back(decode_cell(out, r, bi, bj, centers[r], anchors, frame, stats));
    }
    sort_by_score(grasps);
    return grasps;
}

void sort_by_score(std::vector<GraspPose>& grasps)
{
    std::stable_sort(grasps.begin(), grasps.end(), [](const GraspPose& a, const GraspPose& b) { return a.score > b.score; });
}

std::vector<GraspPose> grasp_nms(const std::vector<GraspPose>& grasps, const NmsConfig& cfg)
{
    std::vector<GraspPose> kept;
    std::vector<Eigen::Matrix3d> kept_rot;
    for (const auto& g : grasps) {
        const Eigen::Matrix3d R = grasp_rotation(g);
        bool suppressed = false;
        for (std::size_t i = 0; i < kept.size() && !suppressed; ++i) {
            if ((kept[i].translation() - g.translation()).norm() >= cfg.translation_m) continue;
            suppressed = rotation_distance(kept_rot[i], R) < cfg.rotation_rad;
        }
        if (suppressed) continue;
        kept.push_back(g);
        kept_rot.push_back(R);
    }
    return kept;
}

template RotationLoss<float> rotation_losses(const BasicTensor<float>&, const RotationTarget&, float);
template RotationLoss<double> rotation_losses(const BasicTensor<double>&, const RotationTarget&, double);
template BasicTensor<float> rotation_head_logits(const BasicTensor<float>&, const BasicParameterSet<float>&,
                                                 RotationCache<float>*);
template BasicTensor<double> rotation_head_logits(const BasicTensor<double>&, const BasicParameterSet<double>&,
                                                  RotationCache<double>*);
template BasicTensor<float> rotation_head_backward(const BasicParameterSet<float>&, const RotationCache<float>&,
                                                   const BasicTensor<float>&, const Shape&, BasicLayerGrads<float>&);
template BasicTensor<double> rotation_head_backward(const BasicParameterSet<double>&, const RotationCache<double>&,
                                                    const BasicTensor<double>&, const Shape&, BasicLayerGrads<double>&);

}  // namespace e3g
