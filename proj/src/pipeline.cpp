#include "e3g/pipeline.hpp"

#include "e3g/ops.hpp"
#include "e3g/weights_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace e3g {

void PipelineConfig::validate() const
{
    encoder.validate();
    region.validate();
    if (rotation.a_gamma < 2 || rotation.a_beta < 2 || rotation.hidden < 1)
        throw std::invalid_argument("config: rotation head needs >= 2 anchors per axis and a hidden layer");
    if (!(score_thresh >= 0.0f && score_thresh <= 1.0f)) throw std::invalid_argument("config: score_thresh outside [0,1]");
    if (!(nms.translation_m > 0.0) || !(nms.rotation_rad > 0.0))
        throw std::invalid_argument("config: NMS thresholds must be > 0");
    for (float s : tta_scales)
        if (!(s > 0.0f)) throw std::invalid_argument("config: TTA scales must be > 0");
    if (!(width_clearance >= 0.0 && width_clearance < kGripperMaxWidth))
        throw std::invalid_argument("config: width_clearance must be in [0, w_max)");
    if (crop_size < 32 || crop_size % 32 != 0) throw std::invalid_argument("config: crop_size must be a multiple of 32");
}

std::size_t PipelineConfig::region_feature_dim() const
{
    const auto g = static_cast<std::size_t>(region.grid_size);
    return static_cast<std::size_t>(encoder.fpn_channels) * g * g;
}

nlohmann::json config_to_json(const PipelineConfig& c)
{
    return {
        {"input_hw", {c.encoder.input_h, c.encoder.input_w}},
        {"stage_channels", c.encoder.stage_channels},
        {"fpn_channels", c.encoder.fpn_channels},
        {"head_channels", c.encoder.head_channels},
        {"heatmap_threshold", c.region.candidate_threshold},
        {"max_candidates", c.region.max_candidates},
        {"k_regions", c.region.num_regions},
        {"grid_size", c.region.grid_size},
        {"base_s", c.region.base_size},
        {"reference_depth", c.region.reference_depth},
        {"a_gamma", c.rotation.a_gamma},
        {"a_beta", c.rotation.a_beta},
        {"rotation_hidden", c.rotation.hidden},
        {"score_thresh", c.score_thresh},
        {"width_clearance_m", c.width_clearance},
        {"nms_translation_m", c.nms.translation_m},
        {"nms_rotation_deg", c.nms.rotation_rad * 180.0 / 3.14159265358979323846},
        {"use_rfp", c.ablation.use_rfp},
        {"use_fpn_heatmap", c.ablation.use_fpn_heatmap},
        {"use_rotation_heatmap", c.ablation.use_rotation_heatmap},
        {"tta_scales", c.tta_scales},
        {"crop_size", c.crop_size},
        {"seed", c.seed},
    };
}

PipelineConfig config_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    const nlohmann::json known = config_to_json(PipelineConfig{});
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    PipelineConfig c;
    if (j.contains("input_hw")) {
        c.encoder.input_h = j["input_hw"].at(0).get<int>();
        c.encoder.input_w = j["input_hw"].at(1).get<int>();
    }
    c.encoder.stage_channels = j.value("stage_channels", c.encoder.stage_channels);
    c.encoder.fpn_channels = j.value("fpn_channels", c.encoder.fpn_channels);
    c.encoder.head_channels = j.value("head_channels", c.encoder.head_channels);
    c.region.candidate_threshold = j.value("heatmap_threshold", c.region.candidate_threshold);
    c.region.max_candidates = j.value("max_candidates", c.region.max_candidates);
    c.region.num_regions = j.value("k_regions", c.region.num_regions);
    c.region.grid_size = j.value("grid_size", c.region.grid_size);
    c.region.base_size = j.value("base_s", c.region.base_size);
    c.region.reference_depth = j.value("reference_depth", c.region.reference_depth);
    c.rotation.a_gamma = j.value("a_gamma", c.rotation.a_gamma);
    c.rotation.a_beta = j.value("a_beta", c.rotation.a_beta);
    c.rotation.hidden = j.value("rotation_hidden", c.rotation.hidden);
    c.score_thresh = j.value("score_thresh", c.score_thresh);
    c.width_clearance = j.value("width_clearance_m", c.width_clearance);
    c.nms.translation_m = j.value("nms_translation_m", c.nms.translation_m);
    if (j.contains("nms_rotation_deg")) c.nms.rotation_rad = j["nms_rotation_deg"].get<double>() * 3.14159265358979323846 / 180.0;
    c.ablation.use_rfp = j.value("use_rfp", c.ablation.use_rfp);
    c.ablation.use_fpn_heatmap = j.value("use_fpn_heatmap", c.ablation.use_fpn_heatmap);
    c.ablation.use_rotation_heatmap = j.value("use_rotation_heatmap", c.ablation.use_rotation_heatmap);
    c.tta_scales = j.value("tta_scales", c.tta_scales);
    c.crop_size = j.value("crop_size", c.crop_size);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

std::string config_hash(const PipelineConfig& cfg)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : config_to_json(cfg).dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Model init_model(const PipelineConfig& cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    Model m{cfg, init_backbone_params(cfg.encoder, rng)};
    for (auto& [name, t] : init_rotation_params(cfg.rotation, cfg.region_feature_dim(), rng)) m.params.emplace(name, t);
    return m;
}

void check_params_match(const PipelineConfig& cfg, const ParameterSet& params)
{
    const Model reference = init_model(cfg);
    if (params.size() != reference.params.size())
        throw WeightFormatError("weight file holds " + std::to_string(params.size()) + " tensors, config expects " +
                                std::to_string(reference.params.size()));
    for (const auto& [name, t] : reference.params) {
        const auto it = params.find(name);
        if (it == params.end()) throw WeightFormatError("weight file lacks tensor " + name);
        if (it->second.shape() != t.shape())
            throw WeightFormatError("tensor " + name + " has shape " + it->second.shape().str() + ", config expects " +
                                    t.shape().str());
    }
}

double& StageTimings::operator[](const std::string& stage)
{
    for (std::size_t i = 0; i < kStageNames.size(); ++i)
        if (stage == kStageNames[i]) return ms[i];
    throw std::invalid_argument("unknown stage " + stage);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

Tensor frame_input(const ImageFrame& frame)
{
    const Tensor x = make_network_input(frame);
    return x.reshaped(Shape{1, x.dim(0), x.dim(1), x.dim(2)});
}

// Every cell with valid depth, graspability 1, spread by FPS from the first.
std::vector<RegionCenter> uniform_region_centers(const ImageFrame& frame, const PipelineConfig& cfg)
{
    std::vector<RegionCenter> pool;
    for (int v = 0; v < cfg.encoder.heatmap_h(); ++v)
        for (int u = 0; u < cfg.encoder.heatmap_w(); ++u) {
            const double depth = depth_at_heatmap(frame, u, v);
            if (depth > 0.0) pool.push_back({static_cast<double>(u), static_cast<double>(v), depth, 1.0f});
        }
    if (pool.empty()) return {};
    std::vector<Point2> pts;
    for (const auto& c : pool) pts.push_back({c.u, c.v});
    std::vector<RegionCenter> out;
    for (auto i : farthest_point_sampling(pts, static_cast<std::size_t>(cfg.region.num_regions), 0)) out.push_back(pool[i]);
    return out;
}

// Baseline without feature sharing: resample the raw input around each
// center and run encoder + FPN on every crop.
RegionBatch crop_region_features(const Model& model, const Tensor& input, const std::vector<RegionCenter>& centers,
                                 const std::vector<float>& sizes, StageTimings& t, EncoderCounters& counters)
{
    const PipelineConfig& cfg = model.config;
    EncoderConfig crop_cfg = cfg.encoder;
    crop_cfg.input_h = crop_cfg.input_w = cfg.crop_size;
    const auto n = static_cast<std::size_t>(cfg.crop_size);
    const auto g = static_cast<std::size_t>(cfg.region.grid_size);
    const double H = static_cast<double>(input.dim(2)), W = static_cast<double>(input.dim(3));

    RegionBatch batch;
    batch.centers = centers;
    batch.sizes = sizes;
    batch.grid_size = cfg.region.grid_size;
    batch.features = Tensor(Shape{centers.size(), static_cast<std::size_t>(cfg.encoder.fpn_channels), g, g});
    const std::size_t per_region = batch.features.size() / std::max<std::size_t>(centers.size(), 1);

    for (std::size_t r = 0; r < centers.size(); ++r) {
        auto t0 = Clock::now();
        const double d = cfg.region.reference_depth / centers[r].depth_m;
        const double half = 0.5 * sizes[r];
        Tensor coords(Shape{1, n * n, 2});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double ox = -half + sizes[r] * static_cast<double>(j) / static_cast<double>(n - 1);
                const double oy = -half + sizes[r] * static_cast<double>(i) / static_cast<double>(n - 1);
                coords[(i * n + j) * 2] = static_cast<float>(heatmap_to_image(centers[r].u + d * ox) * 2.0 / (W - 1.0) - 1.0);
                coords[(i * n + j) * 2 + 1] =
                    static_cast<float>(heatmap_to_image(centers[r].v + d * oy) * 2.0 / (H - 1.0) - 1.0);
            }
        const Tensor crop = grid_sample_bilinear(input, coords).reshaped(Shape{1, input.dim(1), n, n});
        t["region"] += elapsed_ms(t0);

        t0 = Clock::now();
        const auto levels = encoder_forward(crop, model.params, crop_cfg);
        ++counters.region_encoder_calls;
        t["encoder"] += elapsed_ms(t0);

        t0 = Clock::now();
        const FeaturePyramid pyr = fpn_forward(levels, model.params, crop_cfg);
        t["fpn"] += elapsed_ms(t0);

        t0 = Clock::now();
        // The crop's fused map resampled onto the g x g lattice.
        RegionCenter mid{(static_cast<double>(pyr.fused.dim(3)) - 1.0) / 2.0,
                         (static_cast<double>(pyr.fused.dim(2)) - 1.0) / 2.0, cfg.region.reference_depth, 1.0f};
        const float span = static_cast<float>(pyr.fused.dim(3) - 1);
        const RegionBatch one = propagate_region_features(pyr, {mid}, {span}, cfg.region.grid_size,
                                                          cfg.region.reference_depth);
        std::copy_n(one.features.ptr(), per_region, batch.features.ptr() + r * per_region);
        t["region"] += elapsed_ms(t0);
    }
    return batch;
}

}  // namespace

InferenceResult run_inference(const Model& model, const ImageFrame& frame)
{
    const PipelineConfig& cfg = model.config;
    if (frame.height() != cfg.encoder.input_h || frame.width() != cfg.encoder.input_w)
        throw std::invalid_argument("frame is " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                                    ", config expects " + std::to_string(cfg.encoder.input_w) + "x" +
                                    std::to_string(cfg.encoder.input_h));
    InferenceResult res;
    StageTimings& t = res.timings;
    const auto start = Clock::now();

    auto t0 = Clock::now();
    const Tensor input = frame_input(frame);
    t["input"] += elapsed_ms(t0);

    t0 = Clock::now();
    const auto levels = encoder_forward(input, model.params, cfg.encoder);
    ++res.counters.scene_encoder_calls;
    t["encoder"] += elapsed_ms(t0);

    t0 = Clock::now();
    const FeaturePyramid pyramid = fpn_forward(levels, model.params, cfg.encoder);
    t["fpn"] += elapsed_ms(t0);

    t0 = Clock::now();
    if (cfg.ablation.use_fpn_heatmap) {
        res.heatmap = heatmap_head(pyramid, model.params);
    } else {
        res.heatmap.values = Tensor(Shape{1, static_cast<std::size_t>(cfg.encoder.heatmap_h()),
                                          static_cast<std::size_t>(cfg.encoder.heatmap_w())});
        res.heatmap.values.fill(1.0f);
    }
    t["heatmap"] += elapsed_ms(t0);

    t0 = Clock::now();
    res.centers = cfg.ablation.use_fpn_heatmap ? choose_region_centers(res.heatmap, frame, cfg.region)
                                               : uniform_region_centers(frame, cfg);
    t["region"] += elapsed_ms(t0);

    const AnchorGrid anchors = build_anchor_grid(cfg.rotation.a_gamma, cfg.rotation.a_beta);
    std::vector<float> scales{1.0f};
    scales.insert(scales.end(), cfg.tta_scales.begin(), cfg.tta_scales.end());
    std::vector<GraspPose> decoded;
    if (!res.centers.empty()) {
        for (float scale : scales) {
            const std::vector<float> sizes(res.centers.size(), cfg.region.base_size * scale);
            res.sizes.insert(res.sizes.end(), sizes.begin(), sizes.end());

            RegionBatch regions;
            if (cfg.ablation.use_rfp) {
                t0 = Clock::now();
                regions = propagate_region_features(pyramid, res.centers, sizes, cfg.region.grid_size,
                                                    cfg.region.reference_depth);
                t["region"] += elapsed_ms(t0);
            } else {
                regions = crop_region_features(model, input, res.centers, sizes, t, res.counters);
            }

            t0 = Clock::now();
            const RotationOutput out = rotation_head_forward(regions, model.params, cfg.rotation);
            t["rotation"] += elapsed_ms(t0);

            t0 = Clock::now();
            auto grasps = cfg.ablation.use_rotation_heatmap
                              ? decode_grasps(out, res.centers, anchors, frame, cfg.score_thresh, &res.decode)
                              : decode_argmax_grasps(out, res.centers, anchors, frame, cfg.score_thresh, &res.decode);
            for (auto& g : grasps) g.width = std::min(g.width + cfg.width_clearance, kGripperMaxWidth);
            decoded.insert(decoded.end(), grasps.begin(), grasps.end());
            t["decode"] += elapsed_ms(t0);
        }
    }

    t0 = Clock::now();
    sort_by_score(decoded);
    res.grasps = grasp_nms(decoded, cfg.nms);
    t["nms"] += elapsed_ms(t0);

    t.total_ms = elapsed_ms(start);
    return res;
}

nlohmann::json inference_to_json(const InferenceResult& r, const PipelineConfig& cfg, const std::string& frame_id)
{
    nlohmann::json timings;
    for (std::size_t i = 0; i < kStageNames.size(); ++i) timings[kStageNames[i]] = r.timings.ms[i];
    timings["end_to_end"] = r.timings.total_ms;
    return {{"frame_id", frame_id},
            {"config_hash", config_hash(cfg)},
            {"timings_ms", timings},
            {"encoder_calls", {{"scene", r.counters.scene_encoder_calls}, {"region", r.counters.region_encoder_calls}}},
            {"regions", r.centers.size()},
            {"depth_fallbacks", r.decode.depth_fallbacks},
            {"grasps", grasps_to_json(r.grasps)}};
}

TrainSample make_train_sample(const SceneRecord& rec)
{
    TrainSample s;
    s.id = rec.id;
    s.frame = rec.frame;
    s.input = frame_input(rec.frame);
    s.labels = rec.labels;
    s.heatmap_target = make_gt_heatmap(rec.labels, rec.frame.intrinsics).heatmap;
    return s;
}

StepLosses compute_gradients(const Model& model, const TrainSample& sample, std::mt19937_64& rng, LayerGrads& grads)
{
    const PipelineConfig& cfg = model.config;
    const auto& P = model.params;

    EncoderCache<float> enc_cache;
    FpnCache<float> fpn_cache;
    HeadCache<float> head_cache;
    const auto levels = encoder_forward(sample.input, P, cfg.encoder, &enc_cache);
    const FeaturePyramid pyramid = fpn_forward(levels, P, cfg.encoder, &fpn_cache);
    const Tensor prob = heatmap_head_forward(pyramid, P, &head_cache);

    StepLosses losses;
    const auto hm = bce_loss(prob, sample.heatmap_target.values.reshaped(prob.shape()));
    losses.heatmap = hm.value;
    Tensor grad_fused = heatmap_head_backward(P, head_cache, hm.grad, grads);

    // Teacher forcing: regions come from the target heatmap.
    const auto centers = choose_region_centers(sample.heatmap_target, sample.frame, cfg.region);
    if (!centers.empty()) {
        std::vector<float> sizes;
        for (std::size_t i = 0; i < centers.size(); ++i)
            sizes.push_back(sample_region_size(rng, true, cfg.region.base_size));
        RegionSampleCache<float> sample_cache;
        const RegionBatch regions = propagate_region_features(pyramid, centers, sizes, cfg.region.grid_size,
                                                              cfg.region.reference_depth, &sample_cache);
        RotationCache<float> rot_cache;
        const Tensor logits = rotation_head_logits(regions.features, P, &rot_cache);
        const AnchorGrid anchors = build_anchor_grid(cfg.rotation.a_gamma, cfg.rotation.a_beta);
        const RotationTarget target = make_gt_rotation(sample.labels, centers, sizes, anchors, sample.frame.intrinsics);
        const auto rl = rotation_losses(logits, target);
        losses.rotation = rl.classification;
        losses.refine = rl.refinement;
        const Tensor grad_regions =
            rotation_head_backward(P, rot_cache, rl.grad_logits, regions.features.shape(), grads);
        grad_fused = add(grad_fused, propagate_region_features_backward(pyramid, sample_cache, grad_regions));
    }

    const auto grad_levels = fpn_backward(P, cfg.encoder, fpn_cache, grad_fused, grads);
    encoder_backward(P, cfg.encoder, enc_cache, grad_levels, grads);
    return losses;
}

Trainer::Trainer(Model& model, float lr, float momentum, float clip_norm)
    : model_(model), opt_(lr, momentum), clip_norm_(clip_norm), rng_(model.config.seed ^ 0x9e3779b97f4a7c15ULL)
{
    if (!(clip_norm >= 0.0f)) throw std::invalid_argument("trainer: clip norm must be >= 0");
}

StepLosses Trainer::step(const TrainSample& sample)
{
    LayerGrads grads;
    const StepLosses l = compute_gradients(model_, sample, rng_, grads);
    if (!std::isfinite(l.heatmap) || !std::isfinite(l.rotation) || !std::isfinite(l.refine))
        throw NonFiniteLossError("non-finite loss on scene " + sample.id);
    double sq = 0.0;
    for (const auto& [name, g] : grads.params)
        for (float v : g.data()) sq += static_cast<double>(v) * v;
    last_grad_norm_ = std::sqrt(sq);
    if (!std::isfinite(last_grad_norm_)) throw NonFiniteLossError("non-finite gradient on scene " + sample.id);
    if (clip_norm_ > 0.0f && last_grad_norm_ > clip_norm_) {
        const auto scale = static_cast<float>(clip_norm_ / last_grad_norm_);
        for (auto& [name, g] : grads.params)
            for (float& v : g.data()) v *= scale;
    }
    opt_.step(model_.params, grads);
    return l;
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t n)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Fisher-Yates with the trainer's own engine keeps runs reproducible.
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng_() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

float cosine_lr(float base, int epoch, int epochs)
{
    const double floor = base / 500.0;
    if (epochs <= 1) return base;
    const double f = 0.5 * (1.0 + std::cos(3.14159265358979323846 * epoch / (epochs - 1)));
    return static_cast<float>(floor + (base - floor) * f);
}

std::vector<EpochLog> train_model(Model& model, const std::vector<TrainSample>& samples, const TrainOptions& opts,
                                  const std::function<void(const EpochLog&)>& on_epoch)
{
    if (opts.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    std::vector<EpochLog> logs;
    if (opts.epochs == 0 || opts.max_steps == 0) return logs;
    if (samples.empty()) throw std::invalid_argument("train: no training scenes");
    Trainer trainer(model, opts.lr, opts.momentum, opts.clip_norm);
    long steps = 0;
    for (int e = 0; e < opts.epochs; ++e) {
        trainer.set_learning_rate(cosine_lr(opts.lr, e, opts.epochs));
        EpochLog log;
        log.epoch = e + 1;
        for (std::size_t i : trainer.epoch_order(samples.size())) {
            if (opts.max_steps >= 0 && steps >= opts.max_steps) break;
            const StepLosses l = trainer.step(samples[i]);
            log.heatmap += l.heatmap;
            log.rotation += l.rotation;
            log.refine += l.refine;
            ++log.steps;
            ++steps;
        }
        if (log.steps == 0) break;
        const auto n = static_cast<double>(log.steps);
        log.heatmap /= n;
        log.rotation /= n;
        log.refine /= n;
        logs.push_back(log);
        if (on_epoch) on_epoch(log);
        if (opts.max_steps >= 0 && steps >= opts.max_steps) break;
    }
    return logs;
}

LatencySummary summarize_latency(std::vector<double> v)
{
    LatencySummary s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    s.mean_ms = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    s.median_ms = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    s.p95_ms = v[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

BenchReport run_benchmark(const Model& model, const std::vector<ImageFrame>& frames, std::size_t warmup)
{
    if (frames.size() <= warmup) throw std::invalid_argument("bench: need more frames than warm-up frames");
    std::array<std::vector<double>, kStageNames.size()> per_stage;
    std::vector<double> total;
    BenchReport rep;
    rep.warmup = warmup;
    rep.frames = frames.size() - warmup;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const InferenceResult r = run_inference(model, frames[f]);
        if (f < warmup) continue;
        for (std::size_t i = 0; i < kStageNames.size(); ++i) per_stage[i].push_back(r.timings.ms[i]);
        total.push_back(r.timings.total_ms);
        rep.counters = r.counters;
    }
    for (std::size_t i = 0; i < kStageNames.size(); ++i) rep.stages[i] = summarize_latency(per_stage[i]);
    rep.end_to_end = summarize_latency(total);
    return rep;
}

nlohmann::json bench_to_json(const BenchReport& rep, const PipelineConfig& cfg)
{
    auto summary = [](const LatencySummary& s) {
        return nlohmann::json{{"mean_ms", s.mean_ms}, {"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}};
    };
    nlohmann::json stages;
    for (std::size_t i = 0; i < kStageNames.size(); ++i) stages[kStageNames[i]] = summary(rep.stages[i]);
    return {{"frames", rep.frames},
            {"warmup_frames", rep.warmup},
            {"input_hw", {cfg.encoder.input_h, cfg.encoder.input_w}},
            {"config_hash", config_hash(cfg)},
            {"ablation",
             {{"use_rfp", cfg.ablation.use_rfp},
              {"use_fpn_heatmap", cfg.ablation.use_fpn_heatmap},
              {"use_rotation_heatmap", cfg.ablation.use_rotation_heatmap}}},
            {"encoder_calls_per_frame",
             {{"scene", rep.counters.scene_encoder_calls}, {"region", rep.counters.region_encoder_calls}}},
            {"stages", stages},
            {"end_to_end", summary(rep.end_to_end)}};
}

}  // namespace e3g
