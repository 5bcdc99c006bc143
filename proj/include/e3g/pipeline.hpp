#pragma once

// The full detector: configuration, parameters, instrumented inference with
// ablation switches, and single-scene SGD training.

#include "e3g/dataset.hpp"
#include "e3g/rotation.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace e3g {

struct AblationFlags {
    bool use_rfp = true;               // share the scene feature map across regions
    bool use_fpn_heatmap = true;       // location heatmap picks region centers
    bool use_rotation_heatmap = true;  // dense (gamma, beta) scoring per region
};

struct PipelineConfig {
    EncoderConfig encoder;
    RegionConfig region;
    RotationHeadConfig rotation;
    float score_thresh = 0.1f;
    double width_clearance = 0.01;  // added to decoded widths (meters), capped at w_max
    NmsConfig nms;
    AblationFlags ablation;
    std::vector<float> tta_scales;  // extra region-size multipliers at inference
    int crop_size = 32;             // per-region input crop when use_rfp is off
    std::uint64_t seed = 7;

    void validate() const;
    std::size_t region_feature_dim() const;
};

nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const nlohmann::json& j);
/// 64-bit FNV-1a of the canonical config JSON, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

struct Model {
    PipelineConfig config;
    ParameterSet params;
};

Model init_model(const PipelineConfig& cfg);

/// Throws WeightFormatError when names or shapes differ from the config's layout.
void check_params_match(const PipelineConfig& cfg, const ParameterSet& params);

inline constexpr std::array<const char*, 8> kStageNames{"input", "encoder", "fpn",    "heatmap",
                                                        "region", "rotation", "decode", "nms"};

struct StageTimings {
    std::array<double, kStageNames.size()> ms{};
    double total_ms = 0;

    double& operator[](const std::string& stage);
};

struct EncoderCounters {
    int scene_encoder_calls = 0;   // full-frame encoder passes
    int region_encoder_calls = 0;  // per-region crop passes (use_rfp off)
};

struct InferenceResult {
    std::vector<GraspPose> grasps;  // sorted by score, after NMS
    LocationHeatmap heatmap;
    std::vector<RegionCenter> centers;
    std::vector<float> sizes;
    StageTimings timings;
    EncoderCounters counters;
    DecodeStats decode;
};

/// Throws std::invalid_argument when the frame does not match the configured resolution.
InferenceResult run_inference(const Model& model, const ImageFrame& frame);

nlohmann::json inference_to_json(const InferenceResult& result, const PipelineConfig& cfg, const std::string& frame_id);

struct TrainSample {
    std::string id;
    ImageFrame frame;
    Tensor input;  // [1,6,H,W]
    std::vector<GraspPose> labels;
    LocationHeatmap heatmap_target;
};

TrainSample make_train_sample(const SceneRecord& record);

struct StepLosses {
    double heatmap = 0;
    double rotation = 0;
    double refine = 0;
    double total() const { return heatmap + rotation + refine; }
};

class NonFiniteLossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Losses and their gradients for one scene. Region centers are chosen from
/// the target heatmap; region sizes are drawn from rng.
StepLosses compute_gradients(const Model& model, const TrainSample& sample, std::mt19937_64& rng, LayerGrads& grads);

class Trainer {
public:
    /// clip_norm > 0 rescales the whole gradient to at most that global L2 norm.
    Trainer(Model& model, float lr, float momentum = 0.9f, float clip_norm = 0.0f);

    /// One SGD step on one scene. Throws NonFiniteLossError before touching
    /// the parameters when a loss or the gradient is NaN or infinite.
    StepLosses step(const TrainSample& sample);

    /// Visit order for an epoch (seeded shuffle).
    std::vector<std::size_t> epoch_order(std::size_t n);

    double last_grad_norm() const { return last_grad_norm_; }
    void set_learning_rate(float lr) { opt_.set_lr(lr); }

private:
    Model& model_;
    SgdOptimizer opt_;
    float clip_norm_;
    double last_grad_norm_ = 0.0;
    std::mt19937_64 rng_;
};

struct TrainOptions {
    int epochs = 20;
    float lr = 0.05f;        // peak rate; cosine-decayed over the epochs
    float momentum = 0.9f;
    float clip_norm = 1.0f;
    long max_steps = -1;     // stop early after this many steps (< 0: no limit)
};

/// Cosine decay from base at epoch 0 towards base / 500 at the last epoch.
float cosine_lr(float base, int epoch, int epochs);

struct EpochLog {
    int epoch = 0;  // 1-based
    long steps = 0;
    double heatmap = 0, rotation = 0, refine = 0;  // means over the epoch's steps
    double total() const { return heatmap + rotation + refine; }
};

/// Runs the epochs, calling on_epoch after each one (also after a partial
/// epoch cut short by max_steps).
std::vector<EpochLog> train_model(Model& model, const std::vector<TrainSample>& samples, const TrainOptions& opts,
                                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct LatencySummary {
    double mean_ms = 0, median_ms = 0, p95_ms = 0;
};

/// Median averages the two middle values; p95 is the nearest-rank percentile.
LatencySummary summarize_latency(std::vector<double> samples_ms);

struct BenchReport {
    std::size_t frames = 0;
    std::size_t warmup = 0;
    std::array<LatencySummary, kStageNames.size()> stages{};
    LatencySummary end_to_end;
    EncoderCounters counters;  // per frame (identical across frames)
};

/// Times run_inference on every frame; the first `warmup` frames are excluded.
BenchReport run_benchmark(const Model& model, const std::vector<ImageFrame>& frames, std::size_t warmup = 5);

nlohmann::json bench_to_json(const BenchReport& report, const PipelineConfig& cfg);

}  // namespace e3g
