#include "doctest.h"

#include "support.hpp"

#include "e3g/pipeline.hpp"
#include "e3g/weights_io.hpp"

using namespace e3g;
using namespace e3g::test;

namespace {

Model zero_model(const PipelineConfig& cfg = {})
{
    Model m = init_model(cfg);
    for (auto& [n, t] : m.params) t.fill(0.0f);
    return m;
}

}  // namespace

TEST_CASE("pipeline config")
{
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.region_feature_dim() == 64u * 8u * 8u);

    SUBCASE("json round trip preserves the hash")
    {
        cfg.region.num_regions = 17;
        cfg.nms.rotation_rad = 0.4;
        cfg.ablation.use_rfp = false;
        cfg.tta_scales = {0.8f, 1.25f};
        const PipelineConfig back = config_from_json(config_to_json(cfg));
        CHECK(config_to_json(back) == config_to_json(cfg));
        CHECK(config_hash(back) == config_hash(cfg));
        CHECK(config_hash(back) != config_hash(PipelineConfig{}));
        CHECK(config_hash(cfg).size() == 16);
    }
    SUBCASE("keys are lower_snake_case")
    {
        const auto j = config_to_json(cfg);
        for (const auto& [key, value] : j.items())
            for (char c : key) CHECK((std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_'));
    }
    SUBCASE("out-of-range values are rejected")
    {
        PipelineConfig bad;
        bad.score_thresh = 1.5f;
        CHECK_THROWS(bad.validate());
        bad = PipelineConfig{};
        bad.region.grid_size = 1;
        CHECK_THROWS(bad.validate());
        bad = PipelineConfig{};
        bad.encoder.input_h = 90;
        CHECK_THROWS(bad.validate());
        nlohmann::json typo = config_to_json(PipelineConfig{});
        typo["k_region"] = 8;
        CHECK_THROWS_AS(config_from_json(typo), std::invalid_argument);
    }
}

TEST_CASE("parameter layout checks")
{
    Model m = init_model({});
    CHECK_NOTHROW(check_params_match(m.config, m.params));
    ParameterSet missing = m.params;
    missing.erase(missing.begin());
    CHECK_THROWS_AS(check_params_match(m.config, missing), WeightFormatError);
    ParameterSet reshaped = m.params;
    reshaped.begin()->second = Tensor(Shape{1});
    CHECK_THROWS_AS(check_params_match(m.config, reshaped), WeightFormatError);
}

TEST_CASE("inference")
{
    const SceneRecord rec = generate_record(31337, 0, 5);

    SUBCASE("zero weights give a total, well-formed result")
    {
        const Model m = zero_model();
        const InferenceResult r = run_inference(m, rec.frame);
        CHECK(r.heatmap.height() == 24);
        CHECK(r.heatmap.width() == 24);
        CHECK(r.counters.scene_encoder_calls == 1);
        CHECK(r.counters.region_encoder_calls == 0);
        for (std::size_t i = 1; i < r.grasps.size(); ++i) CHECK(r.grasps[i].score <= r.grasps[i - 1].score);
        const auto j = inference_to_json(r, m.config, rec.id);
        CHECK(j.at("frame_id") == rec.id);
        CHECK(j.at("config_hash") == config_hash(m.config));
        for (const char* s : kStageNames) CHECK(j.at("timings_ms").contains(s));
        CHECK(j.at("grasps").is_array());
    }
    SUBCASE("trained-shape weights: deterministic and bounded")
    {
        const Model m = init_model({});
        const InferenceResult a = run_inference(m, rec.frame);
        const InferenceResult b = run_inference(m, rec.frame);
        CHECK(grasps_to_json(a.grasps) == grasps_to_json(b.grasps));
        CHECK(a.heatmap.values == b.heatmap.values);
        CHECK(!a.centers.empty());
        CHECK(a.centers.size() <= 32);
        for (const auto& g : a.grasps) {
            CHECK(std::abs(g.theta) <= kHalfPi);
            CHECK(std::abs(g.gamma) <= kHalfPi);
            CHECK(std::abs(g.beta) <= kHalfPi);
            CHECK(g.width >= 0.0);
            CHECK(g.width <= kGripperMaxWidth);
            CHECK(g.score >= 0.0);
            CHECK(g.score <= 1.0);
        }
        for (float v : a.heatmap.values.data()) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
    SUBCASE("region features are shared unless RFP is disabled")
    {
        PipelineConfig cfg;
        cfg.ablation.use_rfp = false;
        Model m = init_model(cfg);
        const InferenceResult r = run_inference(m, rec.frame);
        CHECK(r.counters.scene_encoder_calls == 1);
        CHECK(r.counters.region_encoder_calls == static_cast<int>(r.centers.size()));
        CHECK(r.centers.size() > 1);
    }
    SUBCASE("location heatmap off still yields regions")
    {
        PipelineConfig cfg;
        cfg.ablation.use_fpn_heatmap = false;
        const InferenceResult r = run_inference(init_model(cfg), rec.frame);
        CHECK(r.centers.size() == 32);
    }
    SUBCASE("rotation heatmap off keeps one grasp per region at most")
    {
        PipelineConfig cfg;
        cfg.ablation.use_rotation_heatmap = false;
        cfg.score_thresh = 0.0f;
        const InferenceResult r = run_inference(zero_model(cfg), rec.frame);
        CHECK(r.grasps.size() <= r.centers.size());
    }
    SUBCASE("resolution mismatch")
    {
        const SceneRecord small = generate_record(5, 0, 2, default_intrinsics(64, 64));
        CHECK_THROWS_AS(run_inference(zero_model(), small.frame), std::invalid_argument);
    }
}

TEST_CASE("training")
{
    std::vector<TrainSample> samples;
    for (int i = 0; i < 3; ++i) samples.push_back(make_train_sample(generate_record(4242, i, 3)));
    CHECK(samples[0].input.shape() == Shape{1, 6, 96, 96});

    SUBCASE("losses are finite and gradients cover every parameter")
    {
        const Model m = init_model({});
        std::mt19937_64 rng(1);
        LayerGrads grads;
        const StepLosses l = compute_gradients(m, samples[0], rng, grads);
        CHECK(std::isfinite(l.total()));
        CHECK(l.heatmap > 0.0);
        CHECK(l.rotation > 0.0);
        for (const auto& [name, t] : m.params) {
            INFO(name);
            REQUIRE(grads.params.count(name) == 1);
            CHECK(grads.params.at(name).shape() == t.shape());
        }
    }
    SUBCASE("fixed-seed steps are bit-identical")
    {
        auto run = [&] {
            Model m = init_model({});
            Trainer tr(m, 0.05f, 0.9f, 1.0f);
            for (int s = 0; s < 4; ++s) tr.step(samples[static_cast<std::size_t>(s) % samples.size()]);
            return encode_weights(m.params);
        };
        CHECK(run() == run());
    }
    SUBCASE("gradient clipping bounds the update norm")
    {
        Model m = init_model({});
        const ParameterSet before = m.params;
        Trainer tr(m, 0.1f, 0.0f, 1.0f);
        tr.step(samples[0]);
        double sq = 0.0;
        for (const auto& [name, t] : m.params)
            for (std::size_t i = 0; i < t.size(); ++i) sq += std::pow(static_cast<double>(t[i]) - before.at(name)[i], 2);
        CHECK(std::sqrt(sq) <= 0.1 * 1.0 + 1e-4);
        CHECK(tr.last_grad_norm() > 0.0);
    }
    SUBCASE("non-finite loss aborts before the update")
    {
        Model m = init_model({});
        const ParameterSet before = m.params;
        TrainSample bad = samples[0];
        bad.input[100] = std::numeric_limits<float>::quiet_NaN();
        Trainer tr(m, 0.05f);
        CHECK_THROWS_AS(tr.step(bad), NonFiniteLossError);
        CHECK(m.params == before);
    }
    SUBCASE("zero epochs leave the initialization untouched")
    {
        Model m = init_model({});
        const ParameterSet init = m.params;
        TrainOptions opts;
        opts.epochs = 0;
        int calls = 0;
        CHECK(train_model(m, samples, opts, [&](const EpochLog&) { ++calls; }).empty());
        CHECK(calls == 0);
        CHECK(m.params == init);
    }
    SUBCASE("max_steps logs a partial epoch")
    {
        Model m = init_model({});
        TrainOptions opts;
        opts.epochs = 3;
        opts.max_steps = 4;
        const auto logs = train_model(m, samples, opts);
        REQUIRE(logs.size() == 2);
        CHECK(logs[0].steps == 3);
        CHECK(logs[1].steps == 1);
        CHECK(logs[1].epoch == 2);
    }
    SUBCASE("epoch order is a permutation")
    {
        Model m = init_model({});
        Trainer tr(m, 0.05f);
        auto order = tr.epoch_order(50);
        std::sort(order.begin(), order.end());
        for (std::size_t i = 0; i < 50; ++i) CHECK(order[i] == i);
    }
}

TEST_CASE("cosine schedule")
{
    CHECK(cosine_lr(0.05f, 0, 20) == doctest::Approx(0.05));
    CHECK(cosine_lr(0.05f, 19, 20) == doctest::Approx(0.05 / 500));
    for (int e = 1; e < 20; ++e) CHECK(cosine_lr(0.05f, e, 20) < cosine_lr(0.05f, e - 1, 20));
    CHECK(cosine_lr(0.05f, 0, 1) == doctest::Approx(0.05));
}

TEST_CASE("latency summaries")
{
    const auto s = summarize_latency({5, 1, 3, 2, 4, 100});
    CHECK(s.median_ms == doctest::Approx(3.5));
    CHECK(s.mean_ms == doctest::Approx(115.0 / 6));
    CHECK(s.p95_ms == doctest::Approx(100));
    const auto t = summarize_latency({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20});
    CHECK(t.p95_ms == doctest::Approx(19));
    CHECK(t.median_ms == doctest::Approx(10.5));
    CHECK(t.p95_ms >= t.median_ms);

    SUBCASE("benchmark report schema")
    {
        const Model m = zero_model();
        std::vector<ImageFrame> frames;
        for (int i = 0; i < 12; ++i) frames.push_back(make_frame(gen_scene(static_cast<std::uint64_t>(i), 3), default_intrinsics()));
        const BenchReport rep = run_benchmark(m, frames, 5);
        CHECK(rep.frames == 7);
        CHECK(rep.warmup == 5);
        const auto j = bench_to_json(rep, m.config);
        std::vector<std::string> keys;
        for (const auto& [k, v] : j.at("stages").items()) keys.push_back(k);
        std::vector<std::string> want(kStageNames.begin(), kStageNames.end());
        std::sort(keys.begin(), keys.end());
        std::sort(want.begin(), want.end());
        CHECK(keys == want);
        for (const auto& [k, v] : j.at("stages").items()) CHECK(v.at("p95_ms").get<double>() >= v.at("median_ms").get<double>());
        CHECK(j.at("end_to_end").at("mean_ms").get<double>() > 0.0);
    }
}
