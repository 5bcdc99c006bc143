#include "doctest.h"

#include "gradcheck_suite.hpp"
#include "support.hpp"

#include "e3g/backbone.hpp"
#include "e3g/scene.hpp"

#include <cstring>

using namespace e3g;
using namespace e3g::test;

namespace {

ParameterSet zeroed(ParameterSet p)
{
    for (auto& [name, t] : p) t.fill(0.0f);
    return p;
}

Tensor random_input(const EncoderConfig& cfg, std::mt19937_64& rng)
{
    return random_tensor<float>(Shape{1, 6, static_cast<std::size_t>(cfg.input_h), static_cast<std::size_t>(cfg.input_w)},
                                rng, 0.0, 1.0);
}

}  // namespace

TEST_CASE("encoder config")
{
    EncoderConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.input_h = 100;
    CHECK_THROWS(cfg.validate());
    cfg = EncoderConfig{};
    cfg.stage_channels = {16, 16, 64, 128};
    CHECK_THROWS(cfg.validate());
    cfg.stage_channels = {16, 32, 64};
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("encoder and pyramid shapes at 96x96")
{
    const EncoderConfig cfg;
    std::mt19937_64 rng(21);
    const ParameterSet params = init_backbone_params(cfg, rng);
    const Tensor x = random_input(cfg, rng);
    const auto levels = encoder_forward(x, params, cfg);
    CHECK(levels[0].shape() == Shape{1, 16, 24, 24});
    CHECK(levels[1].shape() == Shape{1, 32, 12, 12});
    CHECK(levels[2].shape() == Shape{1, 64, 6, 6});
    CHECK(levels[3].shape() == Shape{1, 128, 3, 3});

    const auto pyr = fpn_forward(levels, params, cfg);
    CHECK(pyr.fused.shape() == Shape{1, 64, 24, 24});

    const LocationHeatmap hm = heatmap_head(pyr, params);
    CHECK(hm.height() == 24);
    CHECK(hm.width() == 24);
    for (float v : hm.values.data()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }

    SUBCASE("deterministic")
    {
        const auto again = encoder_forward(x, params, cfg);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(std::memcmp(again[i].ptr(), levels[i].ptr(), levels[i].size() * sizeof(float)) == 0);
        CHECK(heatmap_head(fpn_forward(again, params, cfg), params).values == hm.values);
    }
    SUBCASE("wrong input resolution is rejected")
    {
        CHECK_THROWS(encoder_forward(Tensor(Shape{1, 6, 64, 64}), params, cfg));
    }
}

TEST_CASE("zero weights")
{
    const EncoderConfig cfg;
    std::mt19937_64 rng(22);
    const ParameterSet params = zeroed(init_backbone_params(cfg, rng));
    const auto levels = encoder_forward(random_input(cfg, rng), params, cfg);
    for (const auto& l : levels)
        for (float v : l.data()) REQUIRE(v == 0.0f);
    const auto pyr = fpn_forward(levels, params, cfg);
    for (float v : pyr.fused.data()) REQUIRE(v == 0.0f);
    const LocationHeatmap hm = heatmap_head(pyr, params);
    for (float v : hm.values.data()) REQUIRE(v == 0.5f);
}

TEST_CASE("every backbone parameter receives a gradient that matches finite differences")
{
    std::mt19937_64 rng(23);
    std::vector<std::string> dead;
    const auto r = check_backbone(rng, &dead);
    std::string dead_list;
    for (const auto& d : dead) dead_list += d + " ";
    INFO("max rel err " << r.stats.max_error << "; dead: " << dead_list);
    CHECK(dead.empty());
    CHECK(r.stats.ok());
}

TEST_CASE("make_gt_heatmap")
{
    const CameraIntrinsics k = default_intrinsics();

    SUBCASE("empty labels")
    {
        const auto t = make_gt_heatmap({}, k);
        CHECK(t.heatmap.values.shape() == Shape{1, 24, 24});
        for (float v : t.heatmap.values.data()) CHECK(v == 0.0f);
    }

    // A point that projects to the center of heatmap cell (5, 7).
    auto at_cell = [&](double cu, double cv, double z) {
        const double u = heatmap_to_image(cu), v = heatmap_to_image(cv);
        GraspPose g;
        const auto p = pixel_to_point(u, v, z * 1000.0, k);
        g.x = p.x();
        g.y = p.y();
        g.z = p.z();
        return g;
    };

    SUBCASE("single peak")
    {
        const auto t = make_gt_heatmap({at_cell(5, 7, 0.55)}, k);
        CHECK(t.heatmap.at(7, 5) == doctest::Approx(1.0).epsilon(1e-6));
        float mx = 0;
        for (float v : t.heatmap.values.data()) mx = std::max(mx, v);
        CHECK(mx == t.heatmap.at(7, 5));
        // sigma 2: one cell away -> exp(-1/8)
        CHECK(t.heatmap.at(7, 6) == doctest::Approx(std::exp(-1.0 / 8.0)).epsilon(1e-5));
    }
    SUBCASE("two distant peaks")
    {
        const auto t = make_gt_heatmap({at_cell(3, 4, 0.5), at_cell(19, 4, 0.5)}, k);
        CHECK(t.heatmap.at(4, 3) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(t.heatmap.at(4, 19) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(t.heatmap.at(4, 11) == doctest::Approx(std::exp(-64.0 / 8.0)).epsilon(1e-4));
        CHECK(t.heatmap.at(4, 11) < 1.0f);
    }
    SUBCASE("labels behind the camera are skipped")
    {
        GraspPose g;
        g.z = -0.3;
        const auto t = make_gt_heatmap({g}, k);
        CHECK(t.skipped == 1);
        for (float v : t.heatmap.values.data()) CHECK(v == 0.0f);
    }
}

TEST_CASE("heatmap cell mapping")
{
    CHECK(image_to_heatmap(1.5) == doctest::Approx(0.0));
    CHECK(image_to_heatmap(-0.5) == doctest::Approx(-0.5));
    for (double c : {0.0, 3.25, 23.0}) CHECK(image_to_heatmap(heatmap_to_image(c)) == doctest::Approx(c));
}
