#include "doctest.h"

#include "support.hpp"

#include "e3g/region.hpp"

#include <numeric>

using namespace e3g;
using namespace e3g::test;

namespace {

LocationHeatmap heatmap(std::size_t h, std::size_t w, float fill)
{
    return LocationHeatmap{Tensor(Shape{1, h, w}, fill)};
}

std::pair<double, double> to_cells(const Tensor& coords, std::size_t i, std::size_t h, std::size_t w)
{
    return {(coords[i * 2] + 1.0) / 2.0 * static_cast<double>(w - 1),
            (coords[i * 2 + 1] + 1.0) / 2.0 * static_cast<double>(h - 1)};
}

}  // namespace

TEST_CASE("select_candidates")
{
    SUBCASE("argmax fallback breaks ties in row-major order")
    {
        const auto c = select_candidates(heatmap(24, 24, 0.5f), 0.6f, 128);
        REQUIRE(c.size() == 1);
        CHECK(c[0].u == 0);
        CHECK(c[0].v == 0);
    }
    SUBCASE("single strong pixel")
    {
        auto hm = heatmap(24, 24, 0.1f);
        hm.values[5 * 24 + 17] = 0.9f;
        const auto c = select_candidates(hm, 0.5f, 128);
        REQUIRE(c.size() == 1);
        CHECK(c[0].u == 17);
        CHECK(c[0].v == 5);
        CHECK(c[0].graspability == 0.9f);
    }
    SUBCASE("truncation keeps the highest values")
    {
        std::mt19937_64 rng(31);
        auto hm = heatmap(24, 24, 0.1f);
        std::vector<std::size_t> cells(576);
        std::iota(cells.begin(), cells.end(), 0);
        std::shuffle(cells.begin(), cells.end(), rng);
        std::uniform_real_distribution<float> val(0.4f, 1.0f);
        for (std::size_t i = 0; i < 300; ++i) hm.values[cells[i]] = val(rng);

        std::vector<std::size_t> ref;
        for (std::size_t i = 0; i < 576; ++i)
            if (hm.values[i] >= 0.3f) ref.push_back(i);
        REQUIRE(ref.size() == 300);
        std::stable_sort(ref.begin(), ref.end(), [&](auto a, auto b) { return hm.values[a] > hm.values[b]; });
        ref.resize(128);

        const auto c = select_candidates(hm, 0.3f, 128);
        REQUIRE(c.size() == 128);
        for (std::size_t i = 0; i < 128; ++i) CHECK(static_cast<std::size_t>(c[i].v * 24 + c[i].u) == ref[i]);
    }
}

TEST_CASE("farthest_point_sampling")
{
    SUBCASE("k = 1")
    {
        const std::vector<Point2> pts{{0, 0}, {3, 4}, {1, 1}};
        CHECK(farthest_point_sampling(pts, 1, 2) == std::vector<std::size_t>{2});
    }
    SUBCASE("collinear points")
    {
        const std::vector<Point2> pts{{0, 0}, {1, 0}, {2, 0}, {10, 0}};
        const auto got = farthest_point_sampling(pts, 2, 0);
        CHECK(got == std::vector<std::size_t>{0, 3});
        std::vector<std::size_t> best;
        brute_force_maximin(pts, 2, 0, &best);
        CHECK(best == std::vector<std::size_t>{0, 3});
    }
    SUBCASE("k beyond the candidate count returns everything")
    {
        const std::vector<Point2> pts{{0, 0}, {1, 0}, {5, 5}};
        auto got = farthest_point_sampling(pts, 10, 1);
        CHECK(got.size() == 3);
        std::sort(got.begin(), got.end());
        CHECK(got == std::vector<std::size_t>{0, 1, 2});
    }
    SUBCASE("matches the greedy reference on 100 random sets")
    {
        std::mt19937_64 rng(32);
        std::uniform_int_distribution<int> n_dist(1, 32), coord(0, 23);
        for (int trial = 0; trial < 100; ++trial) {
            const auto n = static_cast<std::size_t>(n_dist(rng));
            std::vector<Point2> pts(n);
            for (auto& p : pts) p = {static_cast<double>(coord(rng)), static_cast<double>(coord(rng))};
            const auto k = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 5)(rng));
            const auto seed = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(n) - 1)(rng));
            REQUIRE(farthest_point_sampling(pts, k, seed) == reference_fps(pts, k, seed));
        }
    }
    SUBCASE("permutation stable when the selection is unambiguous")
    {
        std::mt19937_64 rng(33);
        std::uniform_real_distribution<double> coord(0, 24);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Point2> pts(20);
            for (auto& p : pts) p = {coord(rng), coord(rng)};
            const auto a = farthest_point_sampling(pts, 5, 0);
            std::vector<std::size_t> perm(20);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<Point2> shuffled(20);
            std::size_t seed = 0;
            for (std::size_t i = 0; i < 20; ++i) {
                shuffled[i] = pts[perm[i]];
                if (perm[i] == 0) seed = i;
            }
            const auto b = farthest_point_sampling(shuffled, 5, seed);
            std::vector<std::size_t> mapped;
            for (auto i : b) mapped.push_back(perm[i]);
            std::sort(mapped.begin(), mapped.end());
            auto sa = a;
            std::sort(sa.begin(), sa.end());
            CHECK(mapped == sa);
        }
    }
    SUBCASE("bad seed index")
    {
        CHECK_THROWS(farthest_point_sampling({{0, 0}}, 1, 3));
    }
}

TEST_CASE("region_grid_coords")
{
    SUBCASE("2x2 lattice at unit normalized depth")
    {
        const Tensor c = region_grid_coords({10, 10, 0.5, 1.0f}, 2.0f, 2, 24, 24);
        REQUIRE(c.shape() == Shape{4, 2});
        const std::pair<double, double> expect[4] = {{9, 9}, {11, 9}, {9, 11}, {11, 11}};
        for (std::size_t i = 0; i < 4; ++i) {
            const auto [u, v] = to_cells(c, i, 24, 24);
            CHECK(u == doctest::Approx(expect[i].first));
            CHECK(v == doctest::Approx(expect[i].second));
        }
    }
    SUBCASE("odd grid puts the middle sample on the center")
    {
        const Tensor c = region_grid_coords({7.25, 12.5, 0.8, 1.0f}, 9.0f, 5, 24, 24);
        const auto [u, v] = to_cells(c, 12, 24, 24);
        CHECK(u == doctest::Approx(7.25).epsilon(1e-6));
        CHECK(v == doctest::Approx(12.5).epsilon(1e-6));
    }
    SUBCASE("doubling depth halves the extent")
    {
        const Tensor a = region_grid_coords({12, 12, 0.4, 1.0f}, 8.0f, 4, 24, 24);
        const Tensor b = region_grid_coords({12, 12, 0.8, 1.0f}, 8.0f, 4, 24, 24);
        const double ea = to_cells(a, 3, 24, 24).first - to_cells(a, 0, 24, 24).first;
        const double eb = to_cells(b, 3, 24, 24).first - to_cells(b, 0, 24, 24).first;
        CHECK(ea == doctest::Approx(2.0 * eb));
        CHECK(ea == doctest::Approx(8.0 * 0.5 / 0.4));
    }
    SUBCASE("rejections")
    {
        CHECK_THROWS(region_grid_coords({1, 1, 0.5, 1.0f}, 0.0f, 4, 24, 24));
        CHECK_THROWS(region_grid_coords({1, 1, 0.5, 1.0f}, 2.0f, 1, 24, 24));
    }
}

TEST_CASE("sample_region_size")
{
    std::mt19937_64 rng(34);
    CHECK(sample_region_size(rng, false, 12.0f) == 12.0f);
    double sum = 0;
    for (int i = 0; i < 10000; ++i) {
        const float s = sample_region_size(rng, true, 12.0f);
        REQUIRE(s >= 0.7f * 12.0f);
        REQUIRE(s <= 1.3f * 12.0f);
        sum += s;
    }
    CHECK(std::abs(sum / 10000.0 - 12.0) < 0.02 * 12.0);
}

TEST_CASE("propagate_region_features")
{
    std::mt19937_64 rng(35);
    SUBCASE("constant field")
    {
        const FeaturePyramid pyr{Tensor(Shape{1, 4, 24, 24}, 3.0f)};
        const std::vector<RegionCenter> centers{{3.3, 4.1, 0.5, 1.0f}, {18, 17, 0.9, 1.0f}, {12, 12, 0.35, 1.0f}};
        const auto batch = propagate_region_features(pyr, centers, {5.0f, 6.0f, 7.5f}, 8);
        REQUIRE(batch.features.shape() == Shape{3, 4, 8, 8});
        for (float v : batch.features.data()) CHECK(v == doctest::Approx(3.0f));
    }
    SUBCASE("region outside the map reads zero")
    {
        const FeaturePyramid pyr{random_tensor<float>(Shape{1, 2, 24, 24}, rng)};
        const auto batch = propagate_region_features(pyr, {{100, -50, 0.5, 1.0f}}, {6.0f}, 4);
        for (float v : batch.features.data()) CHECK(v == 0.0f);
    }
    SUBCASE("lattice-aligned region equals the direct crop")
    {
        const FeaturePyramid pyr{random_tensor<float>(Shape{1, 3, 24, 24}, rng)};
        // s = 4, g = 5, d = 1: samples on integer cells (u-2..u+2, v-2..v+2).
        const auto batch = propagate_region_features(pyr, {{9, 14, 0.5, 1.0f}}, {4.0f}, 5);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 5; ++i)
                for (std::size_t j = 0; j < 5; ++j)
                    CHECK(batch.features.at(0, c, i, j) == pyr.fused.at(0, c, 12 + i, 7 + j));
    }
    SUBCASE("gradient path from region features to the scene map")
    {
        const FeaturePyramid pyr{random_tensor<float>(Shape{1, 2, 24, 24}, rng)};
        const std::vector<RegionCenter> centers{{8.4, 10.7, 0.6, 1.0f}};
        const auto base = propagate_region_features(pyr, centers, {6.0f}, 8);
        FeaturePyramid bumped = pyr;
        bumped.fused.at(0, 1, 11, 8) += 1.0f;
        const auto moved = propagate_region_features(bumped, centers, {6.0f}, 8);
        bool changed = false;
        for (std::size_t i = 0; i < base.features.size(); ++i) changed = changed || base.features[i] != moved.features[i];
        CHECK(changed);

        RegionSampleCache<float> cache;
        propagate_region_features(pyr, centers, {6.0f}, 8, 0.5, &cache);
        const Tensor g = propagate_region_features_backward(pyr, cache, Tensor(base.features.shape(), 1.0f));
        CHECK(g.at(0, 1, 11, 8) > 0.0f);
        CHECK(g.at(0, 1, 0, 0) == 0.0f);
    }
    SUBCASE("no centers")
    {
        const FeaturePyramid pyr{Tensor(Shape{1, 1, 4, 4})};
        CHECK_THROWS(propagate_region_features(pyr, {}, {}, 4));
    }
}

TEST_CASE("choose_region_centers")
{
    const CameraIntrinsics k = default_intrinsics();
    ImageFrame f{Tensor(Shape{3, 96, 96}), Tensor(Shape{1, 96, 96}, 600.0f), k};
    auto hm = heatmap(24, 24, 0.0f);
    std::mt19937_64 rng(36);
    std::uniform_real_distribution<float> val(0.31f, 0.99f);
    for (int i = 0; i < 60; ++i) hm.values[static_cast<std::size_t>(rng() % 576)] = val(rng);
    RegionConfig cfg;
    const auto centers = choose_region_centers(hm, f, cfg);
    REQUIRE(!centers.empty());
    CHECK(centers.size() <= 32);
    float best = 0;
    for (float v : hm.values.data()) best = std::max(best, v);
    CHECK(centers[0].graspability == best);
    for (const auto& c : centers) CHECK(c.depth_m == doctest::Approx(0.6));

    SUBCASE("cells without depth are dropped")
    {
        ImageFrame holes = f;
        holes.depth.fill(0.0f);
        CHECK(choose_region_centers(hm, holes, cfg).empty());
    }
}
