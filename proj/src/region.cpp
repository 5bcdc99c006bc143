#include "e3g/region.hpp"

#include "e3g/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace e3g {

void RegionConfig::validate() const
{
    if (!(candidate_threshold >= 0.0f && candidate_threshold <= 1.0f))
        throw std::invalid_argument("region: candidate threshold must be in [0,1]");
    if (max_candidates < 1 || num_regions < 1) throw std::invalid_argument("region: counts must be >= 1");
    if (grid_size < 2) throw std::invalid_argument("region: grid size must be >= 2");
    if (!(base_size > 0.0f)) throw std::invalid_argument("region: base size must be > 0");
    if (!(reference_depth > 0.0)) throw std::invalid_argument("region: reference depth must be > 0");
}

std::vector<Candidate> select_candidates(const LocationHeatmap& heatmap, float threshold, int max_n)
{
    if (!(threshold >= 0.0f && threshold <= 1.0f)) throw std::invalid_argument("select_candidates: threshold outside [0,1]");
    if (max_n < 1) throw std::invalid_argument("select_candidates: max_n must be >= 1");
    const std::size_t h = heatmap.height(), w = heatmap.width();
    std::vector<Candidate> out;
    std::size_t best = 0;
    for (std::size_t i = 0; i < h * w; ++i) {
        const float val = heatmap.values[i];
        if (val > heatmap.values[best]) best = i;
        if (val >= threshold) out.push_back({static_cast<int>(i % w), static_cast<int>(i / w), val});
    }
    if (out.empty()) return {{static_cast<int>(best % w), static_cast<int>(best / w), heatmap.values[best]}};
    // Stable sort keeps row-major order among equal values.
    std::stable_sort(out.begin(), out.end(),
                     [](const Candidate& a, const Candidate& b) { return a.graspability > b.graspability; });
    if (out.size() > static_cast<std::size_t>(max_n)) out.resize(static_cast<std::size_t>(max_n));
    return out;
}

std::vector<std::size_t> farthest_point_sampling(const std::vector<Point2>& points, std::size_t k,
                                                 std::size_t seed_index)
{
    const std::size_t n = points.size();
    if (n == 0 || k == 0) return {};
    if (seed_index >= n) throw std::invalid_argument("farthest_point_sampling: seed index out of range");
    k = std::min(k, n);
    std::vector<std::size_t> chosen{seed_index};
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<char> taken(n, 0);
    taken[seed_index] = 1;
    std::size_t last = seed_index;
    while (chosen.size() < k) {
        std::size_t pick = n;
        double pick_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const double dx = points[i].x - points[last].x, dy = points[i].y - points[last].y;
            nearest[i] = std::min(nearest[i], dx * dx + dy * dy);
            if (nearest[i] > pick_d) {
                pick_d = nearest[i];
                pick = i;
            }
        }
        taken[pick] = 1;
        chosen.push_back(pick);
        last = pick;
    }
    return chosen;
}

Tensor region_grid_coords(const RegionCenter& center, float s, int g, std::size_t heatmap_h, std::size_t heatmap_w,
                          double reference_depth)
{
    if (!(s > 0.0f)) throw std::invalid_argument("region_grid_coords: size must be > 0");
    if (g < 2) throw std::invalid_argument("region_grid_coords: grid size must be >= 2");
    if (!(center.depth_m > 0.0)) throw std::invalid_argument("region_grid_coords: center depth must be > 0");
    const double d = reference_depth / center.depth_m;
    const auto gg = static_cast<std::size_t>(g);
    Tensor coords(Shape{gg * gg, 2});
    const double step = static_cast<double>(s) / (g - 1);
    const double half = static_cast<double>(s) / 2.0;
    const double sx = 2.0 / (static_cast<double>(heatmap_w) - 1.0);
    const double sy = 2.0 / (static_cast<double>(heatmap_h) - 1.0);
    for (std::size_t i = 0; i < gg; ++i)
        for (std::size_t j = 0; j < gg; ++j) {
            const double oy = -half + step * static_cast<double>(i);
            const double ox = -half + step * static_cast<double>(j);
            coords[(i * gg + j) * 2] = static_cast<float>((center.u + d * ox) * sx - 1.0);
            coords[(i * gg + j) * 2 + 1] = static_cast<float>((center.v + d * oy) * sy - 1.0);
        }
    return coords;
}

float sample_region_size(std::mt19937_64& rng, bool training, float base_s)
{
    if (!(base_s > 0.0f)) throw std::invalid_argument("sample_region_size: base size must be > 0");
    if (!training) return base_s;
    std::uniform_real_distribution<float> dist(0.7f * base_s, 1.3f * base_s);
    return dist(rng);
}

template <typename T>
BasicRegionBatch<T> propagate_region_features(const BasicFeaturePyramid<T>& pyramid,
                                              const std::vector<RegionCenter>& centers,
                                              const std::vector<float>& sizes, int g, double reference_depth,
                                              RegionSampleCache<T>* cache)
{
    if (centers.empty()) throw std::invalid_argument("propagate_region_features: no region centers");
    if (sizes.size() != centers.size()) throw std::invalid_argument("propagate_region_features: one size per center");
    const auto& f = pyramid.fused;
    const std::size_t C = f.dim(1), H = f.dim(2), W = f.dim(3), k = centers.size();
    const std::size_t gg = static_cast<std::size_t>(g) * static_cast<std::size_t>(g);
    BasicTensor<T> coords(Shape{1, k * gg, 2});
    for (std::size_t r = 0; r < k; ++r) {
        const Tensor c = region_grid_coords(centers[r], sizes[r], g, H, W, reference_depth);
        std::copy(c.data().begin(), c.data().end(), coords.data().begin() + static_cast<std::ptrdiff_t>(r * gg * 2));
    }
    const BasicTensor<T> sampled = grid_sample_bilinear(f, coords);  // [1,C,k*gg]
    BasicRegionBatch<T> batch;
    batch.features = BasicTensor<T>(Shape{k, C, static_cast<std::size_t>(g), static_cast<std::size_t>(g)});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t r = 0; r < k; ++r)
            std::copy_n(sampled.ptr() + c * k * gg + r * gg, gg, batch.features.ptr() + (r * C + c) * gg);
    batch.centers = centers;
    batch.sizes = sizes;
    batch.grid_size = g;
    if (cache) {
        cache->coords = std::move(coords);
        cache->feature_h = H;
        cache->feature_w = W;
    }
    return batch;
}

template <typename T>
BasicTensor<T> propagate_region_features_backward(const BasicFeaturePyramid<T>& pyramid,
                                                  const RegionSampleCache<T>& cache,
                                                  const BasicTensor<T>& grad_features)
{
    const std::size_t k = grad_features.dim(0), C = grad_features.dim(1);
    const std::size_t gg = grad_features.dim(2) * grad_features.dim(3);
    BasicTensor<T> grad_sampled(Shape{1, C, k * gg});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t r = 0; r < k; ++r)
            std::copy_n(grad_features.ptr() + (r * C + c) * gg, gg, grad_sampled.ptr() + c * k * gg + r * gg);
    return grid_sample_bilinear_backward(pyramid.fused, cache.coords, grad_sampled).feature;
}

double depth_at_heatmap(const ImageFrame& frame, double u, double v)
{
    const long px = std::lround(heatmap_to_image(u)), py = std::lround(heatmap_to_image(v));
    if (px < 0 || py < 0 || px >= frame.width() || py >= frame.height()) return 0.0;
    return frame.depth[static_cast<std::size_t>(py * frame.width() + px)] / 1000.0;
}

std::vector<RegionCenter> choose_region_centers(const LocationHeatmap& heatmap, const ImageFrame& frame,
                                                const RegionConfig& cfg)
{
    cfg.validate();
    std::vector<RegionCenter> pool;
    for (const auto& c : select_candidates(heatmap, cfg.candidate_threshold, cfg.max_candidates)) {
        const double depth = depth_at_heatmap(frame, c.u, c.v);
        if (depth > 0.0) pool.push_back({static_cast<double>(c.u), static_cast<double>(c.v), depth, c.graspability});
    }
    if (pool.empty()) return {};
    std::vector<Point2> pts;
    pts.reserve(pool.size());
    for (const auto& c : pool) pts.push_back({c.u, c.v});
    // Candidates arrive best-first, so index 0 is the highest graspability.
    std::vector<RegionCenter> centers;
    for (auto i : farthest_point_sampling(pts, static_cast<std::size_t>(cfg.num_regions), 0)) centers.push_back(pool[i]);
    return centers;
}

void write_region_overlay(const std::string& path, const ImageFrame& frame, const std::vector<RegionCenter>& centers,
                          const std::vector<float>& sizes, double reference_depth)
{
    Tensor rgb = frame.rgb;
    const int H = frame.height(), W = frame.width();
    const std::size_t plane = static_cast<std::size_t>(H * W);
    auto paint = [&](long x, long y) {
        if (x < 0 || y < 0 || x >= W || y >= H) return;
        const std::size_t i = static_cast<std::size_t>(y * W + x);
        rgb[i] = 1.0f;
        rgb[plane + i] = 0.0f;
        rgb[2 * plane + i] = 0.0f;
    };
    for (std::size_t r = 0; r < centers.size(); ++r) {
        const double half = 0.5 * sizes[r] * reference_depth / centers[r].depth_m;
        const long x0 = std::lround(heatmap_to_image(centers[r].u - half));
        const long x1 = std::lround(heatmap_to_image(centers[r].u + half));
        const long y0 = std::lround(heatmap_to_image(centers[r].v - half));
        const long y1 = std::lround(heatmap_to_image(centers[r].v + half));
        for (long x = x0; x <= x1; ++x) {
            paint(x, y0);
            paint(x, y1);
        }
        for (long y = y0; y <= y1; ++y) {
            paint(x0, y);
            paint(x1, y);
        }
    }
    write_rgb_ppm(path, rgb);
}

template BasicRegionBatch<float> propagate_region_features(const BasicFeaturePyramid<float>&,
                                                           const std::vector<RegionCenter>&, const std::vector<float>&,
                                                           int, double, RegionSampleCache<float>*);
template BasicRegionBatch<double> propagate_region_features(const BasicFeaturePyramid<double>&,
                                                            const std::vector<RegionCenter>&,
                                                            const std::vector<float>&, int, double,
                                                            RegionSampleCache<double>*);
template BasicTensor<float> propagate_region_features_backward(const BasicFeaturePyramid<float>&,
                                                               const RegionSampleCache<float>&,
                                                               const BasicTensor<float>&);
template BasicTensor<double> propagate_region_features_backward(const BasicFeaturePyramid<double>&,
                                                                const RegionSampleCache<double>&,
                                                                const BasicTensor<double>&);

}  // namespace e3g
