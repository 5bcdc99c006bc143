#pragma once

// Region feature propagation: pick spread-out graspable centers from the
// location heatmap and sample the shared scene feature map on a depth-scaled
// g x g lattice around each of them, all in one grid-sampling pass.

#include "e3g/backbone.hpp"

#include <random>
#include <vector>

namespace e3g {

struct RegionConfig {
    float candidate_threshold = 0.3f;
    int max_candidates = 128;
    int num_regions = 32;
    int grid_size = 8;
    float base_size = 12.0f;    // heatmap cells
    double reference_depth = 0.5;  // meters; normalized depth d = reference_depth / depth

    void validate() const;
};

struct Candidate {
    int u = 0, v = 0;  // heatmap column, row
    float graspability = 0;
};

struct RegionCenter {
    double u = 0, v = 0;  // heatmap coordinates
    double depth_m = 0;
    float graspability = 0;
};

template <typename T>
struct BasicRegionBatch {
    BasicTensor<T> features;  // [k,Cf,g,g]
    std::vector<RegionCenter> centers;
    std::vector<float> sizes;
    int grid_size = 0;

    std::size_t count() const { return centers.size(); }
};
using RegionBatch = BasicRegionBatch<float>;

/// Cells with value >= threshold, best first (row-major among ties), at most
/// max_n. Falls back to the single argmax cell when nothing passes.
std::vector<Candidate> select_candidates(const LocationHeatmap& heatmap, float threshold, int max_n);

struct Point2 {
    double x = 0, y = 0;
};

/// Greedy maximin subset starting at seed_index; ties go to the smaller
/// index. k larger than the point count returns every point.
std::vector<std::size_t> farthest_point_sampling(const std::vector<Point2>& points, std::size_t k,
                                                 std::size_t seed_index);

/// g*g normalized sampling coordinates [g*g,2], row-major over the lattice,
/// spanning center +- (s/2) * (reference_depth / depth) heatmap cells.
Tensor region_grid_coords(const RegionCenter& center, float s, int g, std::size_t heatmap_h, std::size_t heatmap_w,
                          double reference_depth = 0.5);

/// Uniform(0.7 s, 1.3 s) while training, exactly base_s otherwise.
float sample_region_size(std::mt19937_64& rng, bool training, float base_s);

template <typename T>
struct RegionSampleCache {
    BasicTensor<T> coords;  // [1,k*g*g,2]
    std::size_t feature_h = 0, feature_w = 0;
};

/// One grid-sampling pass over all regions.
template <typename T>
BasicRegionBatch<T> propagate_region_features(const BasicFeaturePyramid<T>& pyramid,
                                              const std::vector<RegionCenter>& centers,
                                              const std::vector<float>& sizes, int g, double reference_depth = 0.5,
                                              RegionSampleCache<T>* cache = nullptr);

/// Gradient of the region features w.r.t. the fused scene map.
template <typename T>
BasicTensor<T> propagate_region_features_backward(const BasicFeaturePyramid<T>& pyramid,
                                                  const RegionSampleCache<T>& cache,
                                                  const BasicTensor<T>& grad_features);

/// Heatmap candidates -> FPS (seeded at the best candidate) -> region centers
/// with depth read from the frame. Cells without valid depth are dropped.
std::vector<RegionCenter> choose_region_centers(const LocationHeatmap& heatmap, const ImageFrame& frame,
                                                const RegionConfig& cfg);

/// Depth (meters) at the image pixel under a heatmap coordinate, 0 if invalid.
double depth_at_heatmap(const ImageFrame& frame, double u, double v);

/// PPM overlay of region footprints on the frame's RGB (debug aid).
void write_region_overlay(const std::string& path, const ImageFrame& frame, const std::vector<RegionCenter>& centers,
                          const std::vector<float>& sizes, double reference_depth = 0.5);

}  // namespace e3g
