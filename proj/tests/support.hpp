#pragma once

// Test helpers and reference implementations written independently of the
// library code they check.

#include "e3g/force_closure.hpp"
#include "e3g/region.hpp"
#include "e3g/rotation.hpp"
#include "e3g/tensor.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace e3g::test {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg(double d) { return d * kPi / 180.0; }

template <typename T = double>
BasicTensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    BasicTensor<T> t(shape);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
}

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

// ---------------------------------------------------------------------------
// Central finite differences

inline constexpr double kFdStep = 1e-4;
inline constexpr double kFdTolerance = 1e-4;
inline constexpr double kFdFloor = 1e-6;

/// Relative error with the denominator floored at 1e-6.
inline double grad_error(double analytic, double numeric)
{
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFdFloor});
}

struct GradStats {
    double max_error = 0.0;
    std::size_t checked = 0;
    std::size_t nonzero = 0;
    std::size_t skipped = 0;  // entries whose +-h step crosses a ReLU kink

    bool ok() const { return max_error < kFdTolerance; }
    void merge(const GradStats& o)
    {
        max_error = std::max(max_error, o.max_error);
        checked += o.checked;
        nonzero += o.nonzero;
        skipped += o.skipped;
    }
};

/// Checks analytic[i] against a central difference of loss() w.r.t. x[i].
/// With max_checks > 0 only that many random entries are visited.
template <typename Loss>
GradStats check_grad(Tensor64& x, const Tensor64& analytic, Loss&& loss, std::size_t max_checks = 0,
                     std::mt19937_64* rng = nullptr)
{
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (max_checks > 0 && max_checks < idx.size() && rng) {
        std::shuffle(idx.begin(), idx.end(), *rng);
        idx.resize(max_checks);
    }
    GradStats st;
    for (std::size_t i : idx) {
        const double saved = x[i];
        x[i] = saved + kFdStep;
        const double up = loss();
        x[i] = saved - kFdStep;
        const double down = loss();
        x[i] = saved;
        const double numeric = (up - down) / (2.0 * kFdStep);
        st.max_error = std::max(st.max_error, grad_error(analytic[i], numeric));
        ++st.checked;
        if (std::abs(analytic[i]) > kFdFloor) ++st.nonzero;
    }
    return st;
}

/// check_grad for piecewise-linear networks. pattern() returns the sign of
/// every ReLU input at the current x; an entry whose +h and -h evaluations
/// see different patterns straddles a kink and is replaced by the next one.
template <typename Loss, typename Pattern>
GradStats check_grad_piecewise(Tensor64& x, const Tensor64& analytic, Loss&& loss, Pattern&& pattern,
                               std::size_t max_checks, std::mt19937_64& rng)
{
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    GradStats st;
    for (std::size_t i : idx) {
        if (st.checked == max_checks) break;
        const double saved = x[i];
        x[i] = saved + kFdStep;
        const double up = loss();
        const auto sign_up = pattern();
        x[i] = saved - kFdStep;
        const double down = loss();
        const auto sign_down = pattern();
        x[i] = saved;
        if (sign_up != sign_down) {
            ++st.skipped;
            continue;
        }
        const double numeric = (up - down) / (2.0 * kFdStep);
        st.max_error = std::max(st.max_error, grad_error(analytic[i], numeric));
        ++st.checked;
        if (std::abs(analytic[i]) > kFdFloor) ++st.nonzero;
    }
    return st;
}

// ---------------------------------------------------------------------------
// Bilinear sampling: x = -1 / +1 at the first / last column center, each of
// the four neighbors read as zero outside the map.

inline std::vector<double> naive_bilinear(const Tensor& f, std::size_t n, double x, double y)
{
    const std::size_t C = f.dim(1), H = f.dim(2), W = f.dim(3);
    const double px = (x + 1.0) * 0.5 * static_cast<double>(W - 1);
    const double py = (y + 1.0) * 0.5 * static_cast<double>(H - 1);
    const double x0 = std::floor(px), y0 = std::floor(py);
    std::vector<double> out(C, 0.0);
    for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
            const double cx = x0 + dx, cy = y0 + dy;
            const double w = (1.0 - std::abs(px - cx)) * (1.0 - std::abs(py - cy));
            if (cx < 0 || cy < 0 || cx > static_cast<double>(W - 1) || cy > static_cast<double>(H - 1)) continue;
            for (std::size_t c = 0; c < C; ++c)
                out[c] += w * f.at(n, c, static_cast<std::size_t>(cy), static_cast<std::size_t>(cx));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Farthest point sampling by recomputing every set distance from scratch.

inline std::vector<std::size_t> reference_fps(const std::vector<Point2>& pts, std::size_t k, std::size_t seed)
{
    std::vector<std::size_t> chosen{seed};
    k = std::min(k, pts.size());
    while (chosen.size() < k) {
        double best = -1.0;
        std::size_t pick = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
            double nearest = std::numeric_limits<double>::infinity();
            for (std::size_t j : chosen)
                nearest = std::min(nearest, std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
            if (nearest > best) {
                best = nearest;
                pick = i;
            }
        }
        chosen.push_back(pick);
    }
    return chosen;
}

/// Best achievable maximin value over all subsets of size k containing seed.
inline double brute_force_maximin(const std::vector<Point2>& pts, std::size_t k, std::size_t seed,
                                  std::vector<std::size_t>* best_set = nullptr)
{
    const std::size_t n = pts.size();
    double best = -1.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (!(mask & (1u << seed)) || static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
        double m = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> set;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) set.push_back(i);
        for (std::size_t a = 0; a < set.size(); ++a)
            for (std::size_t b = a + 1; b < set.size(); ++b)
                m = std::min(m, std::hypot(pts[set[a]].x - pts[set[b]].x, pts[set[a]].y - pts[set[b]].y));
        if (m > best) {
            best = m;
            if (best_set) *best_set = set;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Grasp NMS, quadratic, with rotations composed from axis-angle factors.

inline Eigen::Matrix3d oracle_rotation(const GraspPose& g)
{
    return (Eigen::AngleAxisd(g.theta, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(g.beta, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(g.gamma, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

inline double oracle_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b)
{
    const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

inline std::vector<std::size_t> reference_nms(const std::vector<GraspPose>& g, double trans, double rot)
{
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < g.size(); ++i) {
        bool suppressed = false;
        for (std::size_t j = 0; j < i && !suppressed; ++j) {
            if (std::find(kept.begin(), kept.end(), j) == kept.end()) continue;
            const double d = std::sqrt(std::pow(g[i].x - g[j].x, 2) + std::pow(g[i].y - g[j].y, 2) +
                                       std::pow(g[i].z - g[j].z, 2));
            suppressed = d < trans && oracle_angle(oracle_rotation(g[i]), oracle_rotation(g[j])) < rot;
        }
        if (!suppressed) kept.push_back(i);
    }
    return kept;
}

// ---------------------------------------------------------------------------
// Friction cones as 64-generator polyhedral cones.

inline constexpr int kConeGenerators = 64;

/// True when direction l lies inside the polyhedral cone inscribed in the
/// friction cone of normal n with half-angle atan(mu).
inline bool inside_sampled_cone(const Eigen::Vector3d& n, const Eigen::Vector3d& l, double mu)
{
    const Eigen::Vector3d t1 = n.unitOrthogonal();
    const Eigen::Vector3d t2 = n.cross(t1);
    std::vector<Eigen::Vector3d> gen;
    for (int k = 0; k < kConeGenerators; ++k) {
        const double phi = 2.0 * kPi * k / kConeGenerators;
        gen.push_back(n + mu * (std::cos(phi) * t1 + std::sin(phi) * t2));
    }
    for (int k = 0; k < kConeGenerators; ++k) {
        const Eigen::Vector3d face = gen[static_cast<std::size_t>(k)].cross(gen[static_cast<std::size_t>((k + 1) % kConeGenerators)]);
        if (face.dot(l) < 0.0) return false;
    }
    return l.dot(n) > 0.0;
}

struct OracleContact {
    Eigen::Vector3d point;
    Eigen::Vector3d inward;  // inward surface normal
};

/// Entry of origin + t dir (t in [0, t_max]) into a sphere or box.
inline std::optional<OracleContact> oracle_ray(const Primitive& p, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                               double t_max)
{
    if (p.kind == PrimitiveKind::sphere) {
        const Eigen::Vector3d m = o - p.translation;
        const double r = p.size[0];
        const double b = m.dot(d), c = m.squaredNorm() - r * r;
        const double disc = b * b - c;
        if (c <= 0.0 || disc < 0.0) return std::nullopt;
        const double t = -b - std::sqrt(disc);
        if (t < 0.0 || t > t_max) return std::nullopt;
        const Eigen::Vector3d hit = o + t * d;
        return OracleContact{hit, (p.translation - hit).normalized()};
    }
    if (p.kind == PrimitiveKind::box) {
        const Eigen::Vector3d lo = p.rotation.transpose() * (o - p.translation);
        const Eigen::Vector3d ld = p.rotation.transpose() * d;
        double t_in = -std::numeric_limits<double>::infinity(), t_out = std::numeric_limits<double>::infinity();
        int axis = -1;
        for (int i = 0; i < 3; ++i) {
            if (std::abs(ld[i]) < 1e-15) {
                if (std::abs(lo[i]) > p.size[i]) return std::nullopt;
                continue;
            }
            double a = (-p.size[i] - lo[i]) / ld[i], b = (p.size[i] - lo[i]) / ld[i];
            if (a > b) std::swap(a, b);
            if (a > t_in) {
                t_in = a;
                axis = i;
            }
            t_out = std::min(t_out, b);
        }
        if (axis < 0 || t_in > t_out || t_in < 0.0 || t_in > t_max) return std::nullopt;
        Eigen::Vector3d local_n = Eigen::Vector3d::Zero();
        local_n[axis] = ld[axis] > 0 ? 1.0 : -1.0;  // inward: along the ray
        return OracleContact{o + t_in * d, p.rotation * local_n};
    }
    return std::nullopt;
}

struct OracleVerdict {
    bool has_contacts = false;
    bool closure = false;
    double angle1 = 0, angle2 = 0;  // contact line vs each normal
};

/// Single-object, table-free force closure: both jaws reach the object and the
/// contact line lies in both sampled cones.
inline OracleVerdict oracle_force_closure(const GraspPose& g, const Primitive& prim, double mu)
{
    OracleVerdict v;
    const Eigen::Matrix3d R = oracle_rotation(g);
    const Eigen::Vector3d c = R.col(0), p = g.translation();
    const double half = g.width / 2.0 + 1e-4;
    const auto h1 = oracle_ray(prim, p - half * c, c, 2 * half);
    const auto h2 = oracle_ray(prim, p + half * c, -c, 2 * half);
    if (!h1 || !h2) return v;
    v.has_contacts = true;
    const Eigen::Vector3d l = (h2->point - h1->point).normalized();
    v.angle1 = std::acos(std::clamp(h1->inward.dot(l), -1.0, 1.0));
    v.angle2 = std::acos(std::clamp(h2->inward.dot(-l), -1.0, 1.0));
    v.closure = inside_sampled_cone(h1->inward, l, mu) && inside_sampled_cone(h2->inward, -l, mu);
    return v;
}

// ---------------------------------------------------------------------------
// Scene builders

inline Primitive make_sphere(const Eigen::Vector3d& center, double r)
{
    Primitive p;
    p.kind = PrimitiveKind::sphere;
    p.size = {r, 0, 0};
    p.translation = center;
    return p;
}

inline Primitive make_box(const Eigen::Vector3d& center, const Eigen::Vector3d& half,
                          const Eigen::Matrix3d& R = Eigen::Matrix3d::Identity())
{
    Primitive p;
    p.kind = PrimitiveKind::box;
    p.size = half;
    p.rotation = R;
    p.translation = center;
    return p;
}

inline SceneModel single_object_scene(const Primitive& p, double table_z = 0.6)
{
    SceneModel s;
    s.table_z = table_z;
    s.primitives = {p};
    s.requested_objects = 1;
    return s;
}

/// Pose with the given closing axis and an approach axis orthogonal to it.
inline GraspPose pose_from_axes(const Eigen::Vector3d& center, const Eigen::Vector3d& closing,
                                const Eigen::Vector3d& approach, double width)
{
    Eigen::Matrix3d R;
    R.col(0) = closing.normalized();
    R.col(2) = approach.normalized();
    R.col(1) = R.col(2).cross(R.col(0));
    GraspPose g;
    g.x = center.x();
    g.y = center.y();
    g.z = center.z();
    g.width = width;
    g.score = 1.0;
    set_grasp_rotation(g, R);
    return g;
}

}  // namespace e3g::test
