#include "e3g/scene.hpp"

#include "e3g/force_closure.hpp"
#include "e3g/rotation.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace e3g {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPlacementHalfExtent = 0.11;
constexpr double kPlacementGap = 0.012;
constexpr int kMaxRejections = 1000;

double deg(double d) { return d * kPi / 180.0; }

const std::array<Eigen::Vector3d, 8> kPalette{{
    {0.85, 0.25, 0.2}, {0.2, 0.6, 0.85}, {0.3, 0.75, 0.3}, {0.9, 0.75, 0.2},
    {0.6, 0.35, 0.8},  {0.95, 0.5, 0.15}, {0.2, 0.8, 0.75}, {0.8, 0.4, 0.6},
}};

Eigen::Matrix3d rot_z(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

}  // namespace

std::string to_string(PrimitiveKind kind)
{
    switch (kind) {
    case PrimitiveKind::sphere: return "sphere";
    case PrimitiveKind::box: return "box";
    case PrimitiveKind::cylinder: return "cylinder";
    }
    return "?";
}

PrimitiveKind primitive_kind_from_string(const std::string& s)
{
    if (s == "sphere") return PrimitiveKind::sphere;
    if (s == "box") return PrimitiveKind::box;
    if (s == "cylinder") return PrimitiveKind::cylinder;
    throw std::invalid_argument("unknown primitive kind '" + s + "'");
}

double Primitive::sdf(const Eigen::Vector3d& p) const
{
    const Eigen::Vector3d q = rotation.transpose() * (p - translation);
    switch (kind) {
    case PrimitiveKind::sphere: return q.norm() - size[0];
    case PrimitiveKind::box: {
        const Eigen::Vector3d d = q.cwiseAbs() - size;
        return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
    }
    case PrimitiveKind::cylinder: {
        const double dr = std::hypot(q.x(), q.y()) - size[0];
        const double dz = std::abs(q.z()) - size[1];
        return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0)) + std::min(std::max(dr, dz), 0.0);
    }
    }
    return 0.0;
}

std::optional<RayHit> Primitive::intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                           double t_max) const
{
    if (contains(origin)) return std::nullopt;
    const Eigen::Vector3d o = rotation.transpose() * (origin - translation);
    const Eigen::Vector3d d = rotation.transpose() * dir;
    double best_t = std::numeric_limits<double>::infinity();
    Eigen::Vector3d best_n = Eigen::Vector3d::Zero();

    switch (kind) {
    case PrimitiveKind::sphere: {
        const double r = size[0];
        const double a = d.squaredNorm(), b = 2.0 * o.dot(d), c = o.squaredNorm() - r * r;
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) return std::nullopt;
        const double t = (-b - std::sqrt(disc)) / (2.0 * a);
        if (t < 0.0) return std::nullopt;
        best_t = t;
        best_n = (o + t * d) / r;
        break;
    }
    case PrimitiveKind::box: {
        double t_near = -std::numeric_limits<double>::infinity();
        double t_far = std::numeric_limits<double>::infinity();
        int axis = -1;
        double sign = 0.0;
        for (int i = 0; i < 3; ++i) {
            if (std::abs(d[i]) < 1e-15) {
                if (std::abs(o[i]) > size[i]) return std::nullopt;
                continue;
            }
            double t1 = (-size[i] - o[i]) / d[i], t2 = (size[i] - o[i]) / d[i];
            if (t1 > t2) std::swap(t1, t2);
            if (t1 > t_near) {
                t_near = t1;
                axis = i;
                sign = d[i] > 0.0 ? -1.0 : 1.0;
            }
            t_far = std::min(t_far, t2);
        }
        if (axis < 0 || t_near > t_far || t_near < 0.0) return std::nullopt;
        best_t = t_near;
        best_n[axis] = sign;
        break;
    }
    case PrimitiveKind::cylinder: {
        const double r = size[0], h = size[1];
        const double a = d.x() * d.x() + d.y() * d.y();
        if (a > 1e-30) {
            const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
            const double c = o.x() * o.x() + o.y() * o.y() - r * r;
            const double disc = b * b - 4.0 * a * c;
            if (disc >= 0.0) {
                const double t = (-b - std::sqrt(disc)) / (2.0 * a);
                const Eigen::Vector3d p = o + t * d;
                if (t >= 0.0 && std::abs(p.z()) <= h) {
                    best_t = t;
                    best_n = Eigen::Vector3d(p.x() / r, p.y() / r, 0.0);
                }
            }
        }
        if (std::abs(d.z()) > 1e-15) {
            for (double side : {-1.0, 1.0}) {
                if (d.z() * side >= 0.0) continue;  // the cap faces away from the ray
                const double t = (side * h - o.z()) / d.z();
                const Eigen::Vector3d p = o + t * d;
                if (t >= 0.0 && t < best_t && p.x() * p.x() + p.y() * p.y() <= r * r) {
                    best_t = t;
                    best_n = Eigen::Vector3d(0.0, 0.0, side);
                }
            }
        }
        if (!std::isfinite(best_t)) return std::nullopt;
        break;
    }
    }
    if (best_t > t_max) return std::nullopt;
    return RayHit{best_t, (rotation * best_n).normalized()};
}

double Primitive::footprint_radius() const
{
    switch (kind) {
    case PrimitiveKind::sphere: return size[0];
    case PrimitiveKind::box: {
        // Horizontal extent of the rotated box.
        Eigen::Vector3d ext = Eigen::Vector3d::Zero();
        for (int i = 0; i < 3; ++i) ext += (rotation.col(i) * size[i]).cwiseAbs();
        return std::hypot(ext.x(), ext.y());
    }
    case PrimitiveKind::cylinder: {
        const Eigen::Vector3d u = rotation.col(2);
        const double horiz = std::hypot(u.x(), u.y());
        return horiz * size[1] + size[0];
    }
    }
    return 0.0;
}

double Primitive::min_opposing_extent() const
{
    switch (kind) {
    case PrimitiveKind::sphere: return 2.0 * size[0];
    case PrimitiveKind::box: return 2.0 * size.minCoeff();
    case PrimitiveKind::cylinder: return 2.0 * std::min(size[0], size[1]);
    }
    return 0.0;
}

void Primitive::validate() const
{
    const int used = kind == PrimitiveKind::sphere ? 1 : kind == PrimitiveKind::cylinder ? 2 : 3;
    for (int i = 0; i < used; ++i)
        if (!(size[i] > 0.0) || !std::isfinite(size[i])) throw std::invalid_argument("primitive: sizes must be > 0");
    if (!((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6))
        throw std::invalid_argument("primitive: rotation is not orthonormal");
}

namespace {

// Largest camera-frame z over the solid.
double lowest_point_z(const Primitive& p)
{
    const Eigen::Vector3d t = p.translation;
    switch (p.kind) {
    case PrimitiveKind::sphere: return t.z() + p.size[0];
    case PrimitiveKind::box: {
        double ext = 0.0;
        for (int i = 0; i < 3; ++i) ext += std::abs(p.rotation(2, i)) * p.size[i];
        return t.z() + ext;
    }
    case PrimitiveKind::cylinder: {
        const double uz = std::abs(p.rotation(2, 2));
        return t.z() + uz * p.size[1] + std::sqrt(std::max(0.0, 1.0 - uz * uz)) * p.size[0];
    }
    }
    return t.z();
}

bool footprints_overlap(const Primitive& a, const Primitive& b, double gap)
{
    const double dx = a.translation.x() - b.translation.x(), dy = a.translation.y() - b.translation.y();
    return std::hypot(dx, dy) < a.footprint_radius() + b.footprint_radius() + gap;
}

}  // namespace

void SceneModel::validate() const
{
    if (!(table_z > 0.0)) throw std::invalid_argument("scene: table must lie in front of the camera");
    for (const auto& p : primitives) p.validate();
}

bool scene_is_valid(const SceneModel& scene)
{
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        if (lowest_point_z(scene.primitives[i]) > scene.table_z + 1e-9) return false;
        for (std::size_t j = i + 1; j < scene.primitives.size(); ++j)
            if (footprints_overlap(scene.primitives[i], scene.primitives[j], 0.0)) return false;
    }
    return true;
}

CameraIntrinsics default_intrinsics(int width, int height)
{
    CameraIntrinsics k;
    k.fx = k.fy = 160.0 * width / 96.0;
    k.cx = (width - 1) / 2.0;
    k.cy = (height - 1) / 2.0;
    k.width = width;
    k.height = height;
    return k;
}

SceneModel gen_scene(std::uint64_t seed, int n_objects, SceneGenStats* stats)
{
    if (n_objects < 1 || n_objects > 10) throw std::invalid_argument("gen_scene: n_objects must be in [1,10]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    SceneModel scene;
    scene.seed = seed;
    scene.requested_objects = n_objects;
    const double table = scene.table_z;
    int failures = 0;

    for (int obj = 0; obj < n_objects; ++obj) {
        Primitive p;
        const int kind = static_cast<int>(unit(rng) * 3.0);
        const double yaw = uni(0.0, kPi);
        if (kind == 0) {
            p.kind = PrimitiveKind::sphere;
            p.size = {uni(0.02, 0.03), 0.0, 0.0};
            p.translation.z() = table - p.size[0];
        } else if (kind == 1) {
            p.kind = PrimitiveKind::box;
            p.size = {uni(0.02, 0.04), uni(0.02, 0.04), uni(0.04, 0.06)};
            p.rotation = rot_z(yaw);
            p.translation.z() = table - p.size[2];
        } else {
            p.kind = PrimitiveKind::cylinder;
            if (unit(rng) < 0.5) {
                p.size = {uni(0.02, 0.035), uni(0.03, 0.06), 0.0};
                p.rotation = rot_z(yaw);
                p.translation.z() = table - p.size[1];
            } else {
                p.size = {uni(0.028, 0.035), uni(0.03, 0.04), 0.0};
                p.rotation = rot_z(yaw) * Eigen::AngleAxisd(kPi / 2.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
                p.translation.z() = table - p.size[0];
            }
        }
        p.color = kPalette[static_cast<std::size_t>(obj) % kPalette.size()];

        bool placed = false;
        for (int attempt = 0; attempt < kMaxRejections && !placed; ++attempt) {
            p.translation.x() = uni(-kPlacementHalfExtent, kPlacementHalfExtent);
            p.translation.y() = uni(-kPlacementHalfExtent, kPlacementHalfExtent);
            placed = std::none_of(scene.primitives.begin(), scene.primitives.end(),
                                  [&](const Primitive& q) { return footprints_overlap(p, q, kPlacementGap); });
        }
        if (placed)
            scene.primitives.push_back(p);
        else
            ++failures;
    }
    if (stats) stats->placement_failures = failures;
    return scene;
}

namespace {

struct PixelHit {
    double depth = 0.0;  // meters along z, 0 = none
    int object = -2;     // -1 table
};

PixelHit cast_pixel(const SceneModel& scene, const CameraIntrinsics& k, int u, int v)
{
    const Eigen::Vector3d dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    PixelHit hit;
    if (scene.table_z > 0.0) hit = {scene.table_z, -1};
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        const auto h = scene.primitives[i].intersect(Eigen::Vector3d::Zero(), dir);
        if (h && (hit.object == -2 || h->t < hit.depth)) hit = {h->t, static_cast<int>(i)};
    }
    return hit;
}

}  // namespace

Tensor render_depth(const SceneModel& scene, const CameraIntrinsics& intrinsics)
{
    intrinsics.validate();
    const auto H = static_cast<std::size_t>(intrinsics.height), W = static_cast<std::size_t>(intrinsics.width);
    Tensor depth(Shape{1, H, W});
    for (std::size_t v = 0; v < H; ++v)
        for (std::size_t u = 0; u < W; ++u) {
            const PixelHit h = cast_pixel(scene, intrinsics, static_cast<int>(u), static_cast<int>(v));
            depth[v * W + u] = h.object == -2 ? 0.0f : static_cast<float>(h.depth * 1000.0);
        }
    return depth;
}

Tensor render_rgb(const SceneModel& scene, const CameraIntrinsics& intrinsics)
{
    intrinsics.validate();
    const auto H = static_cast<std::size_t>(intrinsics.height), W = static_cast<std::size_t>(intrinsics.width);
    const Eigen::Vector3d table_color(0.45, 0.42, 0.38);
    Tensor rgb(Shape{3, H, W});
    for (std::size_t v = 0; v < H; ++v)
        for (std::size_t u = 0; u < W; ++u) {
            const PixelHit h = cast_pixel(scene, intrinsics, static_cast<int>(u), static_cast<int>(v));
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            if (h.object == -1) c = table_color;
            if (h.object >= 0) c = scene.primitives[static_cast<std::size_t>(h.object)].color;
            for (std::size_t ch = 0; ch < 3; ++ch) rgb[(ch * H + v) * W + u] = static_cast<float>(c[static_cast<Eigen::Index>(ch)]);
        }
    return rgb;
}

ImageFrame make_frame(const SceneModel& scene, const CameraIntrinsics& intrinsics)
{
    ImageFrame frame;
    frame.intrinsics = intrinsics;
    frame.depth = render_depth(scene, intrinsics);
    for (auto& d : frame.depth.data()) d = std::round(d);
    frame.rgb = render_rgb(scene, intrinsics);
    // Match the 8-bit quantization the PPM round trip applies.
    for (auto& c : frame.rgb.data()) c = std::round(c * 255.0f) / 255.0f;
    return frame;
}

namespace {

// Candidate families are sampled densely, then thinned to a set that grasp
// NMS leaves untouched.
constexpr double kTiltLimit = 80.0;
constexpr double kTiltStep = 16.0;
constexpr double kAngleStep = 10.0;
constexpr double kLatticeSpacing = 0.031;
constexpr double kFaceMargin = 0.006;

// Symmetric offsets spaced by the lattice step that keep a finger on the face.
std::vector<double> face_offsets(double half_extent)
{
    const double usable = half_extent - kFaceMargin;
    if (usable <= 0.0) return {0.0};
    const int n = static_cast<int>(std::floor(2.0 * usable / kLatticeSpacing)) + 1;
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back((i - (n - 1) / 2.0) * kLatticeSpacing);
    return out;
}

void emit_family(const SceneModel& scene, const Eigen::Vector3d& center, const Eigen::Vector3d& closing, double width,
                 std::vector<GraspPose>& out)
{
    if (!(width < kGripperMaxWidth)) return;
    const Eigen::Vector3d c = closing.normalized();
    const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d a_proj = z - z.dot(c) * c;
    if (a_proj.norm() < 0.05) return;  // closing along the view ray
    const Eigen::Vector3d a0 = a_proj.normalized();
    const Eigen::Vector3d side = c.cross(a0);
    for (double tilt = -kTiltLimit; tilt <= kTiltLimit + 1e-9; tilt += kTiltStep) {
        const Eigen::Vector3d a = std::cos(deg(tilt)) * a0 + std::sin(deg(tilt)) * side;
        Eigen::Matrix3d R;
        R.col(0) = c;
        R.col(1) = a.cross(c);
        R.col(2) = a;
        GraspPose g;
        g.x = center.x();
        g.y = center.y();
        g.z = center.z();
        g.width = width;
        g.score = 1.0;
        if (!set_grasp_rotation(g, R)) continue;
        if (!force_closure(g, scene, kFrictionLevels.front())) continue;
        out.push_back(g);
    }
}

}  // namespace

std::vector<GraspPose> label_grasps(const SceneModel& scene)
{
    std::vector<GraspPose> out;
    for (const auto& p : scene.primitives) {
        const Eigen::Matrix3d& R = p.rotation;
        const Eigen::Vector3d& t = p.translation;
        switch (p.kind) {
        case PrimitiveKind::sphere:
            for (double el = -40.0; el <= 40.0 + 1e-9; el += kAngleStep)
                for (double az = 0.0; az < 180.0; az += kAngleStep) {
                    const Eigen::Vector3d c(std::cos(deg(el)) * std::cos(deg(az)),
                                            std::cos(deg(el)) * std::sin(deg(az)), std::sin(deg(el)));
                    emit_family(scene, t, c, 2.0 * p.size[0], out);
                }
            break;
        case PrimitiveKind::box:
            for (int ax = 0; ax < 3; ++ax) {
                const int j = (ax + 1) % 3, k = (ax + 2) % 3;
                for (double oj : face_offsets(p.size[j]))
                    for (double ok : face_offsets(p.size[k]))
                        emit_family(scene, t + R.col(j) * oj + R.col(k) * ok, R.col(ax), 2.0 * p.size[ax], out);
            }
            break;
        case PrimitiveKind::cylinder: {
            const Eigen::Vector3d u = R.col(2);
            for (double along : face_offsets(p.size[1]))
                for (double psi = 0.0; psi < 180.0; psi += kAngleStep) {
                    const Eigen::Vector3d c = std::cos(deg(psi)) * R.col(0) + std::sin(deg(psi)) * R.col(1);
                    emit_family(scene, t + u * along, c, 2.0 * p.size[0], out);
                }
            for (double o1 : face_offsets(p.size[0]))
                for (double o2 : face_offsets(p.size[0])) {
                    if (std::hypot(o1, o2) > p.size[0] - kFaceMargin && (o1 != 0.0 || o2 != 0.0)) continue;
                    emit_family(scene, t + R.col(0) * o1 + R.col(1) * o2, u, 2.0 * p.size[1], out);
                }
            break;
        }
        }
    }
    return grasp_nms(out);
}

namespace {

nlohmann::json vec_json(const Eigen::Vector3d& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec_from(const nlohmann::json& j)
{
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

nlohmann::json scene_to_json(const SceneModel& scene)
{
    nlohmann::json prims = nlohmann::json::array();
    for (const auto& p : scene.primitives) {
        nlohmann::json rot = nlohmann::json::array();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
        prims.push_back({{"kind", to_string(p.kind)},
                         {"size", vec_json(p.size)},
                         {"pose", {{"rotation", rot}, {"translation", vec_json(p.translation)}}},
                         {"color", vec_json(p.color)}});
    }
    return {{"seed", scene.seed},
            {"table_z", scene.table_z},
            {"requested_objects", scene.requested_objects},
            {"primitives", prims}};
}

SceneModel scene_from_json(const nlohmann::json& j)
{
    SceneModel scene;
    scene.seed = j.at("seed").get<std::uint64_t>();
    scene.table_z = j.at("table_z").get<double>();
    scene.requested_objects = j.value("requested_objects", 0);
    for (const auto& pj : j.at("primitives")) {
        Primitive p;
        p.kind = primitive_kind_from_string(pj.at("kind").get<std::string>());
        p.size = vec_from(pj.at("size"));
        const auto& rot = pj.at("pose").at("rotation");
        if (!rot.is_array() || rot.size() != 9) throw std::invalid_argument("scene: rotation needs 9 entries");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) p.rotation(r, c) = rot[static_cast<std::size_t>(r * 3 + c)].get<double>();
        p.translation = vec_from(pj.at("pose").at("translation"));
        if (pj.contains("color")) p.color = vec_from(pj.at("color"));
        scene.primitives.push_back(p);
    }
    scene.validate();
    return scene;
}

nlohmann::json grasp_to_json(const GraspPose& g)
{
    return {{"x", g.x},         {"y", g.y},         {"z", g.z},         {"theta", g.theta},
            {"gamma", g.gamma}, {"beta", g.beta},   {"width", g.width}, {"score", g.score}};
}

GraspPose grasp_from_json(const nlohmann::json& j)
{
    GraspPose g;
    g.x = j.at("x").get<double>();
    g.y = j.at("y").get<double>();
    g.z = j.at("z").get<double>();
    g.theta = j.at("theta").get<double>();
    g.gamma = j.at("gamma").get<double>();
    g.beta = j.at("beta").get<double>();
    g.width = j.at("width").get<double>();
    g.score = j.value("score", 1.0);
    return g;
}

nlohmann::json grasps_to_json(const std::vector<GraspPose>& grasps)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& g : grasps) arr.push_back(grasp_to_json(g));
    return arr;
}

std::vector<GraspPose> grasps_from_json(const nlohmann::json& j)
{
    const nlohmann::json& arr = j.is_object() ? j.at("grasps") : j;
    std::vector<GraspPose> out;
    for (const auto& g : arr) out.push_back(grasp_from_json(g));
    return out;
}

}  // namespace e3g
