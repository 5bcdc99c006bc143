#include "e3g/force_closure.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace e3g {

std::string to_string(ClosureOutcome outcome)
{
    switch (outcome) {
    case ClosureOutcome::success: return "success";
    case ClosureOutcome::miss: return "miss";
    case ClosureOutcome::embedded: return "embedded";
    case ClosureOutcome::different_objects: return "different_objects";
    case ClosureOutcome::outside_cone: return "outside_cone";
    case ClosureOutcome::collision: return "collision";
    }
    return "?";
}

std::array<OrientedBox, 3> gripper_boxes(const GraspPose& g, const GripperModel& m)
{
    const Eigen::Matrix3d R = grasp_rotation(g);
    const Eigen::Vector3d p = g.translation(), c = R.col(0), a = R.col(2);
    const double finger_mid = m.tip_extent - m.finger_depth / 2.0;
    const double lateral = g.width / 2.0 + m.finger_thickness / 2.0;
    const Eigen::Vector3d finger_half(m.finger_thickness / 2.0, m.finger_width / 2.0, m.finger_depth / 2.0);
    std::array<OrientedBox, 3> boxes;
    boxes[0] = {p - lateral * c + finger_mid * a, R, finger_half};
    boxes[1] = {p + lateral * c + finger_mid * a, R, finger_half};
    const double palm_mid = m.tip_extent - m.finger_depth - m.palm_thickness / 2.0;
    boxes[2] = {p + palm_mid * a, R,
                {g.width / 2.0 + m.finger_thickness, m.finger_width / 2.0, m.palm_thickness / 2.0}};
    return boxes;
}

namespace {

bool inside_box(const OrientedBox& b, const Eigen::Vector3d& p, double eps)
{
    const Eigen::Vector3d q = b.axes.transpose() * (p - b.center);
    return (q.cwiseAbs() - b.half).maxCoeff() < -eps;
}

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b, double eps)
{
    std::array<Eigen::Vector3d, 15> axes;
    int n = 0;
    for (int i = 0; i < 3; ++i) axes[static_cast<std::size_t>(n++)] = a.axes.col(i);
    for (int i = 0; i < 3; ++i) axes[static_cast<std::size_t>(n++)] = b.axes.col(i);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) axes[static_cast<std::size_t>(n++)] = a.axes.col(i).cross(b.axes.col(j));
    const Eigen::Vector3d d = b.center - a.center;
    for (const auto& raw : axes) {
        const double len = raw.norm();
        if (len < 1e-9) continue;
        const Eigen::Vector3d ax = raw / len;
        double ra = 0.0, rb = 0.0;
        for (int i = 0; i < 3; ++i) {
            ra += a.half[i] * std::abs(a.axes.col(i).dot(ax));
            rb += b.half[i] * std::abs(b.axes.col(i).dot(ax));
        }
        if (std::abs(d.dot(ax)) >= ra + rb - eps) return false;
    }
    return true;
}

bool box_cylinder_overlap(const OrientedBox& b, const Primitive& cyl, double eps)
{
    const double r = cyl.size[0], h = cyl.size[1];
    if ((b.center - cyl.translation).norm() > b.half.norm() + std::hypot(r, h) + eps) return false;
    constexpr int kBoxSteps = 6;
    for (int i = 0; i < kBoxSteps; ++i)
        for (int j = 0; j < kBoxSteps; ++j)
            for (int k = 0; k < kBoxSteps; ++k) {
                const Eigen::Vector3d f(2.0 * i / (kBoxSteps - 1) - 1.0, 2.0 * j / (kBoxSteps - 1) - 1.0,
                                        2.0 * k / (kBoxSteps - 1) - 1.0);
                if (cyl.sdf(b.center + b.axes * f.cwiseProduct(b.half)) < -eps) return true;
            }
    constexpr int kAround = 32, kAlong = 9;
    const Eigen::Matrix3d& R = cyl.rotation;
    for (int i = 0; i < kAround; ++i) {
        const double ang = 2.0 * 3.14159265358979323846 * i / kAround;
        const Eigen::Vector3d radial = std::cos(ang) * R.col(0) + std::sin(ang) * R.col(1);
        for (int j = 0; j < kAlong; ++j) {
            const double z = h * (2.0 * j / (kAlong - 1) - 1.0);
            if (inside_box(b, cyl.translation + r * radial + z * R.col(2), eps)) return true;
        }
        for (double frac : {0.0, 0.5})
            for (double side : {-1.0, 1.0})
                if (inside_box(b, cyl.translation + frac * r * radial + side * h * R.col(2), eps)) return true;
    }
    return false;
}

}  // namespace

bool box_intersects_primitive(const OrientedBox& box, const Primitive& prim, double eps)
{
    switch (prim.kind) {
    case PrimitiveKind::sphere: {
        const Eigen::Vector3d q = box.axes.transpose() * (prim.translation - box.center);
        const Eigen::Vector3d closest = q.cwiseMax(-box.half).cwiseMin(box.half);
        return (q - closest).norm() < prim.size[0] - eps;
    }
    case PrimitiveKind::box: return boxes_overlap(box, {prim.translation, prim.rotation, prim.size}, eps);
    case PrimitiveKind::cylinder: return box_cylinder_overlap(box, prim, eps);
    }
    return false;
}

bool box_below_table(const OrientedBox& box, double table_z, double eps)
{
    double ext = 0.0;
    for (int i = 0; i < 3; ++i) ext += box.half[i] * std::abs(box.axes(2, i));
    return box.center.z() + ext > table_z + eps;
}

bool within_friction_cones(const ContactPair& c, double mu)
{
    if (!(mu > 0.0)) throw std::invalid_argument("friction coefficient must be > 0");
    const Eigen::Vector3d line = c.p2 - c.p1;
    const double len = line.norm();
    if (len < 1e-9) return false;
    const Eigen::Vector3d l = line / len;
    const double half_angle = std::atan(mu);
    const double a1 = std::acos(std::clamp(c.n1.dot(l), -1.0, 1.0));
    const double a2 = std::acos(std::clamp(c.n2.dot(-l), -1.0, 1.0));
    return a1 <= half_angle && a2 <= half_angle;
}

GraspContacts analyze_grasp(const GraspPose& g, const SceneModel& scene, const GripperModel& model)
{
    GraspContacts out;
    const Eigen::Matrix3d R = grasp_rotation(g);
    const Eigen::Vector3d p = g.translation(), c = R.col(0);
    const double half = g.width / 2.0 + model.jaw_clearance;
    const double travel = 2.0 * half;
    const Eigen::Vector3d o1 = p - half * c, o2 = p + half * c;

    for (const auto& prim : scene.primitives)
        if (prim.contains(o1) || prim.contains(o2)) {
            out.status = ClosureOutcome::embedded;
            return out;
        }

    auto cast = [&](const Eigen::Vector3d& o, const Eigen::Vector3d& dir, RayHit& best) {
        int hit = -1;
        best.t = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
            const auto h = scene.primitives[i].intersect(o, dir, travel);
            if (h && h->t < best.t) {
                best = *h;
                hit = static_cast<int>(i);
            }
        }
        return hit;
    };
    RayHit h1, h2;
    const int obj1 = cast(o1, c, h1), obj2 = cast(o2, -c, h2);
    if (obj1 < 0 || obj2 < 0) {
        out.status = ClosureOutcome::miss;
        return out;
    }
    if (obj1 != obj2) {
        out.status = ClosureOutcome::different_objects;
        return out;
    }
    ContactPair cp{o1 + h1.t * c, o2 - h2.t * c, -h1.normal, -h2.normal};
    out.contacts = cp;
    out.object = obj1;
    const Eigen::Vector3d line = cp.p2 - cp.p1;
    if (line.norm() < 1e-9) {
        out.cone_angle = 3.14159265358979323846 / 2.0;
    } else {
        const Eigen::Vector3d l = line.normalized();
        out.cone_angle = std::max(std::acos(std::clamp(cp.n1.dot(l), -1.0, 1.0)),
                                  std::acos(std::clamp(cp.n2.dot(-l), -1.0, 1.0)));
    }

    for (const auto& box : gripper_boxes(g, model)) {
        if (box_below_table(box, scene.table_z)) {
            out.status = ClosureOutcome::collision;
            return out;
        }
        for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
            if (static_cast<int>(i) == obj1) continue;
            if (box_intersects_primitive(box, scene.primitives[i])) {
                out.status = ClosureOutcome::collision;
                return out;
            }
        }
    }
    out.status = ClosureOutcome::success;
    return out;
}

namespace {

ClosureOutcome outcome_at(const GraspContacts& gc, double mu)
{
    if (gc.status != ClosureOutcome::success) return gc.status;
    return within_friction_cones(*gc.contacts, mu) ? ClosureOutcome::success : ClosureOutcome::outside_cone;
}

}  // namespace

ClosureOutcome evaluate_grasp(const GraspPose& g, const SceneModel& scene, double mu, const GripperModel& model)
{
    if (!(mu > 0.0)) throw std::invalid_argument("force_closure: mu must be > 0");
    return outcome_at(analyze_grasp(g, scene, model), mu);
}

bool force_closure(const GraspPose& g, const SceneModel& scene, double mu, const GripperModel& model)
{
    return evaluate_grasp(g, scene, mu, model) == ClosureOutcome::success;
}

double ap_mu(const std::vector<GraspPose>& grasps, const SceneModel& scene, double mu)
{
    if (!(mu > 0.0)) throw std::invalid_argument("ap_mu: mu must be > 0");
    const std::size_t n = std::min(grasps.size(), kApTopK);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) ok += force_closure(grasps[i], scene, mu) ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(kApTopK);
}

double ap(const std::vector<GraspPose>& grasps, const SceneModel& scene)
{
    return evaluate_scene(grasps, scene).ap;
}

SceneAp evaluate_scene(const std::vector<GraspPose>& grasps, const SceneModel& scene)
{
    SceneAp out;
    const std::size_t n = std::min(grasps.size(), kApTopK);
    std::array<std::size_t, kFrictionLevels.size()> ok{};
    for (std::size_t i = 0; i < n; ++i) {
        const GraspContacts gc = analyze_grasp(grasps[i], scene);
        for (std::size_t m = 0; m < kFrictionLevels.size(); ++m)
            if (outcome_at(gc, kFrictionLevels[m]) == ClosureOutcome::success) ++ok[m];
        ++out.outcomes[to_string(outcome_at(gc, kFrictionLevels.back()))];
    }
    double sum = 0.0;
    for (std::size_t m = 0; m < kFrictionLevels.size(); ++m) {
        out.ap_mu[m] = static_cast<double>(ok[m]) / static_cast<double>(kApTopK);
        sum += out.ap_mu[m];
    }
    out.ap = sum / static_cast<double>(kFrictionLevels.size());
    return out;
}

double map_over_scenes(const std::vector<SceneAp>& results)
{
    if (results.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : results) sum += r.ap;
    return sum / static_cast<double>(results.size());
}

}  // namespace e3g
