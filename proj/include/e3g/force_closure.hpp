#pragma once

// Two-contact Coulomb force closure for parallel-jaw grasps and the
// top-50 average precision protocol built on it.

#include "e3g/scene.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace e3g {

inline constexpr std::array<double, 5> kFrictionLevels{0.2, 0.4, 0.6, 0.8, 1.0};
inline constexpr std::size_t kApTopK = 50;

/// Three boxes in the grasp frame (x closing, y binormal, z approach).
struct GripperModel {
    double finger_thickness = 0.010;  // along closing
    double finger_width = 0.010;      // along binormal
    double finger_depth = 0.020;      // along approach
    double tip_extent = 0.005;        // finger tip beyond the grasp center
    double palm_thickness = 0.010;    // along approach, behind the fingers
    double jaw_clearance = 1e-4;      // jaws start this far outside w / 2
};

struct OrientedBox {
    Eigen::Vector3d center;
    Eigen::Matrix3d axes;  // columns
    Eigen::Vector3d half;
};

/// Finger 1, finger 2, palm.
std::array<OrientedBox, 3> gripper_boxes(const GraspPose& g, const GripperModel& model = {});

bool box_intersects_primitive(const OrientedBox& box, const Primitive& prim, double eps = 1e-6);
bool box_below_table(const OrientedBox& box, double table_z, double eps = 1e-6);

struct ContactPair {
    Eigen::Vector3d p1, p2;
    Eigen::Vector3d n1, n2;  // inward unit normals
};

enum class ClosureOutcome { success, miss, embedded, different_objects, outside_cone, collision };

std::string to_string(ClosureOutcome outcome);

/// Geometry of a grasp independent of friction.
struct GraspContacts {
    ClosureOutcome status = ClosureOutcome::miss;  // success when contacts are valid and collision free
    std::optional<ContactPair> contacts;
    int object = -1;
    double cone_angle = 0;  // max over both contacts of angle(n_i, +-(p2 - p1))
};

GraspContacts analyze_grasp(const GraspPose& g, const SceneModel& scene, const GripperModel& model = {});

/// Both contact normals within arctan(mu) of the contact line.
bool within_friction_cones(const ContactPair& c, double mu);

ClosureOutcome evaluate_grasp(const GraspPose& g, const SceneModel& scene, double mu, const GripperModel& model = {});
bool force_closure(const GraspPose& g, const SceneModel& scene, double mu, const GripperModel& model = {});

/// Successes at mu over the top 50 grasps, denominator padded to 50.
/// Grasps past the 50th are ignored.
double ap_mu(const std::vector<GraspPose>& grasps, const SceneModel& scene, double mu);
double ap(const std::vector<GraspPose>& grasps, const SceneModel& scene);

struct SceneAp {
    double ap = 0;
    std::array<double, kFrictionLevels.size()> ap_mu{};
    std::map<std::string, int> outcomes;
};

/// One contact analysis per grasp shared across all friction levels.
SceneAp evaluate_scene(const std::vector<GraspPose>& grasps, const SceneModel& scene);

double map_over_scenes(const std::vector<SceneAp>& results);

}  // namespace e3g
