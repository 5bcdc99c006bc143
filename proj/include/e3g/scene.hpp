#pragma once

// Synthetic tabletop scenes built from posed primitives, a ray-cast depth
// renderer and analytic antipodal ground-truth grasps.

#include "e3g/geometry.hpp"

#include "json.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace e3g {

enum class PrimitiveKind { sphere, box, cylinder };

std::string to_string(PrimitiveKind kind);
PrimitiveKind primitive_kind_from_string(const std::string& s);

struct RayHit {
    double t = 0;             // ray parameter of the entry point
    Eigen::Vector3d normal;   // outward unit normal at the entry point
};

/// A solid in the camera frame. size: sphere (r), box (half extents),
/// cylinder (r, half height) with the axis along the local z.
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::sphere;
    Eigen::Vector3d size = Eigen::Vector3d::Zero();
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // local -> camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Eigen::Vector3d color{0.8, 0.2, 0.2};

    /// Signed distance; negative inside.
    double sdf(const Eigen::Vector3d& p) const;
    bool contains(const Eigen::Vector3d& p) const { return sdf(p) < 0.0; }

    /// First entry into the solid along origin + t * dir with t in [0, t_max].
    /// Origins inside the solid report no entry.
    std::optional<RayHit> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                    double t_max = 1e9) const;

    /// Radius of the circle that bounds the footprint in the table plane.
    double footprint_radius() const;
    /// Smallest extent across any pair of opposite faces / diameters.
    double min_opposing_extent() const;

    void validate() const;
};

struct SceneModel {
    std::uint64_t seed = 0;
    double table_z = 0.6;  // camera-frame depth of the table plane
    std::vector<Primitive> primitives;
    int requested_objects = 0;

    void validate() const;
};

/// Default camera for generated frames: 96x96, f = 160 px, centered.
CameraIntrinsics default_intrinsics(int width = 96, int height = 96);

struct SceneGenStats {
    int placement_failures = 0;  // objects dropped after exhausting rejections
};

SceneModel gen_scene(std::uint64_t seed, int n_objects, SceneGenStats* stats = nullptr);

/// Footprint-circle test for every primitive pair (x/y distance of centers
/// at least the sum of footprint radii). Also checks table support.
bool scene_is_valid(const SceneModel& scene);

/// Depth in millimeters along the optical axis of the nearest hit (0 = none).
Tensor render_depth(const SceneModel& scene, const CameraIntrinsics& intrinsics);
Tensor render_rgb(const SceneModel& scene, const CameraIntrinsics& intrinsics);

/// RGB-D frame as a sensor would deliver it: depth rounded to whole millimeters.
ImageFrame make_frame(const SceneModel& scene, const CameraIntrinsics& intrinsics);

/// Antipodal grasps per primitive that clear the table and the other
/// objects and pass force closure at the lowest benchmark friction.
std::vector<GraspPose> label_grasps(const SceneModel& scene);

nlohmann::json scene_to_json(const SceneModel& scene);
SceneModel scene_from_json(const nlohmann::json& j);

nlohmann::json grasp_to_json(const GraspPose& g);
GraspPose grasp_from_json(const nlohmann::json& j);
nlohmann::json grasps_to_json(const std::vector<GraspPose>& grasps);
std::vector<GraspPose> grasps_from_json(const nlohmann::json& j);

}  // namespace e3g
