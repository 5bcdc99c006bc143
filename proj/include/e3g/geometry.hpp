#pragma once

#include "e3g/tensor.hpp"

#include <Eigen/Core>

#include <stdexcept>

namespace e3g {

/// Parallel-jaw opening limit (Robotiq 2F-85).
inline constexpr double kGripperMaxWidth = 0.085;
inline constexpr double kHalfPi = 1.57079632679489661923;

struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    /// Throws std::invalid_argument when the invariants do not hold.
    void validate() const;
};

/// 6-DoF parallel-jaw grasp in the camera frame. Angles are Euler angles of
/// R = Rz(theta) * Ry(beta) * Rx(gamma); the grasp frame's x axis is the
/// closing direction and its z axis the approach direction.
struct GraspPose {
    double x = 0, y = 0, z = 0;
    double theta = 0, gamma = 0, beta = 0;
    double width = 0;
    double score = 0;

    Eigen::Vector3d translation() const { return {x, y, z}; }
};

struct ImageFrame {
    Tensor rgb;    // [3,H,W] in [0,1]
    Tensor depth;  // [1,H,W] millimeters, 0 = invalid
    CameraIntrinsics intrinsics;

    int height() const { return intrinsics.height; }
    int width() const { return intrinsics.width; }
    void validate() const;
};

class InvalidDepthError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Channel 0: (u - cx) / (1000 fx), channel 1: (v - cy) / (1000 fy).
Tensor positional_meshgrid(const CameraIntrinsics& intrinsics);

/// [R, G, B, depth in meters, mesh x, mesh y] as a [6,H,W] tensor.
Tensor make_network_input(const ImageFrame& frame);

Eigen::Vector3d pixel_to_point(double u, double v, double depth_mm, const CameraIntrinsics& intrinsics);
Eigen::Vector2d project_point(const Eigen::Vector3d& p, const CameraIntrinsics& intrinsics);

struct EulerAngles {
    double theta = 0, gamma = 0, beta = 0;
    bool gimbal_lock = false;
};

Eigen::Matrix3d euler_to_matrix(double theta, double gamma, double beta);
EulerAngles matrix_to_euler(const Eigen::Matrix3d& R);

inline Eigen::Matrix3d grasp_rotation(const GraspPose& g) { return euler_to_matrix(g.theta, g.gamma, g.beta); }

/// Geodesic angle between two rotations, in radians.
double rotation_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

/// Sets g's angles from R if its representation falls in [-pi/2, pi/2]^3,
/// trying R and R rotated by pi about the approach axis (the same physical
/// grasp with swapped jaws). Returns false if neither fits.
bool set_grasp_rotation(GraspPose& g, const Eigen::Matrix3d& R);

}  // namespace e3g
