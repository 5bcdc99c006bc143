#include "e3g/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace e3g {

void CameraIntrinsics::validate() const
{
    if (!(fx > 0 && fy > 0)) throw std::invalid_argument("intrinsics: fx and fy must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: image extents must be positive");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
        throw std::invalid_argument("intrinsics: principal point outside image");
}

void ImageFrame::validate() const
{
    intrinsics.validate();
    const auto H = static_cast<std::size_t>(intrinsics.height), W = static_cast<std::size_t>(intrinsics.width);
    if (rgb.shape() != Shape{3, H, W}) throw std::invalid_argument("frame rgb shape " + rgb.shape().str() + " does not match intrinsics");
    if (depth.shape() != Shape{1, H, W}) throw std::invalid_argument("frame depth shape " + depth.shape().str() + " does not match intrinsics");
    for (float d : depth.data())
        if (!(d >= 0.0f)) throw std::invalid_argument("frame depth must be >= 0");
    for (float c : rgb.data())
        if (!(c >= 0.0f && c <= 1.0f)) throw std::invalid_argument("frame rgb must be in [0,1]");
}

Tensor positional_meshgrid(const CameraIntrinsics& intrinsics)
{
    intrinsics.validate();
    const auto H = static_cast<std::size_t>(intrinsics.height), W = static_cast<std::size_t>(intrinsics.width);
    Tensor grid(Shape{2, H, W});
    for (std::size_t v = 0; v < H; ++v)
        for (std::size_t u = 0; u < W; ++u) {
            grid[v * W + u] = static_cast<float>((static_cast<double>(u) - intrinsics.cx) / (1000.0 * intrinsics.fx));
            grid[H * W + v * W + u] = static_cast<float>((static_cast<double>(v) - intrinsics.cy) / (1000.0 * intrinsics.fy));
        }
    return grid;
}

Tensor make_network_input(const ImageFrame& frame)
{
    frame.validate();
    const auto H = static_cast<std::size_t>(frame.height()), W = static_cast<std::size_t>(frame.width());
    const std::size_t plane = H * W;
    Tensor input(Shape{6, H, W});
    const Tensor grid = positional_meshgrid(frame.intrinsics);
    std::copy(frame.rgb.data().begin(), frame.rgb.data().end(), input.data().begin());
    for (std::size_t i = 0; i < plane; ++i) input[3 * plane + i] = frame.depth[i] / 1000.0f;
    std::copy(grid.data().begin(), grid.data().end(), input.data().begin() + 4 * plane);
    return input;
}

Eigen::Vector3d pixel_to_point(double u, double v, double depth_mm, const CameraIntrinsics& intrinsics)
{
    if (!(depth_mm > 0)) throw InvalidDepthError("pixel_to_point: invalid depth " + std::to_string(depth_mm));
    const double z = depth_mm / 1000.0;
    return {(u - intrinsics.cx) * z / intrinsics.fx, (v - intrinsics.cy) * z / intrinsics.fy, z};
}

Eigen::Vector2d project_point(const Eigen::Vector3d& p, const CameraIntrinsics& intrinsics)
{
    return {intrinsics.fx * p.x() / p.z() + intrinsics.cx, intrinsics.fy * p.y() / p.z() + intrinsics.cy};
}

Eigen::Matrix3d euler_to_matrix(double theta, double gamma, double beta)
{
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cg = std::cos(gamma), sg = std::sin(gamma);
    const double cb = std::cos(beta), sb = std::sin(beta);
    Eigen::Matrix3d rz, ry, rx;
    rz << ct, -st, 0, st, ct, 0, 0, 0, 1;
    ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
    rx << 1, 0, 0, 0, cg, -sg, 0, sg, cg;
    return rz * ry * rx;
}

EulerAngles matrix_to_euler(const Eigen::Matrix3d& R)
{
    EulerAngles e;
    const double cb = std::hypot(R(0, 0), R(1, 0));
    e.beta = std::atan2(-R(2, 0), cb);
    if (std::abs(std::abs(e.beta) - kHalfPi) < 1e-6) {
        // Only theta - gamma (or theta + gamma) is observable; pin theta.
        e.gimbal_lock = true;
        e.theta = 0.0;
        e.gamma = std::atan2(-R(1, 2), R(1, 1));
        return e;
    }
    e.gamma = std::atan2(R(2, 1), R(2, 2));
    e.theta = std::atan2(R(1, 0), R(0, 0));
    return e;
}

double rotation_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b)
{
    const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

bool set_grasp_rotation(GraspPose& g, const Eigen::Matrix3d& R)
{
    auto in_range = [](double a) { return a >= -kHalfPi && a <= kHalfPi; };
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(0, 0) = -1;
    flip(1, 1) = -1;
    for (const Eigen::Matrix3d& cand : {R, Eigen::Matrix3d(R * flip)}) {
        const auto e = matrix_to_euler(cand);
        if (!e.gimbal_lock && in_range(e.theta) && in_range(e.gamma) && in_range(e.beta)) {
            g.theta = e.theta;
            g.gamma = e.gamma;
            g.beta = e.beta;
            return true;
        }
    }
    return false;
}

}  // namespace e3g
