#pragma once

// Netpbm and JSON helpers for frames: 16-bit PGM depth (millimeters), 8-bit
// PPM RGB, and intrinsics as {fx, fy, cx, cy, width, height}.

#include "e3g/geometry.hpp"

#include "json.hpp"

#include <filesystem>

namespace e3g {

void write_depth_pgm(const std::filesystem::path& path, const Tensor& depth_mm);
Tensor read_depth_pgm(const std::filesystem::path& path);

/// rgb [3,H,W] in [0,1], quantized to 8 bits.
void write_rgb_ppm(const std::filesystem::path& path, const Tensor& rgb);
Tensor read_rgb_ppm(const std::filesystem::path& path);

/// Single-channel [1,H,W] or [H,W] map in [0,1] rendered as gray PPM.
void write_gray_ppm(const std::filesystem::path& path, const Tensor& values);

nlohmann::json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

}  // namespace e3g
