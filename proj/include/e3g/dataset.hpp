#pragma once

// On-disk scene directories: scene.json (scene + intrinsics), depth.pgm,
// rgb.ppm and labels.json.

#include "e3g/scene.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace e3g {

struct SceneRecord {
    std::string id;
    SceneModel scene;
    ImageFrame frame;
    std::vector<GraspPose> labels;
};

std::string scene_dir_name(int index);

/// Generates scene `index` with seed base_seed + index.
SceneRecord generate_record(std::uint64_t base_seed, int index, int n_objects,
                            const CameraIntrinsics& intrinsics = default_intrinsics(), int* placement_failures = nullptr);

void write_scene_dir(const std::filesystem::path& dir, const SceneRecord& record);

/// Reads the frame and scene. Labels are read when labels.json exists.
SceneRecord read_scene_dir(const std::filesystem::path& dir);

/// Subdirectories holding a scene.json, sorted by name.
std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace e3g
