#include "e3g/dataset.hpp"

#include "e3g/image_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace e3g {

std::string scene_dir_name(int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%04d", index);
    return buf;
}

SceneRecord generate_record(std::uint64_t base_seed, int index, int n_objects, const CameraIntrinsics& intrinsics,
                            int* placement_failures)
{
    SceneGenStats stats;
    SceneRecord rec;
    rec.id = scene_dir_name(index);
    rec.scene = gen_scene(base_seed + static_cast<std::uint64_t>(index), n_objects, &stats);
    rec.frame = make_frame(rec.scene, intrinsics);
    rec.labels = label_grasps(rec.scene);
    if (placement_failures) *placement_failures = stats.placement_failures;
    return rec;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(1) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void write_scene_dir(const std::filesystem::path& dir, const SceneRecord& rec)
{
    std::filesystem::create_directories(dir);
    nlohmann::json scene = scene_to_json(rec.scene);
    scene["intrinsics"] = intrinsics_to_json(rec.frame.intrinsics);
    write_json_file(dir / "scene.json", scene);
    write_depth_pgm(dir / "depth.pgm", rec.frame.depth);
    write_rgb_ppm(dir / "rgb.ppm", rec.frame.rgb);
    write_json_file(dir / "labels.json", {{"scene_id", rec.id}, {"grasps", grasps_to_json(rec.labels)}});
}

SceneRecord read_scene_dir(const std::filesystem::path& dir)
{
    SceneRecord rec;
    rec.id = dir.filename().string();
    if (rec.id.empty()) rec.id = dir.parent_path().filename().string();
    const nlohmann::json scene = read_json_file(dir / "scene.json");
    rec.scene = scene_from_json(scene);
    rec.frame.intrinsics = intrinsics_from_json(scene.at("intrinsics"));
    rec.frame.depth = read_depth_pgm(dir / "depth.pgm");
    rec.frame.rgb = read_rgb_ppm(dir / "rgb.ppm");
    rec.frame.validate();
    if (std::filesystem::exists(dir / "labels.json")) rec.labels = grasps_from_json(read_json_file(dir / "labels.json"));
    return rec;
}

std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root)
{
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(root)) throw std::runtime_error("not a directory: " + root.string());
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "scene.json")) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace e3g
