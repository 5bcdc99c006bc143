#include "e3g/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace e3g {

namespace {

struct PnmHeader {
    std::string magic;
    std::size_t width = 0, height = 0;
    unsigned maxval = 0;
};

PnmHeader read_header(std::istream& in, const std::filesystem::path& path)
{
    PnmHeader h;
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("truncated netpbm header in " + path.string());
    };
    h.magic = next_token();
    h.width = std::stoul(next_token());
    h.height = std::stoul(next_token());
    h.maxval = static_cast<unsigned>(std::stoul(next_token()));
    in.get();  // single whitespace before the raster
    if (h.width == 0 || h.height == 0 || h.maxval == 0 || h.maxval > 65535)
        throw std::runtime_error("invalid netpbm header in " + path.string());
    return h;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return f;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return f;
}

unsigned char to_byte(float v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

}  // namespace

void write_depth_pgm(const std::filesystem::path& path, const Tensor& depth_mm)
{
    const std::size_t H = depth_mm.dim(depth_mm.rank() - 2), W = depth_mm.dim(depth_mm.rank() - 1);
    auto f = open_out(path);
    f << "P5\n" << W << " " << H << "\n65535\n";
    std::vector<unsigned char> raster(H * W * 2);
    for (std::size_t i = 0; i < H * W; ++i) {
        const auto v = static_cast<std::uint16_t>(std::clamp(std::lround(depth_mm[i]), 0L, 65535L));
        raster[2 * i] = static_cast<unsigned char>(v >> 8);
        raster[2 * i + 1] = static_cast<unsigned char>(v & 0xFF);
    }
    f.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
}

Tensor read_depth_pgm(const std::filesystem::path& path)
{
    auto f = open_in(path);
    const auto h = read_header(f, path);
    if (h.magic != "P5") throw std::runtime_error(path.string() + " is not a binary PGM");
    const std::size_t bpp = h.maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raster(h.width * h.height * bpp);
    f.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!f) throw std::runtime_error("truncated PGM raster in " + path.string());
    Tensor depth(Shape{1, h.height, h.width});
    for (std::size_t i = 0; i < h.width * h.height; ++i)
        depth[i] = bpp == 2 ? static_cast<float>((raster[2 * i] << 8) | raster[2 * i + 1]) : static_cast<float>(raster[i]);
    return depth;
}

void write_rgb_ppm(const std::filesystem::path& path, const Tensor& rgb)
{
    const std::size_t H = rgb.dim(1), W = rgb.dim(2), plane = H * W;
    auto f = open_out(path);
    f << "P6\n" << W << " " << H << "\n255\n";
    std::vector<unsigned char> raster(plane * 3);
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) raster[3 * i + c] = to_byte(rgb[c * plane + i]);
    f.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
}

Tensor read_rgb_ppm(const std::filesystem::path& path)
{
    auto f = open_in(path);
    const auto h = read_header(f, path);
    if (h.magic != "P6" || h.maxval > 255) throw std::runtime_error(path.string() + " is not an 8-bit binary PPM");
    const std::size_t plane = h.width * h.height;
    std::vector<unsigned char> raster(plane * 3);
    f.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
    if (!f) throw std::runtime_error("truncated PPM raster in " + path.string());
    Tensor rgb(Shape{3, h.height, h.width});
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c)
            rgb[c * plane + i] = static_cast<float>(raster[3 * i + c]) / static_cast<float>(h.maxval);
    return rgb;
}

void write_gray_ppm(const std::filesystem::path& path, const Tensor& values)
{
    const std::size_t H = values.dim(values.rank() - 2), W = values.dim(values.rank() - 1);
    auto f = open_out(path);
    f << "P6\n" << W << " " << H << "\n255\n";
    std::vector<unsigned char> raster(H * W * 3);
    for (std::size_t i = 0; i < H * W; ++i) raster[3 * i] = raster[3 * i + 1] = raster[3 * i + 2] = to_byte(values[i]);
    f.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
}

nlohmann::json intrinsics_to_json(const CameraIntrinsics& k)
{
    return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j)
{
    CameraIntrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    k.validate();
    return k;
}

}  // namespace e3g
