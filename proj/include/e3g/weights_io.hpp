#pragma once

// E3GW weight files: "E3GW", u32 version (1), u32 tensor count, then per
// tensor u16 name length, UTF-8 name, u8 rank, rank x u32 extents and the
// float32 payload. All integers and floats little-endian.

#include "e3g/params.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace e3g {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

class WeightFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_weights(const ParameterSet& params);
ParameterSet decode_weights(const std::vector<std::uint8_t>& bytes);

void save_weights(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_weights(const std::filesystem::path& path);

}  // namespace e3g
