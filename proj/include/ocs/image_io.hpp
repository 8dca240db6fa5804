#pragma once

#include "ocs/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ocs {

// binary P6 PPM, 8-bit, values clamped from [0,1]
void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<Vec3>& rgb);
void read_ppm(const std::filesystem::path& path, int& width, int& height,
              std::vector<Vec3>& rgb);

// flat binary array: 16-byte header (magic "OCSB", dtype, H, W) + payload.
// dtype 1 = float64, 2 = int32.
void write_array_f64(const std::filesystem::path& path, int height, int width,
                     const std::vector<double>& data);
void write_array_i32(const std::filesystem::path& path, int height, int width,
                     const std::vector<int>& data);
void read_array_f64(const std::filesystem::path& path, int& height, int& width,
                    std::vector<double>& data);
void read_array_i32(const std::filesystem::path& path, int& height, int& width,
                    std::vector<int>& data);

}  // namespace ocs
