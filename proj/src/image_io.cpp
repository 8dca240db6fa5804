#include "ocs/image_io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ocs {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'S', 'B'};

struct ArrayHeader {
  char magic[4];
  std::uint32_t dtype;
  std::uint32_t height;
  std::uint32_t width;
};
static_assert(sizeof(ArrayHeader) == 16);

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return f;
}

ArrayHeader read_header(std::ifstream& f, const std::filesystem::path& path,
                        std::uint32_t want_dtype) {
  ArrayHeader h{};
  f.read(reinterpret_cast<char*>(&h), sizeof(h));
  if (!f || std::memcmp(h.magic, kMagic, 4) != 0 || h.dtype != want_dtype)
    throw std::runtime_error("bad array file " + path.string());
  return h;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<Vec3>& rgb) {
  auto f = open_out(path);
  f << "P6\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(width) * 3);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const Vec3& c = rgb[static_cast<size_t>(v) * width + u];
      for (int k = 0; k < 3; ++k)
        row[static_cast<size_t>(u) * 3 + k] = static_cast<unsigned char>(
            std::clamp(std::lround(c(k) * 255.0), 0L, 255L));
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

void read_ppm(const std::filesystem::path& path, int& width, int& height,
              std::vector<Vec3>& rgb) {
  auto f = open_in(path);
  std::string magic;
  int maxval = 0;
  f >> magic >> width >> height >> maxval;
  if (magic != "P6" || maxval != 255 || width <= 0 || height <= 0)
    throw std::runtime_error("bad ppm " + path.string());
  f.get();  // single whitespace after header
  rgb.assign(static_cast<size_t>(width) * height, Vec3::Zero());
  std::vector<unsigned char> row(static_cast<size_t>(width) * 3);
  for (int v = 0; v < height; ++v) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!f) throw std::runtime_error("truncated ppm " + path.string());
    for (int u = 0; u < width; ++u)
      for (int k = 0; k < 3; ++k)
        rgb[static_cast<size_t>(v) * width + u](k) =
            row[static_cast<size_t>(u) * 3 + k] / 255.0;
  }
}

void write_array_f64(const std::filesystem::path& path, int height, int width,
                     const std::vector<double>& data) {
  auto f = open_out(path);
  ArrayHeader h{{'O', 'C', 'S', 'B'}, 1, static_cast<std::uint32_t>(height),
                static_cast<std::uint32_t>(width)};
  f.write(reinterpret_cast<const char*>(&h), sizeof(h));
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
}

void write_array_i32(const std::filesystem::path& path, int height, int width,
                     const std::vector<int>& data) {
  auto f = open_out(path);
  ArrayHeader h{{'O', 'C', 'S', 'B'}, 2, static_cast<std::uint32_t>(height),
                static_cast<std::uint32_t>(width)};
  f.write(reinterpret_cast<const char*>(&h), sizeof(h));
  std::vector<std::int32_t> buf(data.begin(), data.end());
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(std::int32_t)));
}

void read_array_f64(const std::filesystem::path& path, int& height, int& width,
                    std::vector<double>& data) {
  auto f = open_in(path);
  auto h = read_header(f, path, 1);
  height = static_cast<int>(h.height);
  width = static_cast<int>(h.width);
  data.resize(static_cast<size_t>(height) * width);
  f.read(reinterpret_cast<char*>(data.data()),
         static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!f) throw std::runtime_error("truncated array " + path.string());
}

void read_array_i32(const std::filesystem::path& path, int& height, int& width,
                    std::vector<int>& data) {
  auto f = open_in(path);
  auto h = read_header(f, path, 2);
  height = static_cast<int>(h.height);
  width = static_cast<int>(h.width);
  std::vector<std::int32_t> buf(static_cast<size_t>(height) * width);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(std::int32_t)));
  if (!f) throw std::runtime_error("truncated array " + path.string());
  data.assign(buf.begin(), buf.end());
}

}  // namespace ocs
