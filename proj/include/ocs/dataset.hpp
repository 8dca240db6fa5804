// On-disk dataset: one directory per scene holding the scene manifest, the
// trajectory manifest, and per-view RGBD + instance-id frames.

#pragma once

#include "ocs/scene_sim.hpp"

#include <filesystem>

namespace ocs {

struct SceneData {
  SceneSpec spec;
  std::vector<CameraPose> input_views;
  std::vector<CameraPose> query_views;
  std::vector<RGBDFrame> input_frames;
  std::vector<RGBDFrame> query_frames;
};

SceneData make_scene_data(ScaleClass scale, const SimConfig& config, int T, int Q,
                          std::uint64_t seed);

void write_scene_dir(const std::filesystem::path& dir, const SceneData& data);
SceneData read_scene_dir(const std::filesystem::path& dir);

struct DatasetParams {
  ScaleClass scale = ScaleClass::small;
  int scenes = 1;
  int views = 4;
  int queries = 2;
  std::uint64_t seed = 0;
  int workers = 1;
};

// writes scene_0000, scene_0001, ... under out
void generate_dataset(const std::filesystem::path& out, const DatasetParams& params,
                      const SimConfig& config);

std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root);

}  // namespace ocs
