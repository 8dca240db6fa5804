#include "ocs/dataset.hpp"

#include "ocs/image_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

namespace ocs {

namespace {

using nlohmann::json;

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

json to_json(const CameraPose& cam) {
  return json{{"position", to_json(cam.position)},
              {"yaw", cam.yaw},
              {"pitch", cam.pitch},
              {"focal_px", cam.intrinsics.focal_px},
              {"width", cam.intrinsics.width},
              {"height", cam.intrinsics.height},
              {"near", cam.intrinsics.near_clip},
              {"far", cam.intrinsics.far_clip}};
}

CameraPose camera_from(const json& j) {
  CameraPose cam;
  cam.position = vec3_from(j.at("position"));
  cam.yaw = j.at("yaw");
  cam.pitch = j.at("pitch");
  cam.intrinsics.focal_px = j.at("focal_px");
  cam.intrinsics.width = j.at("width");
  cam.intrinsics.height = j.at("height");
  cam.intrinsics.near_clip = j.at("near");
  cam.intrinsics.far_clip = j.at("far");
  return cam;
}

json to_json(const SceneSpec& scene) {
  json objs = json::array();
  for (const auto& o : scene.objects)
    objs.push_back(json{{"shape", to_string(o.shape)},
                        {"size", to_json(o.size)},
                        {"color", to_json(o.color)},
                        {"x", o.x},
                        {"z", o.z},
                        {"yaw", o.yaw}});
  return json{{"scale_class", to_string(scene.scale_class)},
              {"floor_half_extent", scene.floor_half_extent},
              {"floor_color", to_json(scene.floor_color)},
              {"seed", scene.seed},
              {"objects", objs}};
}

SceneSpec scene_from(const json& j) {
  SceneSpec scene;
  scene.scale_class = scale_class_from_string(j.at("scale_class")).value();
  scene.floor_half_extent = j.at("floor_half_extent");
  scene.floor_color = vec3_from(j.at("floor_color"));
  scene.seed = j.at("seed");
  for (const auto& jo : j.at("objects")) {
    ObjectSpec o;
    o.shape = shape_from_string(jo.at("shape")).value();
    o.size = vec3_from(jo.at("size"));
    o.color = vec3_from(jo.at("color"));
    o.x = jo.at("x");
    o.z = jo.at("z");
    o.yaw = jo.at("yaw");
    scene.objects.push_back(o);
  }
  return scene;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return json::parse(f);
}

std::string view_stem(const char* kind, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03zu", kind, i);
  return buf;
}

void write_frame(const std::filesystem::path& dir, const std::string& stem,
                 const RGBDFrame& f) {
  write_ppm(dir / (stem + ".rgb.ppm"), f.width, f.height, f.rgb);
  write_array_f64(dir / (stem + ".depth.bin"), f.height, f.width, f.depth);
  write_array_i32(dir / (stem + ".ids.bin"), f.height, f.width, f.instance_ids);
}

RGBDFrame read_frame(const std::filesystem::path& dir, const std::string& stem) {
  RGBDFrame f;
  int h = 0, w = 0;
  read_ppm(dir / (stem + ".rgb.ppm"), f.width, f.height, f.rgb);
  read_array_f64(dir / (stem + ".depth.bin"), h, w, f.depth);
  read_array_i32(dir / (stem + ".ids.bin"), h, w, f.instance_ids);
  if (h != f.height || w != f.width)
    throw std::runtime_error("frame size mismatch in " + dir.string());
  return f;
}

}  // namespace

SceneData make_scene_data(ScaleClass scale, const SimConfig& config, int T, int Q,
                          std::uint64_t seed) {
  SceneData data;
  data.spec = generate_scene(scale, config, seed);
  sample_trajectory(data.spec, config, T, Q, seed ^ 0x5cfaULL, data.input_views,
                    data.query_views);
  for (const auto& cam : data.input_views)
    data.input_frames.push_back(render_ground_truth(data.spec, cam));
  for (const auto& cam : data.query_views)
    data.query_frames.push_back(render_ground_truth(data.spec, cam));
  return data;
}

void write_scene_dir(const std::filesystem::path& dir, const SceneData& data) {
  std::filesystem::create_directories(dir);
  write_json(dir / "scene.json", to_json(data.spec));
  json traj{{"input", json::array()}, {"query", json::array()}};
  for (const auto& cam : data.input_views) traj["input"].push_back(to_json(cam));
  for (const auto& cam : data.query_views) traj["query"].push_back(to_json(cam));
  write_json(dir / "trajectory.json", traj);
  for (size_t i = 0; i < data.input_frames.size(); ++i)
    write_frame(dir, view_stem("input", i), data.input_frames[i]);
  for (size_t i = 0; i < data.query_frames.size(); ++i)
    write_frame(dir, view_stem("query", i), data.query_frames[i]);
}

SceneData read_scene_dir(const std::filesystem::path& dir) {
  SceneData data;
  data.spec = scene_from(read_json(dir / "scene.json"));
  json traj = read_json(dir / "trajectory.json");
  for (const auto& j : traj.at("input")) data.input_views.push_back(camera_from(j));
  for (const auto& j : traj.at("query")) data.query_views.push_back(camera_from(j));
  for (size_t i = 0; i < data.input_views.size(); ++i)
    data.input_frames.push_back(read_frame(dir, view_stem("input", i)));
  for (size_t i = 0; i < data.query_views.size(); ++i)
    data.query_frames.push_back(read_frame(dir, view_stem("query", i)));
  return data;
}

void generate_dataset(const std::filesystem::path& out, const DatasetParams& params,
                      const SimConfig& config) {
  std::filesystem::create_directories(out);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < params.scenes; i = next.fetch_add(1)) {
      auto data = make_scene_data(params.scale, config, params.views, params.queries,
                                  params.seed * 1000003ULL + static_cast<std::uint64_t>(i));
      char name[32];
      std::snprintf(name, sizeof(name), "scene_%04d", i);
      write_scene_dir(out / name, data);
    }
  };
  int workers = std::clamp(params.workers, 1, params.scenes);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().starts_with("scene_"))
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace ocs
