// Procedural multi-scale scene generation and exact RGBD rendering.
//
// Scenes are simple primitives resting on a square floor. Rendering is
// closed-form ray intersection with flat Lambertian shading under one fixed
// directional light, so frames double as an analytic oracle for everything
// downstream.

#pragma once

#include "ocs/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ocs {

enum class ScaleClass { small, medium, large };
enum class Shape { box, sphere, cylinder, cone };

const char* to_string(ScaleClass s);
const char* to_string(Shape s);
std::optional<ScaleClass> scale_class_from_string(const std::string& s);
std::optional<Shape> shape_from_string(const std::string& s);

struct ObjectSpec {
  Shape shape = Shape::box;
  // box: (half x, full height, half z); sphere: (r,r,r);
  // cylinder/cone: (radius, height, radius)
  Vec3 size = Vec3::Zero();
  Vec3 color = Vec3::Zero();
  double x = 0.0, z = 0.0, yaw = 0.0;

  double bounding_radius() const;  // on the ground plane
  double height() const;
};

struct SceneSpec {
  ScaleClass scale_class = ScaleClass::small;
  double floor_half_extent = 0.0;
  std::vector<ObjectSpec> objects;
  Vec3 floor_color = Vec3::Zero();
  std::uint64_t seed = 0;
};

struct ScaleConfig {
  double floor_half_extent = 4.0;
  int min_objects = 2;
  int max_objects = 4;
  double far_clip = 20.0;
};

struct SimConfig {
  ScaleConfig small{4.0, 2, 4, 20.0};
  ScaleConfig medium{8.0, 4, 8, 22.0};
  ScaleConfig large{24.0, 12, 24, 26.0};
  int image_width = 32;
  int image_height = 32;
  double hfov_deg = 70.0;
  double near_clip = 0.1;
  double min_gap = 0.3;  // between object bounding circles
  int max_placement_attempts = 2000;

  const ScaleConfig& scale(ScaleClass s) const;
  Intrinsics make_intrinsics(ScaleClass s) const;
};

struct RGBDFrame {
  int width = 0, height = 0;
  std::vector<Vec3> rgb;            // row-major, [0,1]
  std::vector<double> depth;        // ray depth; far clip where no hit
  std::vector<int> instance_ids;    // 0 floor, -1 sky, 1..N objects

  Vec3& rgb_at(int u, int v) { return rgb[static_cast<size_t>(v) * width + u]; }
  const Vec3& rgb_at(int u, int v) const { return rgb[static_cast<size_t>(v) * width + u]; }
  double& depth_at(int u, int v) { return depth[static_cast<size_t>(v) * width + u]; }
  double depth_at(int u, int v) const { return depth[static_cast<size_t>(v) * width + u]; }
  int& id_at(int u, int v) { return instance_ids[static_cast<size_t>(v) * width + u]; }
  int id_at(int u, int v) const { return instance_ids[static_cast<size_t>(v) * width + u]; }
};

SceneSpec generate_scene(ScaleClass scale, const SimConfig& config, std::uint64_t seed);

// T input poses covering the floor with consecutive overlap, plus Q query
// poses from the same distribution
void sample_trajectory(const SceneSpec& scene, const SimConfig& config, int T, int Q,
                       std::uint64_t seed, std::vector<CameraPose>& input_views,
                       std::vector<CameraPose>& query_views);

RGBDFrame render_ground_truth(const SceneSpec& scene, const CameraPose& camera);

// first hit along the ray within (near, far]; id as in RGBDFrame
struct Hit {
  double t = 0.0;
  int id = -1;
  Vec3 normal = Vec3::Zero();
  Vec3 color = Vec3::Zero();
};
std::optional<Hit> intersect_scene(const SceneSpec& scene, const Ray& ray,
                                   double t_near, double t_far);

// fraction of a floor grid covered by the union of the views' ground wedges
double floor_coverage(const SceneSpec& scene, const std::vector<CameraPose>& views,
                      int grid = 64);

}  // namespace ocs
