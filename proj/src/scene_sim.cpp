#include "ocs/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ocs {

namespace {

constexpr double kShadeAmbient = 0.35;
const Vec3 kLightDir = Vec3(0.35, 0.85, 0.40).normalized();

const Vec3 kPalette[8] = {
    {0.85, 0.15, 0.15}, {0.15, 0.55, 0.85}, {0.95, 0.75, 0.10}, {0.20, 0.70, 0.30},
    {0.70, 0.25, 0.75}, {0.90, 0.45, 0.15}, {0.20, 0.80, 0.75}, {0.90, 0.30, 0.55}};

struct LocalHit {
  double t;
  Vec3 normal;  // in the local frame
};

// all intersections below run in the object's local frame:
// translate by -(x,0,z), rotate by -yaw about y

bool hit_box(const Vec3& o, const Vec3& d, const Vec3& size, LocalHit& out) {
  Vec3 lo(-size.x(), 0.0, -size.z()), hi(size.x(), size.y(), size.z());
  double t0 = -1e30, t1 = 1e30;
  int axis0 = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d(a)) < 1e-12) {
      if (o(a) < lo(a) || o(a) > hi(a)) return false;
      continue;
    }
    double ta = (lo(a) - o(a)) / d(a);
    double tb = (hi(a) - o(a)) / d(a);
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  if (t0 <= 0 || axis0 < 0) return false;
  out.t = t0;
  out.normal = Vec3::Zero();
  out.normal(axis0) = d(axis0) > 0 ? -1.0 : 1.0;
  return true;
}

bool hit_sphere(const Vec3& o, const Vec3& d, double r, LocalHit& out) {
  Vec3 oc = o - Vec3(0, r, 0);
  double b = oc.dot(d);
  double c = oc.squaredNorm() - r * r;
  double disc = b * b - c;
  if (disc < 0) return false;
  double t = -b - std::sqrt(disc);
  if (t <= 0) return false;
  out.t = t;
  out.normal = (oc + t * d) / r;
  return true;
}

bool hit_disc(const Vec3& o, const Vec3& d, double y, double r, double ny,
              LocalHit& out) {
  if (std::abs(d.y()) < 1e-12) return false;
  double t = (y - o.y()) / d.y();
  if (t <= 0) return false;
  Vec3 p = o + t * d;
  if (p.x() * p.x() + p.z() * p.z() > r * r) return false;
  out.t = t;
  out.normal = Vec3(0, ny, 0);
  return true;
}

bool hit_cylinder(const Vec3& o, const Vec3& d, double r, double h, LocalHit& out) {
  bool found = false;
  LocalHit best{1e30, Vec3::Zero()};
  double a = d.x() * d.x() + d.z() * d.z();
  if (a > 1e-12) {
    double b = o.x() * d.x() + o.z() * d.z();
    double c = o.x() * o.x() + o.z() * o.z() - r * r;
    double disc = b * b - a * c;
    if (disc >= 0) {
      double t = (-b - std::sqrt(disc)) / a;
      if (t > 0) {
        double y = o.y() + t * d.y();
        if (y >= 0 && y <= h) {
          Vec3 p = o + t * d;
          best = {t, Vec3(p.x(), 0, p.z()).normalized()};
          found = true;
        }
      }
    }
  }
  LocalHit cap;
  for (double params[2][2] = {{0.0, -1.0}, {h, 1.0}}; auto& pc : params) {
    if (hit_disc(o, d, pc[0], r, pc[1], cap) && cap.t < best.t) {
      best = cap;
      found = true;
    }
  }
  if (found) out = best;
  return found;
}

bool hit_cone(const Vec3& o, const Vec3& d, double r, double h, LocalHit& out) {
  bool found = false;
  LocalHit best{1e30, Vec3::Zero()};
  // side: x^2 + z^2 = k^2 (h - y)^2, y in [0, h]
  double k = r / h;
  double k2 = k * k;
  double a = d.x() * d.x() + d.z() * d.z() - k2 * d.y() * d.y();
  double oy = o.y() - h;
  double b = o.x() * d.x() + o.z() * d.z() - k2 * oy * d.y();
  double c = o.x() * o.x() + o.z() * o.z() - k2 * oy * oy;
  if (std::abs(a) > 1e-12) {
    double disc = b * b - a * c;
    if (disc >= 0) {
      double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t > 0 && t < best.t) {
          double y = o.y() + t * d.y();
          if (y >= 0 && y <= h) {
            Vec3 p = o + t * d;
            Vec3 n(p.x(), k2 * (h - y), p.z());
            if (n.squaredNorm() > 1e-16) {
              best = {t, n.normalized()};
              found = true;
            }
          }
        }
      }
    }
  }
  LocalHit cap;
  if (hit_disc(o, d, 0.0, r, -1.0, cap) && cap.t < best.t) {
    best = cap;
    found = true;
  }
  if (found) out = best;
  return found;
}

bool hit_object(const ObjectSpec& obj, const Ray& ray, LocalHit& out) {
  double cy = std::cos(obj.yaw), sy = std::sin(obj.yaw);
  auto rot_in = [&](const Vec3& v) {
    return Vec3(cy * v.x() - sy * v.z(), v.y(), sy * v.x() + cy * v.z());
  };
  Vec3 o = rot_in(ray.origin - Vec3(obj.x, 0, obj.z));
  Vec3 d = rot_in(ray.dir);
  LocalHit lh;
  bool ok = false;
  switch (obj.shape) {
    case Shape::box: ok = hit_box(o, d, obj.size, lh); break;
    case Shape::sphere: ok = hit_sphere(o, d, obj.size.x(), lh); break;
    case Shape::cylinder: ok = hit_cylinder(o, d, obj.size.x(), obj.size.y(), lh); break;
    case Shape::cone: ok = hit_cone(o, d, obj.size.x(), obj.size.y(), lh); break;
  }
  if (!ok) return false;
  // rotate normal back out
  out.t = lh.t;
  out.normal = Vec3(cy * lh.normal.x() + sy * lh.normal.z(), lh.normal.y(),
                    -sy * lh.normal.x() + cy * lh.normal.z());
  return true;
}

Vec3 shade(const Vec3& albedo, const Vec3& n) {
  double diff = std::max(0.0, n.dot(kLightDir));
  return albedo * (kShadeAmbient + (1.0 - kShadeAmbient) * diff);
}

ObjectSpec random_object(Rng& rng) {
  ObjectSpec obj;
  obj.shape = static_cast<Shape>(rng.uniform_int(0, 3));
  switch (obj.shape) {
    case Shape::box:
      obj.size = Vec3(rng.uniform(0.3, 0.6), rng.uniform(0.6, 1.4), rng.uniform(0.3, 0.6));
      break;
    case Shape::sphere: {
      double r = rng.uniform(0.35, 0.6);
      obj.size = Vec3(r, r, r);
      break;
    }
    case Shape::cylinder:
      obj.size = Vec3(rng.uniform(0.3, 0.5), rng.uniform(0.6, 1.4), 0);
      obj.size.z() = obj.size.x();
      break;
    case Shape::cone:
      obj.size = Vec3(rng.uniform(0.35, 0.6), rng.uniform(0.7, 1.4), 0);
      obj.size.z() = obj.size.x();
      break;
  }
  Vec3 base = kPalette[rng.uniform_int(0, 7)];
  for (int i = 0; i < 3; ++i)
    obj.color(i) = std::clamp(base(i) + rng.uniform(-0.05, 0.05), 0.0, 1.0);
  obj.yaw = wrap_angle(rng.uniform(-kPi, kPi));
  return obj;
}

}  // namespace

const char* to_string(ScaleClass s) {
  switch (s) {
    case ScaleClass::small: return "small";
    case ScaleClass::medium: return "medium";
    case ScaleClass::large: return "large";
  }
  return "?";
}

const char* to_string(Shape s) {
  switch (s) {
    case Shape::box: return "box";
    case Shape::sphere: return "sphere";
    case Shape::cylinder: return "cylinder";
    case Shape::cone: return "cone";
  }
  return "?";
}

std::optional<ScaleClass> scale_class_from_string(const std::string& s) {
  if (s == "small") return ScaleClass::small;
  if (s == "medium") return ScaleClass::medium;
  if (s == "large") return ScaleClass::large;
  return std::nullopt;
}

std::optional<Shape> shape_from_string(const std::string& s) {
  if (s == "box") return Shape::box;
  if (s == "sphere") return Shape::sphere;
  if (s == "cylinder") return Shape::cylinder;
  if (s == "cone") return Shape::cone;
  return std::nullopt;
}

double ObjectSpec::bounding_radius() const {
  if (shape == Shape::box) return std::hypot(size.x(), size.z());
  return size.x();
}

double ObjectSpec::height() const {
  return shape == Shape::sphere ? 2.0 * size.x() : size.y();
}

const ScaleConfig& SimConfig::scale(ScaleClass s) const {
  switch (s) {
    case ScaleClass::small: return small;
    case ScaleClass::medium: return medium;
    case ScaleClass::large: return large;
  }
  return small;
}

Intrinsics SimConfig::make_intrinsics(ScaleClass s) const {
  Intrinsics in;
  in.width = image_width;
  in.height = image_height;
  in.focal_px = image_width / 2.0 / std::tan(hfov_deg * kPi / 180.0 / 2.0);
  in.near_clip = near_clip;
  in.far_clip = scale(s).far_clip;
  return in;
}

SceneSpec generate_scene(ScaleClass scale, const SimConfig& config, std::uint64_t seed) {
  const ScaleConfig& sc = config.scale(scale);
  Rng rng(seed);
  SceneSpec scene;
  scene.scale_class = scale;
  scene.floor_half_extent = sc.floor_half_extent;
  scene.seed = seed;
  for (int i = 0; i < 3; ++i)
    scene.floor_color(i) = std::clamp(0.73 + rng.uniform(-0.03, 0.03), 0.0, 1.0);

  int count = rng.uniform_int(sc.min_objects, sc.max_objects);
  int attempts = 0;
  while (static_cast<int>(scene.objects.size()) < count) {
    if (++attempts > config.max_placement_attempts)
      throw std::runtime_error("generate_scene: cannot place " +
                               std::to_string(count) + " objects on the floor");
    ObjectSpec obj = random_object(rng);
    double r = obj.bounding_radius();
    double limit = sc.floor_half_extent - r;
    if (limit <= 0) continue;
    obj.x = rng.uniform(-limit, limit);
    obj.z = rng.uniform(-limit, limit);
    bool clash = false;
    for (const auto& other : scene.objects) {
      double min_d = r + other.bounding_radius() + config.min_gap;
      double dx = obj.x - other.x, dz = obj.z - other.z;
      if (dx * dx + dz * dz < min_d * min_d) {
        clash = true;
        break;
      }
    }
    if (!clash) scene.objects.push_back(obj);
  }
  return scene;
}

namespace {

CameraPose make_pose(const SimConfig& config, ScaleClass scale, const Vec3& position,
                     double look_x, double look_z) {
  CameraPose cam;
  cam.position = position;
  cam.intrinsics = config.make_intrinsics(scale);
  double dx = look_x - position.x(), dz = look_z - position.z();
  // view direction at yaw=0 is -z; yaw rotates it by RotY(yaw)
  cam.yaw = wrap_angle(std::atan2(-dx, -dz));
  double horiz = std::hypot(dx, dz);
  cam.pitch = std::clamp(-std::atan2(position.y(), std::max(horiz, 1e-6)), -1.45, -0.05);
  return cam;
}

std::vector<CameraPose> orbit_views(const SceneSpec& scene, const SimConfig& config,
                                    int n, Rng& rng) {
  std::vector<CameraPose> views;
  double half = scene.floor_half_extent;
  double phase = rng.uniform(0, 2 * kPi);
  for (int i = 0; i < n; ++i) {
    double az = phase + 2 * kPi * i / n + rng.uniform(-0.12, 0.12);
    double radius = half * 1.35 + rng.uniform(0.0, 0.6);
    double height = std::min(half, 5.0) * 1.05 + rng.uniform(-0.3, 0.3);
    Vec3 pos(radius * std::sin(az), height, radius * std::cos(az));
    double lx = rng.uniform(-0.2, 0.2) * half;
    double lz = rng.uniform(-0.2, 0.2) * half;
    views.push_back(make_pose(config, scene.scale_class, pos, lx, lz));
  }
  return views;
}

std::vector<CameraPose> sweep_views(const SceneSpec& scene, const SimConfig& config,
                                    int n, Rng& rng) {
  // Serpentine snake of waypoints; each camera sits behind its waypoint and
  // looks at the next one, so consecutive wedges always share the region
  // around the shared waypoint.
  double half = scene.floor_half_extent;
  int rows = std::max(1, static_cast<int>(std::round(2.0 * half / 12.0)));
  int cols = (n + rows - 1) / rows;
  std::vector<Vec2> waypoints;
  for (int r = 0; r < rows && static_cast<int>(waypoints.size()) < n; ++r) {
    double zr = rows == 1 ? 0.0 : -half + 3.0 + (2.0 * half - 6.0) * r / (rows - 1);
    double stagger = (r % 2) ? 3.5 : 0.0;
    for (int i = 0; i < cols && static_cast<int>(waypoints.size()) < n; ++i) {
      double s = cols == 1 ? 0.5 : static_cast<double>(i) / (cols - 1);
      if (r % 2) s = 1.0 - s;
      double span = 2.0 * half - 8.0;
      double x = -span / 2 + span * s + stagger * ((r % 2) ? -1.0 : 1.0);
      waypoints.emplace_back(x + rng.uniform(-0.5, 0.5), zr + rng.uniform(-0.5, 0.5));
    }
  }
  std::vector<CameraPose> views;
  for (size_t i = 0; i < waypoints.size(); ++i) {
    Vec2 here = waypoints[i];
    Vec2 next = i + 1 < waypoints.size() ? waypoints[i + 1]
                                         : here + (here - waypoints[i - 1]);
    Vec2 dir = (next - here).normalized();
    Vec2 pos2 = here - 5.0 * dir;
    Vec3 pos(pos2.x(), 4.6 + rng.uniform(-0.25, 0.25), pos2.y());
    views.push_back(make_pose(config, scene.scale_class, pos, next.x(), next.y()));
  }
  return views;
}

std::vector<CameraPose> trajectory_views(const SceneSpec& scene, const SimConfig& config,
                                         int n, Rng& rng) {
  if (scene.scale_class == ScaleClass::large) return sweep_views(scene, config, n, rng);
  return orbit_views(scene, config, n, rng);
}

}  // namespace

void sample_trajectory(const SceneSpec& scene, const SimConfig& config, int T, int Q,
                       std::uint64_t seed, std::vector<CameraPose>& input_views,
                       std::vector<CameraPose>& query_views) {
  if (T < 1 || Q < 0) throw std::invalid_argument("sample_trajectory: bad T/Q");
  Rng rng(seed ^ 0x7261795f63616dULL);
  input_views = trajectory_views(scene, config, T, rng);
  query_views = trajectory_views(scene, config, Q, rng);
}

std::optional<Hit> intersect_scene(const SceneSpec& scene, const Ray& ray,
                                   double t_near, double t_far) {
  Hit best;
  best.t = t_far;
  bool found = false;
  LocalHit lh;
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    if (hit_object(scene.objects[i], ray, lh) && lh.t > t_near && lh.t <= best.t) {
      best.t = lh.t;
      best.id = static_cast<int>(i) + 1;
      best.normal = lh.normal;
      best.color = scene.objects[i].color;
      found = true;
    }
  }
  // floor quad
  if (std::abs(ray.dir.y()) > 1e-12) {
    double t = -ray.origin.y() / ray.dir.y();
    if (t > t_near && t <= best.t) {
      Vec3 p = ray.origin + t * ray.dir;
      if (std::abs(p.x()) <= scene.floor_half_extent &&
          std::abs(p.z()) <= scene.floor_half_extent) {
        best.t = t;
        best.id = 0;
        best.normal = Vec3(0, 1, 0);
        best.color = scene.floor_color;
        found = true;
      }
    }
  }
  if (!found) return std::nullopt;
  return best;
}

RGBDFrame render_ground_truth(const SceneSpec& scene, const CameraPose& camera) {
  if (!camera.valid()) throw std::invalid_argument("render_ground_truth: bad camera");
  const auto& in = camera.intrinsics;
  RGBDFrame f;
  f.width = in.width;
  f.height = in.height;
  f.rgb.assign(static_cast<size_t>(in.width) * in.height, Vec3::Zero());
  f.depth.assign(static_cast<size_t>(in.width) * in.height, in.far_clip);
  f.instance_ids.assign(static_cast<size_t>(in.width) * in.height, -1);
  for (int v = 0; v < in.height; ++v) {
    for (int u = 0; u < in.width; ++u) {
      Ray ray = pixel_ray(camera, u, v);
      auto hit = intersect_scene(scene, ray, in.near_clip, in.far_clip);
      if (!hit) continue;
      f.rgb_at(u, v) = shade(hit->color, hit->normal);
      f.depth_at(u, v) = hit->t;
      f.id_at(u, v) = hit->id;
    }
  }
  return f;
}

double floor_coverage(const SceneSpec& scene, const std::vector<CameraPose>& views,
                      int grid) {
  double half = scene.floor_half_extent;
  int covered = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      double x = -half + (2 * half) * (i + 0.5) / grid;
      double z = -half + (2 * half) * (j + 0.5) / grid;
      for (const auto& cam : views) {
        if (ground_point_in_view(cam, x, z, 0.0)) {
          ++covered;
          break;
        }
      }
    }
  }
  return static_cast<double>(covered) / (grid * grid);
}

}  // namespace ocs
