#include "ocs/geometry.hpp"

namespace ocs {

bool CameraPose::valid() const {
  const auto& in = intrinsics;
  return in.width > 0 && in.height > 0 && in.focal_px > 0 &&
         in.near_clip > 0 && in.far_clip > in.near_clip &&
         pitch > -kPi / 2 && pitch <= 0 && position.allFinite();
}

Eigen::Matrix3d CameraPose::rotation() const {
  double cy = std::cos(yaw), sy = std::sin(yaw);
  double cp = std::cos(pitch), sp = std::sin(pitch);
  Eigen::Matrix3d ry, rx;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rx << 1, 0, 0, 0, cp, -sp, 0, sp, cp;
  return ry * rx;
}

Ray subpixel_ray(const CameraPose& cam, double u, double v) {
  const auto& in = cam.intrinsics;
  Vec3 d_cam((u - in.width / 2.0) / in.focal_px,
             -(v - in.height / 2.0) / in.focal_px, -1.0);
  Vec3 d = cam.rotation() * d_cam;
  return Ray{cam.position, d.normalized()};
}

Ray pixel_ray(const CameraPose& cam, int u, int v) {
  return subpixel_ray(cam, u + 0.5, v + 0.5);
}

bool project(const CameraPose& cam, const Vec3& p, double& u, double& v, double& t) {
  Vec3 d = cam.rotation().transpose() * (p - cam.position);
  if (d.z() >= 0.0) return false;  // behind or at the camera plane
  const auto& in = cam.intrinsics;
  u = in.width / 2.0 + in.focal_px * (d.x() / -d.z());
  v = in.height / 2.0 - in.focal_px * (d.y() / -d.z());
  t = d.norm();
  return true;
}

GroundPose camera_ground_pose(const CameraPose& cam) {
  return GroundPose{cam.position.x(), cam.position.z(), cam.yaw};
}

GroundPose transform_where(const GroundPose& w, const GroundPose& cam, FrameDir dir) {
  double c = std::cos(cam.yaw), s = std::sin(cam.yaw);
  if (dir == FrameDir::to_camera) {
    double dx = w.x - cam.x, dz = w.z - cam.z;
    // RotY(-yaw): x' = c x - s z, z' = s x + c z
    return GroundPose{c * dx - s * dz, s * dx + c * dz, wrap_angle(w.yaw - cam.yaw)};
  }
  // RotY(+yaw): x' = c x + s z, z' = -s x + c z
  return GroundPose{c * w.x + s * w.z + cam.x, -s * w.x + c * w.z + cam.z,
                    wrap_angle(w.yaw + cam.yaw)};
}

Vec3 to_ground_frame(const Vec3& p, const GroundPose& cam) {
  double c = std::cos(cam.yaw), s = std::sin(cam.yaw);
  double dx = p.x() - cam.x, dz = p.z() - cam.z;
  return Vec3(c * dx - s * dz, p.y(), s * dx + c * dz);
}

Vec3 from_ground_frame(const Vec3& p, const GroundPose& cam) {
  double c = std::cos(cam.yaw), s = std::sin(cam.yaw);
  return Vec3(c * p.x() + s * p.z() + cam.x, p.y(), -s * p.x() + c * p.z() + cam.z);
}

std::array<Eigen::Vector4d, 4> frustum_side_planes(const CameraPose& cam) {
  const auto& in = cam.intrinsics;
  double hx = in.width / 2.0 / in.focal_px;   // half-extent on the z=-1 plane
  double hy = in.height / 2.0 / in.focal_px;
  // inward normals in camera space (camera looks along -z)
  std::array<Vec3, 4> n_cam = {
      Vec3(1, 0, -hx).normalized(),   // cuts off u < 0
      Vec3(-1, 0, -hx).normalized(),  // cuts off u > W
      Vec3(0, -1, -hy).normalized(),  // cuts off v < 0
      Vec3(0, 1, -hy).normalized(),   // cuts off v > H
  };
  Eigen::Matrix3d r = cam.rotation();
  std::array<Eigen::Vector4d, 4> planes;
  for (int i = 0; i < 4; ++i) {
    Vec3 n = r * n_cam[i];
    planes[i] << n.x(), n.y(), n.z(), -n.dot(cam.position);
  }
  return planes;
}

bool ground_point_in_view(const CameraPose& cam, double x, double z, double margin) {
  Vec3 p(x, 0.0, z);
  for (const auto& pl : frustum_side_planes(cam)) {
    double d = pl.head<3>().dot(p) + pl(3);
    if (d < -margin) return false;
  }
  double t = (p - cam.position).norm();
  const auto& in = cam.intrinsics;
  return t >= in.near_clip - margin && t <= in.far_clip + margin;
}

}  // namespace ocs
