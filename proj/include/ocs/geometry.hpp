// Camera model and ground-plane pose math.
//
// World frame: y up, ground plane y = 0. Camera space is right-handed with
// x right, y up, z backward; the camera looks along -z. Camera-to-world
// rotation is RotY(yaw) * RotX(pitch) (gravity-aligned, roll-free).
// Pixel (u, v) maps to camera-space direction ((u+.5-W/2)/f, -(v+.5-H/2)/f, -1),
// normalized; depth is the Euclidean ray parameter t in (near, far].
//
// Ground poses (x, z, yaw) compose as 2-D rigid transforms; the camera's
// ground pose is its position projected to the floor plus its yaw.

#pragma once

#include "ocs/common.hpp"

#include <array>

namespace ocs {

struct Intrinsics {
  double focal_px = 0.0;  // same focal for x and y
  int width = 0;
  int height = 0;
  double near_clip = 0.0;
  double far_clip = 0.0;
};

struct CameraPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double pitch = 0.0;  // in (-pi/2, 0]
  Intrinsics intrinsics;

  bool valid() const;
  Eigen::Matrix3d rotation() const;  // camera -> world
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
};

// ray through the center of pixel (u, v)
Ray pixel_ray(const CameraPose& cam, int u, int v);
// ray through an arbitrary subpixel position (for supersampling oracles)
Ray subpixel_ray(const CameraPose& cam, double u, double v);

// world point -> (u, v, t); returns false when behind the camera
bool project(const CameraPose& cam, const Vec3& p, double& u, double& v, double& t);

// 2-D ground pose
struct GroundPose {
  double x = 0.0;
  double z = 0.0;
  double yaw = 0.0;
};

GroundPose camera_ground_pose(const CameraPose& cam);

enum class FrameDir { to_global, to_camera };

// rigid transform of an (x, z, yaw) triple between the global frame and the
// camera's gravity-aligned ground frame
GroundPose transform_where(const GroundPose& w, const GroundPose& cam_ground,
                           FrameDir dir);

// world point expressed in the camera's gravity-aligned ground frame
// (origin at the camera's floor projection, rotated by -yaw; y unchanged)
Vec3 to_ground_frame(const Vec3& p_world, const GroundPose& cam_ground);
Vec3 from_ground_frame(const Vec3& p_local, const GroundPose& cam_ground);

// Inward-facing side planes of the viewing frustum (left/right/top/bottom),
// through the camera center, in world coordinates. A point is inside the
// infinite pyramid iff all four signed distances are >= 0.
std::array<Eigen::Vector4d, 4> frustum_side_planes(const CameraPose& cam);

// Ground point (x, 0, z) visible by the frustum-pyramid/range test, with the
// point inflated by margin (plane-distance slack, Euclidean range slack).
bool ground_point_in_view(const CameraPose& cam, double x, double z, double margin);

}  // namespace ocs
