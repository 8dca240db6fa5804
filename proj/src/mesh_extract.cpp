#include "ocs/ocnerf.hpp"

#include <fstream>
#include <unordered_map>

namespace ocs {

namespace {

// cube corners numbered by coordinate bits (x + 2y + 4z)
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};

// six tetrahedra sharing the 0-7 diagonal; face diagonals match between
// neighboring cubes, which keeps the extracted surface watertight
constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7},
                             {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7}};

struct EdgeKey {
  std::int64_t a, b;
  bool operator==(const EdgeKey&) const = default;
};

struct EdgeKeyHash {
  size_t operator()(const EdgeKey& k) const {
    return std::hash<std::int64_t>()(k.a * 0x9e3779b97f4a7c15LL ^ k.b);
  }
};

}  // namespace

Mesh extract_isosurface(std::span<const double> grid_values, Vec3 lo, Vec3 hi,
                        int res, double iso) {
  const int n = res + 1;
  auto value_at = [&](int ix, int iy, int iz) {
    return grid_values[(static_cast<size_t>(ix) * n + iy) * n + iz];
  };
  auto point_at = [&](int ix, int iy, int iz) {
    return Vec3(lo.x() + (hi.x() - lo.x()) * ix / res,
                lo.y() + (hi.y() - lo.y()) * iy / res,
                lo.z() + (hi.z() - lo.z()) * iz / res);
  };
  auto lattice_id = [&](int ix, int iy, int iz) {
    return (static_cast<std::int64_t>(ix) * n + iy) * n + iz;
  };

  Mesh mesh;
  std::unordered_map<EdgeKey, int, EdgeKeyHash> edge_vertex;
  auto edge_point = [&](std::int64_t ia, double va, const Vec3& pa, std::int64_t ib,
                        double vb, const Vec3& pb) {
    EdgeKey key = ia < ib ? EdgeKey{ia, ib} : EdgeKey{ib, ia};
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    double t = (iso - va) / (vb - va);
    t = std::clamp(t, 0.0, 1.0);
    int idx = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    edge_vertex.emplace(key, idx);
    return idx;
  };

  std::int64_t ids[8];
  double vals[8];
  Vec3 pts[8];
  for (int ix = 0; ix < res; ++ix)
    for (int iy = 0; iy < res; ++iy)
      for (int iz = 0; iz < res; ++iz) {
        bool any = false, all = true;
        for (int c = 0; c < 8; ++c) {
          int cx = ix + kCorner[c][0], cy = iy + kCorner[c][1], cz = iz + kCorner[c][2];
          ids[c] = lattice_id(cx, cy, cz);
          vals[c] = value_at(cx, cy, cz);
          pts[c] = point_at(cx, cy, cz);
          if (vals[c] > iso) any = true;
          else all = false;
        }
        if (!any || all) continue;
        for (const auto& tet : kTets) {
          int above[4], below[4];
          int na = 0, nb = 0;
          for (int k = 0; k < 4; ++k) {
            if (vals[tet[k]] > iso) above[na++] = tet[k];
            else below[nb++] = tet[k];
          }
          if (na == 0 || na == 4) continue;
          auto ep = [&](int i, int j) {
            return edge_point(ids[i], vals[i], pts[i], ids[j], vals[j], pts[j]);
          };
          if (na == 1) {
            mesh.triangles.push_back(
                {ep(above[0], below[0]), ep(above[0], below[1]), ep(above[0], below[2])});
          } else if (na == 3) {
            mesh.triangles.push_back(
                {ep(below[0], above[0]), ep(below[0], above[1]), ep(below[0], above[2])});
          } else {  // two above, two below: quad split into two triangles
            int v00 = ep(above[0], below[0]), v01 = ep(above[0], below[1]);
            int v10 = ep(above[1], below[0]), v11 = ep(above[1], below[1]);
            mesh.triangles.push_back({v00, v01, v11});
            mesh.triangles.push_back({v00, v11, v10});
          }
        }
      }
  return mesh;
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write mesh " + path.string());
  for (const auto& v : mesh.vertices)
    f << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : mesh.triangles)
    f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

namespace {

bool inside_object(const ObjectSpec& obj, const Vec3& local) {
  switch (obj.shape) {
    case Shape::box:
      return std::abs(local.x()) <= obj.size.x() && local.y() >= 0 &&
             local.y() <= obj.size.y() && std::abs(local.z()) <= obj.size.z();
    case Shape::sphere:
      return (local - Vec3(0, obj.size.x(), 0)).squaredNorm() <=
             obj.size.x() * obj.size.x();
    case Shape::cylinder:
      return local.y() >= 0 && local.y() <= obj.size.y() &&
             local.x() * local.x() + local.z() * local.z() <= obj.size.x() * obj.size.x();
    case Shape::cone: {
      if (local.y() < 0 || local.y() > obj.size.y()) return false;
      double r = obj.size.x() * (1.0 - local.y() / obj.size.y());
      return local.x() * local.x() + local.z() * local.z() <= r * r;
    }
  }
  return false;
}

}  // namespace

Mesh object_reference_mesh(const ObjectSpec& obj, int res) {
  double r = obj.bounding_radius() + 0.1;
  Vec3 lo(-r, -0.1, -r), hi(r, obj.height() + 0.1, r);
  const int n = res + 1;
  std::vector<double> grid(static_cast<size_t>(n) * n * n);
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz) {
        Vec3 p(lo.x() + (hi.x() - lo.x()) * ix / res,
               lo.y() + (hi.y() - lo.y()) * iy / res,
               lo.z() + (hi.z() - lo.z()) * iz / res);
        grid[(static_cast<size_t>(ix) * n + iy) * n + iz] =
            inside_object(obj, p) ? 1.0 : 0.0;
      }
  Mesh local = extract_isosurface(grid, lo, hi, res, 0.5);
  GroundPose pose{obj.x, obj.z, obj.yaw};
  for (auto& v : local.vertices) v = from_ground_frame(v, pose);
  return local;
}

}  // namespace ocs
