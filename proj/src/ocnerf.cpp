#include "ocs/ocnerf.hpp"

#include <cmath>
#include <stdexcept>

namespace ocs {

using ad::Array;
using ad::Var;

int encoded_dim(int octaves) { return 3 + 3 * 2 * octaves; }

Var positional_encoding(const Var& points, int octaves) {
  std::vector<Var> parts = {points};
  double freq = 1.0;
  for (int j = 0; j < octaves; ++j, freq *= 2.0) {
    parts.push_back(ad::sin(points * freq));
    parts.push_back(ad::cos(points * freq));
  }
  return ad::concat_cols(parts);
}

ObjectDecoder::ObjectDecoder(const NerfConfig& config, Rng& rng)
    : what_dim(config.what_dim), pe_octaves(config.pe_octaves) {
  std::vector<int> hidden(static_cast<size_t>(config.hidden_layers),
                          config.hidden_width);
  net = Mlp(encoded_dim(config.pe_octaves) + config.what_dim, hidden, 4, rng);
}

std::pair<Var, Var> ObjectDecoder::decode(const Var& points_local,
                                          const Var& z_what) const {
  Eigen::Index n = points_local.rows();
  std::vector<Var> parts = {positional_encoding(points_local, pe_octaves),
                            ad::tile_rows(z_what, n)};
  Var out = ad::sigmoid(net.forward(ad::concat_cols(parts)));
  return {ad::slice_cols(out, 0, 1), ad::slice_cols(out, 1, 3)};
}

ParamSet ObjectDecoder::params(const std::string& name) const {
  return net.params(name);
}

ObjectDecoder ObjectDecoder::clone() const {
  ObjectDecoder copy;
  copy.what_dim = what_dim;
  copy.pe_octaves = pe_octaves;
  for (const auto& layer : net.layers) {
    Linear l;
    l.w = Var::param(layer.w.value());
    l.b = Var::param(layer.b.value());
    copy.net.layers.push_back(std::move(l));
  }
  return copy;
}

Decoders::Decoders(const NerfConfig& config, Rng& rng)
    : object(config, rng), layout(config, rng) {}

ParamSet Decoders::params() const {
  ParamSet p;
  p.extend("decoder", object.params("object"));
  p.extend("decoder", layout.params("layout"));
  return p;
}

Eigen::Matrix4d object_transform(const GroundPose& w) {
  double c = std::cos(w.yaw), s = std::sin(w.yaw);
  Eigen::Matrix4d rot = Eigen::Matrix4d::Identity();
  // RotY(-yaw)
  rot(0, 0) = c;
  rot(0, 2) = -s;
  rot(2, 0) = s;
  rot(2, 2) = c;
  Eigen::Matrix4d trans = Eigen::Matrix4d::Identity();
  trans(0, 3) = -w.x;
  trans(2, 3) = -w.z;
  return rot * trans;
}

Var transform_points_to_local(const Var& points, const Var& z_where) {
  Var ox = ad::slice_cols(z_where, 0, 1);
  Var oz = ad::slice_cols(z_where, 1, 1);
  Var yaw = ad::slice_cols(z_where, 2, 1);
  Var c = ad::cos(yaw), s = ad::sin(yaw);
  Var dx = ad::slice_cols(points, 0, 1) - ox;
  Var dy = ad::slice_cols(points, 1, 1);
  Var dz = ad::slice_cols(points, 2, 1) - oz;
  std::vector<Var> out = {c * dx - s * dz, dy, s * dx + c * dz};
  return ad::concat_cols(out);
}

Var weighted_log_density(const Var& sigma_tilde, const Var& points_local,
                         const Var& z_pres, double sigma_g) {
  Var log_wg = ad::sum_rows(ad::square(points_local)) * (-0.5 / (sigma_g * sigma_g));
  return ad::log(sigma_tilde) + (log_wg - ad::stop_grad(log_wg)) + ad::log(z_pres);
}

Var weighted_sigma_hat(const Var& sigma_tilde, const Var& points_local,
                       const Var& z_pres, double sigma_g) {
  Var log_wg = ad::sum_rows(ad::square(points_local)) * (-0.5 / (sigma_g * sigma_g));
  return sigma_tilde * ad::exp(log_wg - ad::stop_grad(log_wg)) * z_pres;
}

ComposedBatch compose(const Var& sigma_hats, const Var& colors_stacked,
                      const NerfConfig& config) {
  Eigen::Index n_comp = sigma_hats.cols();
  ComposedBatch out;
  Var denom = ad::max_with(ad::sum_rows(sigma_hats), config.eps_floor);
  out.weights = ad::square(sigma_hats) / denom;
  out.mix = sigma_hats / denom;
  out.sigma = ad::sum_rows(out.weights) * config.sigma_max;
  Var color;
  for (Eigen::Index k = 0; k < n_comp; ++k) {
    Var term = ad::slice_cols(out.mix, k, 1) * ad::slice_cols(colors_stacked, 3 * k, 3);
    color = k == 0 ? term : color + term;
  }
  out.color = color;
  return out;
}

namespace {

// per-component sigma_hat / color stacks at a point batch
struct ComponentEval {
  Var sigma_hats;      // n x (K+1)
  Var colors_stacked;  // n x 3(K+1)
};

ComponentEval evaluate_components(const SlotContext& ctx, const Var& points,
                                  const NerfConfig& config) {
  const Eigen::Index n = points.rows();
  const size_t K = ctx.slots.size();
  std::vector<Var> sigma_cols, color_blocks;
  sigma_cols.reserve(K + 1);
  color_blocks.reserve(K + 1);

  // layout component (index 0): always present
  {
    Var local = transform_points_to_local(points, ctx.layout.z_where);
    auto [sig, col] = ctx.layout_decoder().decode(local, ctx.layout.z_what);
    sigma_cols.push_back(sig * ctx.layout.z_pres);
    color_blocks.push_back(col);
  }

  bool shared = true;
  for (size_t k = 0; k < ctx.per_slot.size(); ++k)
    if (ctx.per_slot[k]) shared = false;

  if (shared && K > 0) {
    // one batched decoder pass over all slots
    std::vector<Var> locals(K), inputs(K);
    for (size_t k = 0; k < K; ++k) {
      locals[k] = transform_points_to_local(points, ctx.slots[k].z_where);
      std::vector<Var> parts = {
          positional_encoding(locals[k], ctx.decoders->object.pe_octaves),
          ad::tile_rows(ctx.slots[k].z_what, n)};
      inputs[k] = ad::concat_cols(parts);
    }
    Var big = ad::concat_rows(inputs);
    Var out = ad::sigmoid(ctx.decoders->object.net.forward(big));
    for (size_t k = 0; k < K; ++k) {
      Var rows = ad::slice_rows(out, static_cast<Eigen::Index>(k) * n, n);
      Var sig = ad::slice_cols(rows, 0, 1);
      Var col = ad::slice_cols(rows, 1, 3);
      sigma_cols.push_back(
          weighted_sigma_hat(sig, locals[k], ctx.slots[k].z_pres, config.sigma_g));
      color_blocks.push_back(col);
    }
  } else {
    for (size_t k = 0; k < K; ++k) {
      Var local = transform_points_to_local(points, ctx.slots[k].z_where);
      auto [sig, col] = ctx.object_decoder(k).decode(local, ctx.slots[k].z_what);
      sigma_cols.push_back(
          weighted_sigma_hat(sig, local, ctx.slots[k].z_pres, config.sigma_g));
      color_blocks.push_back(col);
    }
  }
  return {ad::concat_cols(sigma_cols), ad::concat_cols(color_blocks)};
}

}  // namespace

ComposedBatch evaluate_points(const SlotContext& ctx, const Var& points,
                              const NerfConfig& config) {
  auto comps = evaluate_components(ctx, points, config);
  return compose(comps.sigma_hats, comps.colors_stacked, config);
}

ComposedSample evaluate_point(const SlotContext& ctx, const Vec3& point,
                              const NerfConfig& config) {
  Array p(1, 3);
  p << point.x(), point.y(), point.z();
  auto batch = evaluate_points(ctx, Var::constant(p), config);
  ComposedSample out;
  out.sigma = batch.sigma.scalar();
  out.color = Vec3(batch.color.value()(0, 0), batch.color.value()(0, 1),
                   batch.color.value()(0, 2));
  out.weights = batch.weights.value().row(0).transpose();
  return out;
}

RayBatch make_ray_batch(const CameraPose& camera, const RGBDFrame& frame,
                        std::span<const int> pixel_indices) {
  const auto& in = camera.intrinsics;
  std::vector<int> all;
  if (pixel_indices.empty()) {
    all.resize(static_cast<size_t>(in.width) * in.height);
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    pixel_indices = all;
  }
  GroundPose gp = camera_ground_pose(camera);
  Eigen::Index n = static_cast<Eigen::Index>(pixel_indices.size());
  RayBatch batch;
  batch.origins.resize(n, 3);
  batch.dirs.resize(n, 3);
  batch.depths.resize(n, 1);
  batch.rgbs.resize(n, 3);
  batch.near = in.near_clip;
  batch.far = in.far_clip;
  Vec3 origin_gc = to_ground_frame(camera.position, gp);
  for (Eigen::Index i = 0; i < n; ++i) {
    int p = pixel_indices[static_cast<size_t>(i)];
    int u = p % in.width, v = p / in.width;
    Ray ray = pixel_ray(camera, u, v);
    Vec3 d = to_ground_frame(ray.origin + ray.dir, gp) - origin_gc;
    batch.origins.row(i) << origin_gc.x(), origin_gc.y(), origin_gc.z();
    batch.dirs.row(i) << d.x(), d.y(), d.z();
    batch.depths(i, 0) = frame.depth[static_cast<size_t>(p)];
    const Vec3& c = frame.rgb[static_cast<size_t>(p)];
    batch.rgbs.row(i) << c.x(), c.y(), c.z();
  }
  return batch;
}

TwoSampleResult two_sample_loglik(const SlotContext& ctx, const RayBatch& rays,
                                  const NerfConfig& config, Rng& rng) {
  const Eigen::Index n = rays.size();
  Array surface_pts = rays.origins + rays.dirs.colwise() * rays.depths.col(0);
  Array t_free(n, 1);
  for (Eigen::Index i = 0; i < n; ++i)
    t_free(i, 0) = rays.near + rng.uniform() * (rays.depths(i, 0) - rays.near);
  Array free_pts = rays.origins + rays.dirs.colwise() * t_free.col(0);
  Array opaque(n, 1);
  for (Eigen::Index i = 0; i < n; ++i)
    opaque(i, 0) = rays.depths(i, 0) < rays.far - 1e-9 ? 1.0 : 0.0;

  auto comps = evaluate_components(ctx, Var::constant(surface_pts), config);
  ComposedBatch surface = compose(comps.sigma_hats, comps.colors_stacked, config);
  ComposedBatch air = evaluate_points(ctx, Var::constant(free_pts), config);

  Var m = Var::constant(opaque);
  Var color_err = ad::sum_rows(ad::square(surface.color - Var::constant(rays.rgbs)));
  Var surface_term =
      m * (ad::log(surface.sigma + 1e-8) -
           color_err * (0.5 / (config.sigma_c * config.sigma_c)));
  Var free_term = Var::constant(Array(rays.depths - rays.near)) * air.sigma;

  TwoSampleResult out;
  out.per_ray = surface_term - free_term;
  out.total = ad::sum(out.per_ray);
  out.surface = surface;
  out.surface_sigma_hats = comps.sigma_hats;
  return out;
}

RenderOutput render(const SlotContext& ctx, const CameraPose& camera,
                    const NerfConfig& config, int n_samples) {
  if (n_samples < 2) throw std::invalid_argument("render: n_samples must be >= 2");
  const auto& in = camera.intrinsics;
  const int W = in.width, H = in.height;
  const Eigen::Index n_comp = static_cast<Eigen::Index>(ctx.slots.size()) + 1;
  const double near = in.near_clip, far = in.far_clip;
  const double delta = (far - near) / n_samples;

  RenderOutput out;
  out.width = W;
  out.height = H;
  out.rgb.assign(static_cast<size_t>(W) * H, Vec3::Zero());
  out.depth.assign(static_cast<size_t>(W) * H, far);
  out.segmentation = Array::Zero(static_cast<Eigen::Index>(W) * H, n_comp + 1);
  out.uncertainty.assign(static_cast<size_t>(W) * H, 0.0);

  GroundPose gp = camera_ground_pose(camera);
  Vec3 origin_gc = to_ground_frame(camera.position, gp);

  const int chunk = std::max(1, 8192 / n_samples);
  std::vector<double> ts(static_cast<size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) ts[static_cast<size_t>(i)] = near + (i + 0.5) * delta;

  for (int start = 0; start < W * H; start += chunk) {
    int count = std::min(chunk, W * H - start);
    Array pts(static_cast<Eigen::Index>(count) * n_samples, 3);
    for (int r = 0; r < count; ++r) {
      int p = start + r;
      Ray ray = pixel_ray(camera, p % W, p / W);
      Vec3 d = to_ground_frame(ray.origin + ray.dir, gp) - origin_gc;
      for (int i = 0; i < n_samples; ++i) {
        Vec3 x = origin_gc + ts[static_cast<size_t>(i)] * d;
        pts.row(static_cast<Eigen::Index>(r) * n_samples + i) << x.x(), x.y(), x.z();
      }
    }
    auto batch = evaluate_points(ctx, Var::constant(pts), config);
    const Array& sigma = batch.sigma.value();
    const Array& color = batch.color.value();
    const Array& weights = batch.weights.value();

    for (int r = 0; r < count; ++r) {
      int p = start + r;
      double T = 1.0;
      Vec3 rgb = Vec3::Zero();
      double depth = 0.0;
      Eigen::VectorXd seg = Eigen::VectorXd::Zero(n_comp + 1);
      for (int i = 0; i < n_samples; ++i) {
        Eigen::Index row = static_cast<Eigen::Index>(r) * n_samples + i;
        double alpha = 1.0 - std::exp(-sigma(row, 0) * delta);
        double w = T * alpha;
        if (w > 0) {
          rgb += w * Vec3(color(row, 0), color(row, 1), color(row, 2));
          depth += w * ts[static_cast<size_t>(i)];
          double wsum = weights.row(row).sum();
          if (wsum > 1e-12)
            seg.head(n_comp) += (w / wsum) * weights.row(row).transpose().matrix();
          else
            seg(n_comp) += w;
        }
        T *= 1.0 - alpha;
        if (T < 1e-8) break;
      }
      seg(n_comp) += T;
      depth += T * far;
      double s = seg.sum();
      if (s > 0) seg /= s;
      out.rgb[static_cast<size_t>(p)] = rgb;
      out.depth[static_cast<size_t>(p)] = depth;
      out.segmentation.row(p) = seg.transpose().array();
      double entropy = 0.0;
      for (Eigen::Index k = 0; k < seg.size(); ++k)
        if (seg(k) > 1e-12) entropy -= seg(k) * std::log(seg(k));
      out.uncertainty[static_cast<size_t>(p)] = entropy;
    }
  }
  return out;
}

Mesh extract_mesh(const ObjectDecoder& decoder, const Var& z_what,
                  const GroundPose& where_global, int res, double iso,
                  const MeshBounds& bounds) {
  const int n = res + 1;
  std::vector<double> grid(static_cast<size_t>(n) * n * n);
  const int chunk = 16384;
  std::vector<Eigen::Index> flat_ids;
  Array pts(chunk, 3);
  Eigen::Index filled = 0;
  Var z_const = ad::stop_grad(z_what);
  auto flush = [&] {
    if (filled == 0) return;
    Array sub = pts.topRows(filled);
    auto [sig, col] = decoder.decode(Var::constant(sub), z_const);
    for (Eigen::Index i = 0; i < filled; ++i)
      grid[static_cast<size_t>(flat_ids[static_cast<size_t>(i)])] = sig.value()(i, 0);
    flat_ids.clear();
    filled = 0;
  };
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz) {
        Vec3 p(bounds.lo.x() + (bounds.hi.x() - bounds.lo.x()) * ix / res,
               bounds.lo.y() + (bounds.hi.y() - bounds.lo.y()) * iy / res,
               bounds.lo.z() + (bounds.hi.z() - bounds.lo.z()) * iz / res);
        pts.row(filled) << p.x(), p.y(), p.z();
        flat_ids.push_back((static_cast<Eigen::Index>(ix) * n + iy) * n + iz);
        if (++filled == chunk) flush();
      }
  flush();
  Mesh mesh = extract_isosurface(grid, bounds.lo, bounds.hi, res, iso);
  for (auto& v : mesh.vertices) v = from_ground_frame(v, where_global);
  return mesh;
}

}  // namespace ocs
