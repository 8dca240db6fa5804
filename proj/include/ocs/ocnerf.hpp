// Object-compositional radiance field: per-object local-frame decoding with
// Gaussian-weighted densities, squared-share composition, the two-sample
// depth-informed ray likelihood used for training, dense emission-absorption
// rendering for evaluation, and marching-cubes mesh extraction.
//
// All field evaluation happens in the camera's gravity-aligned ground frame
// (see geometry.hpp); component index 0 is always the scene layout.

#pragma once

#include "ocs/latents.hpp"
#include "ocs/nets.hpp"
#include "ocs/scene_sim.hpp"

#include <array>
#include <span>

namespace ocs {

struct NerfConfig {
  double sigma_max = 10.0;  // density per scene unit at full opacity
  double sigma_g = 1.0;     // gaussian position-weighting scale
  double sigma_c = 0.1;     // color likelihood scale
  double eps_floor = 1e-8;  // density-sum floor in the composition
  int pe_octaves = 6;
  int hidden_width = 128;
  int hidden_layers = 4;
  int what_dim = kWhatDim;
};

// conditioned decoder: (encoded local point, z_what) -> raw density + color
struct ObjectDecoder {
  Mlp net;
  int what_dim = 0;
  int pe_octaves = 0;

  ObjectDecoder() = default;
  ObjectDecoder(const NerfConfig& config, Rng& rng);
  // points: n x 3 local coordinates; z_what: 1 x d
  std::pair<ad::Var, ad::Var> decode(const ad::Var& points_local,
                                     const ad::Var& z_what) const;
  ParamSet params(const std::string& name) const;
  ObjectDecoder clone() const;  // independent parameter copy
};

struct Decoders {
  ObjectDecoder object;  // shared by all object slots
  ObjectDecoder layout;  // separate instance for the layout component

  Decoders() = default;
  Decoders(const NerfConfig& config, Rng& rng);
  ParamSet params() const;
};

// sin/cos positional encoding with raw coordinates prepended
ad::Var positional_encoding(const ad::Var& points, int octaves);
int encoded_dim(int octaves);

// rigid map from the camera ground frame into the component's local frame:
// translate by -(x, 0, z), then rotate by -yaw about the vertical axis
Eigen::Matrix4d object_transform(const GroundPose& z_where);
ad::Var transform_points_to_local(const ad::Var& points, const ad::Var& z_where);

// log sigma_hat = log sigma_tilde + log w_g - SG(log w_g) + log z_pres.
// The value equals log(sigma_tilde * z_pres); the gradient w.r.t. the
// component pose carries the pull-toward-center term.
ad::Var weighted_log_density(const ad::Var& sigma_tilde, const ad::Var& points_local,
                             const ad::Var& z_pres, double sigma_g);
// multiplicative form, safe at z_pres = 0
ad::Var weighted_sigma_hat(const ad::Var& sigma_tilde, const ad::Var& points_local,
                           const ad::Var& z_pres, double sigma_g);

struct ComposedBatch {
  ad::Var sigma;    // n x 1, in [0, sigma_max]
  ad::Var color;    // n x 3
  ad::Var weights;  // n x (K+1) normalized densities, column 0 = layout
  ad::Var mix;      // n x (K+1) linear color-mixture shares (the e-step posterior)
};

ComposedBatch compose(const ad::Var& sigma_hats, const ad::Var& colors_stacked,
                      const NerfConfig& config);

// single-point convenience view of a composition
struct ComposedSample {
  double sigma = 0.0;
  Vec3 color = Vec3::Zero();
  Eigen::VectorXd weights;
};

// slots paired with their decoders; a null decoder entry means "use shared"
struct SlotContext {
  std::span<const AugmentedLatent> slots;
  AugmentedLatent layout;
  const Decoders* decoders = nullptr;
  std::vector<const ObjectDecoder*> per_slot;  // optional overrides, size K
  const ObjectDecoder* layout_override = nullptr;

  const ObjectDecoder& object_decoder(size_t slot) const {
    if (slot < per_slot.size() && per_slot[slot]) return *per_slot[slot];
    return decoders->object;
  }
  const ObjectDecoder& layout_decoder() const {
    return layout_override ? *layout_override : decoders->layout;
  }
};

// evaluates all components at points (n x 3, camera ground frame) and
// composes them
ComposedBatch evaluate_points(const SlotContext& ctx, const ad::Var& points,
                              const NerfConfig& config);
ComposedSample evaluate_point(const SlotContext& ctx, const Vec3& point,
                              const NerfConfig& config);

// rays in the camera ground frame with per-ray observations
struct RayBatch {
  ad::Array origins;  // n x 3
  ad::Array dirs;     // n x 3, unit
  ad::Array depths;   // n x 1, observed; == far for sky rays
  ad::Array rgbs;     // n x 3, observed
  double near = 0.0, far = 0.0;

  Eigen::Index size() const { return origins.rows(); }
};

// builds the ray batch for a pixel subset (empty = all pixels)
RayBatch make_ray_batch(const CameraPose& camera, const RGBDFrame& frame,
                        std::span<const int> pixel_indices);

struct TwoSampleResult {
  ad::Var total;        // scalar sum over rays
  ad::Var per_ray;      // n x 1
  ComposedBatch surface;  // composition at the observed-depth samples
  ad::Var surface_sigma_hats;  // n x (K+1), for masks/responsibilities
};

// log p estimated with one surface sample at the observed depth and one
// uniform free-space sample; sky rays keep only the free-space penalty.
TwoSampleResult two_sample_loglik(const SlotContext& ctx, const RayBatch& rays,
                                  const NerfConfig& config, Rng& rng);

struct RenderOutput {
  int width = 0, height = 0;
  std::vector<Vec3> rgb;
  std::vector<double> depth;
  ad::Array segmentation;  // (H*W) x (K+2): [layout, slots..., background]
  std::vector<double> uncertainty;  // entropy of the segmentation row
};

RenderOutput render(const SlotContext& ctx, const CameraPose& camera,
                    const NerfConfig& config, int n_samples);

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  bool empty() const { return triangles.empty(); }
};

void save_obj(const std::filesystem::path& path, const Mesh& mesh);

// Iso-surface of a scalar field sampled on a (res+1)^3 lattice over [lo, hi].
// Cubes are split into six face-consistent tetrahedra, so the surface is
// watertight across cube boundaries. Values are indexed (ix*(res+1)+iy)*(res+1)+iz.
Mesh extract_isosurface(std::span<const double> grid_values, Vec3 lo, Vec3 hi,
                        int resolution, double iso_level);

struct MeshBounds {
  Vec3 lo = Vec3(-2.5, -0.25, -2.5);
  Vec3 hi = Vec3(2.5, 3.0, 2.5);
};

// mesh of one component's own density (presence and weighting cancel to the
// raw decoder output), mapped to the global frame via the entry pose
Mesh extract_mesh(const ObjectDecoder& decoder, const ad::Var& z_what,
                  const GroundPose& where_global, int grid_resolution,
                  double iso_level, const MeshBounds& bounds = {});

// analytic ground-truth mesh of a scene object (for the metrics module)
Mesh object_reference_mesh(const ObjectSpec& obj, int resolution = 48);

}  // namespace ocs
