// The presence-augmented per-object latent: appearance (what), ground-plane
// pose (where), and a Bernoulli presence gate, with isotropic-Gaussian /
// Bernoulli variational parameters. Parameters are autodiff handles so
// gradients can flow through sampling, KL, and the registry round trip.

#pragma once

#include "ocs/ad.hpp"
#include "ocs/common.hpp"
#include "ocs/geometry.hpp"

#include <vector>

namespace ocs {

inline constexpr int kWhatDim = 32;
inline constexpr double kPresenceEps = 1e-6;

struct LatentParams {
  ad::Var mu_what;          // 1 x d
  ad::Var log_sigma_what;   // 1 x d
  ad::Var mu_where;         // 1 x 3: (x, z, yaw) in the owning frame
  ad::Var log_sigma_where;  // 1 x 3
  ad::Var logit_pres;       // 1 x 1

  static LatentParams zeros(int what_dim = kWhatDim);
  LatentParams detached() const;
  bool finite() const;
  double presence_prob() const;  // sigmoid of the logit value

  // flat layout: [mu_what, log_sigma_what, mu_where, log_sigma_where, logit_pres]
  static int flat_size(int what_dim = kWhatDim) { return 2 * what_dim + 7; }
  ad::Var flatten() const;
  static LatentParams unflatten(const ad::Var& flat, int what_dim = kWhatDim);
  std::vector<double> flat_values() const;
  static LatentParams from_flat_values(const std::vector<double>& v, int what_dim = kWhatDim);

  // ground-plane rigid transform of the where part; the yaw component is
  // wrapped by a value-level constant shift, so gradients pass through
  LatentParams transformed(const GroundPose& cam_ground, FrameDir dir) const;
};

struct AugmentedLatent {
  ad::Var z_what;   // 1 x d
  ad::Var z_where;  // 1 x 3
  ad::Var z_pres;   // 1 x 1, in [0,1]
};

enum class SampleMode { relaxed, hard };

// reparameterized sample; relaxed mode keeps the graph differentiable
AugmentedLatent sample_latent(const LatentParams& params, double temperature,
                              SampleMode mode, Rng& rng);

// closed-form diagonal-Gaussian KL for what/where plus Bernoulli KL on the
// presence probabilities
ad::Var kl_divergence(const LatentParams& posterior, const LatentParams& prior);

// learnable global variational prior shared by all padded slots
struct GlobalPrior {
  LatentParams params;
  static GlobalPrior make_default(int what_dim = kWhatDim);
  std::vector<ad::Var> parameters() const;
};

// learnable prior for fresh layout tiles (appearance only; the pose is the
// tile center and presence is fixed)
struct LayoutPrior {
  ad::Var mu_what;
  ad::Var log_sigma_what;
  static LayoutPrior make_default(int what_dim = kWhatDim);
  std::vector<ad::Var> parameters() const;
};

}  // namespace ocs
