#include "ocs/latents.hpp"

#include <stdexcept>

namespace ocs {

using ad::Array;
using ad::Var;

namespace {

Var row_constant(std::initializer_list<double> xs) {
  Array a(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) a(0, i++) = x;
  return Var::constant(std::move(a));
}

Var gaussian_noise(Eigen::Index n, Rng& rng) {
  Array a(1, n);
  for (Eigen::Index i = 0; i < n; ++i) a(0, i) = rng.normal();
  return Var::constant(std::move(a));
}

// KL( N(mq, sq) || N(mp, sp) ), summed over dims
Var gaussian_kl(const Var& mu_q, const Var& log_sigma_q, const Var& mu_p,
                const Var& log_sigma_p) {
  Var var_ratio = ad::exp(2.0 * (log_sigma_q - log_sigma_p));
  Var mean_term = ad::square(mu_q - mu_p) * ad::exp(-2.0 * log_sigma_p);
  return 0.5 * ad::sum(var_ratio + mean_term - 1.0 + 2.0 * (log_sigma_p - log_sigma_q));
}

Var bernoulli_kl(const Var& logit_q, const Var& logit_p) {
  Var pq = ad::clamp(ad::sigmoid(logit_q), kPresenceEps, 1.0 - kPresenceEps);
  Var pp = ad::clamp(ad::sigmoid(logit_p), kPresenceEps, 1.0 - kPresenceEps);
  return ad::sum(pq * (ad::log(pq) - ad::log(pp)) +
                 (1.0 - pq) * (ad::log(1.0 - pq) - ad::log(1.0 - pp)));
}

}  // namespace

LatentParams LatentParams::zeros(int what_dim) {
  LatentParams p;
  p.mu_what = Var::constant(Array::Zero(1, what_dim));
  p.log_sigma_what = Var::constant(Array::Zero(1, what_dim));
  p.mu_where = Var::constant(Array::Zero(1, 3));
  p.log_sigma_where = Var::constant(Array::Zero(1, 3));
  p.logit_pres = Var::constant(Array::Zero(1, 1));
  return p;
}

LatentParams LatentParams::detached() const {
  LatentParams p;
  p.mu_what = ad::stop_grad(mu_what);
  p.log_sigma_what = ad::stop_grad(log_sigma_what);
  p.mu_where = ad::stop_grad(mu_where);
  p.log_sigma_where = ad::stop_grad(log_sigma_where);
  p.logit_pres = ad::stop_grad(logit_pres);
  return p;
}

bool LatentParams::finite() const {
  return mu_what.value().allFinite() && log_sigma_what.value().allFinite() &&
         mu_where.value().allFinite() && log_sigma_where.value().allFinite() &&
         logit_pres.value().allFinite();
}

double LatentParams::presence_prob() const {
  return 1.0 / (1.0 + std::exp(-logit_pres.scalar()));
}

Var LatentParams::flatten() const {
  std::vector<Var> parts = {mu_what, log_sigma_what, mu_where, log_sigma_where,
                            logit_pres};
  return ad::concat_cols(parts);
}

LatentParams LatentParams::unflatten(const Var& flat, int what_dim) {
  if (flat.cols() != flat_size(what_dim))
    throw std::invalid_argument("LatentParams: bad flat size");
  LatentParams p;
  p.mu_what = ad::slice_cols(flat, 0, what_dim);
  p.log_sigma_what = ad::slice_cols(flat, what_dim, what_dim);
  p.mu_where = ad::slice_cols(flat, 2 * what_dim, 3);
  p.log_sigma_where = ad::slice_cols(flat, 2 * what_dim + 3, 3);
  p.logit_pres = ad::slice_cols(flat, 2 * what_dim + 6, 1);
  return p;
}

std::vector<double> LatentParams::flat_values() const {
  Array flat = flatten().value();
  return std::vector<double>(flat.data(), flat.data() + flat.size());
}

LatentParams LatentParams::from_flat_values(const std::vector<double>& v, int what_dim) {
  Array a(1, static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) a(0, static_cast<Eigen::Index>(i)) = v[i];
  return unflatten(Var::constant(std::move(a)), what_dim);
}

LatentParams LatentParams::transformed(const GroundPose& cam, FrameDir dir) const {
  double c = std::cos(cam.yaw), s = std::sin(cam.yaw);
  Var x = ad::slice_cols(mu_where, 0, 1);
  Var z = ad::slice_cols(mu_where, 1, 1);
  Var yaw = ad::slice_cols(mu_where, 2, 1);
  Var nx, nz, nyaw;
  if (dir == FrameDir::to_camera) {
    nx = c * (x - cam.x) - s * (z - cam.z);
    nz = s * (x - cam.x) + c * (z - cam.z);
    nyaw = yaw - cam.yaw;
  } else {
    nx = c * x + s * z + cam.x;
    nz = -1.0 * s * x + c * z + cam.z;
    nyaw = yaw + cam.yaw;
  }
  // wrap by a constant shift so the gradient is untouched
  double shift = wrap_angle(nyaw.scalar()) - nyaw.scalar();
  nyaw = nyaw + shift;
  LatentParams out = *this;
  std::vector<Var> parts = {nx, nz, nyaw};
  out.mu_where = ad::concat_cols(parts);
  return out;
}

AugmentedLatent sample_latent(const LatentParams& params, double temperature,
                              SampleMode mode, Rng& rng) {
  if (!params.finite()) throw std::invalid_argument("sample_latent: non-finite params");
  if (mode == SampleMode::relaxed && temperature <= 0)
    throw std::invalid_argument("sample_latent: temperature must be positive");

  AugmentedLatent z;
  z.z_what = params.mu_what +
             ad::exp(params.log_sigma_what) * gaussian_noise(params.mu_what.cols(), rng);
  z.z_where = params.mu_where +
              ad::exp(params.log_sigma_where) * gaussian_noise(3, rng);
  if (mode == SampleMode::hard) {
    // tie at p = 0.5 resolves to present
    z.z_pres = Var::constant(params.presence_prob() >= 0.5 ? 1.0 : 0.0);
    if (params.logit_pres.requires_grad()) {
      // keep hard sampling usable inside graphs: straight-through constant
      z.z_pres = z.z_pres + 0.0 * params.logit_pres;
    }
  } else {
    double u = std::min(std::max(rng.uniform(), 1e-12), 1.0 - 1e-12);
    double logistic = std::log(u) - std::log(1.0 - u);
    z.z_pres = ad::sigmoid((params.logit_pres + logistic) / temperature);
  }
  return z;
}

Var kl_divergence(const LatentParams& posterior, const LatentParams& prior) {
  if (!posterior.finite() || !prior.finite())
    throw std::invalid_argument("kl_divergence: non-finite params");
  return gaussian_kl(posterior.mu_what, posterior.log_sigma_what, prior.mu_what,
                     prior.log_sigma_what) +
         gaussian_kl(posterior.mu_where, posterior.log_sigma_where, prior.mu_where,
                     prior.log_sigma_where) +
         bernoulli_kl(posterior.logit_pres, prior.logit_pres);
}

GlobalPrior GlobalPrior::make_default(int what_dim) {
  GlobalPrior prior;
  prior.params.mu_what = Var::param(Array::Zero(1, what_dim));
  prior.params.log_sigma_what = Var::param(Array::Zero(1, what_dim));
  Array mu_where(1, 3);
  mu_where << 0.0, -4.0, 0.0;  // ahead of the camera (view axis is -z)
  prior.params.mu_where = Var::param(std::move(mu_where));
  prior.params.log_sigma_where = Var::param(Array::Constant(1, 3, std::log(2.0)));
  prior.params.logit_pres = Var::param(Array::Zero(1, 1));
  return prior;
}

std::vector<Var> GlobalPrior::parameters() const {
  return {params.mu_what, params.log_sigma_what, params.mu_where,
          params.log_sigma_where, params.logit_pres};
}

LayoutPrior LayoutPrior::make_default(int what_dim) {
  LayoutPrior prior;
  prior.mu_what = Var::param(Array::Zero(1, what_dim));
  prior.log_sigma_what = Var::param(Array::Zero(1, what_dim));
  return prior;
}

std::vector<Var> LayoutPrior::parameters() const {
  return {mu_what, log_sigma_what};
}

}  // namespace ocs
