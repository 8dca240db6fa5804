#include <doctest.h>

#include "ocs/latents.hpp"

using namespace ocs;
using ad::Array;
using ad::Var;

namespace {

LatentParams random_params(Rng& rng, double scale = 1.0) {
  auto fill = [&](Eigen::Index n, double s) {
    Array a(1, n);
    for (Eigen::Index i = 0; i < n; ++i) a(0, i) = s * rng.normal();
    return Var::constant(std::move(a));
  };
  LatentParams p;
  p.mu_what = fill(kWhatDim, scale);
  p.log_sigma_what = fill(kWhatDim, 0.5 * scale);
  p.mu_where = fill(3, 2.0 * scale);
  p.log_sigma_where = fill(3, 0.5 * scale);
  p.logit_pres = fill(1, 2.0 * scale);
  return p;
}

}  // namespace

TEST_CASE("degenerate distribution collapses to the mean") {
  Rng rng(1);
  LatentParams p = LatentParams::zeros();
  p.mu_what = Var::constant(Array::Constant(1, kWhatDim, 0.7));
  p.log_sigma_what = Var::constant(Array::Constant(1, kWhatDim, -20.0));
  Array mw(1, 3);
  mw << 1.0, -2.0, 0.3;
  p.mu_where = Var::constant(mw);
  p.log_sigma_where = Var::constant(Array::Constant(1, 3, -20.0));
  p.logit_pres = Var::constant(Array::Constant(1, 1, 20.0));
  auto z = sample_latent(p, 0.5, SampleMode::hard, rng);
  CHECK((z.z_what.value() - p.mu_what.value()).abs().maxCoeff() < 1e-6);
  CHECK((z.z_where.value() - p.mu_where.value()).abs().maxCoeff() < 1e-6);
  CHECK(z.z_pres.scalar() == 1.0);
}

TEST_CASE("presence tie at p = 0.5 resolves to present") {
  Rng rng(2);
  LatentParams p = LatentParams::zeros();
  auto z = sample_latent(p, 0.5, SampleMode::hard, rng);
  CHECK(z.z_pres.scalar() == 1.0);
}

TEST_CASE("relaxed presence matches the Bernoulli rate") {
  Rng rng(3);
  LatentParams p = LatentParams::zeros();
  p.logit_pres = Var::constant(Array::Constant(1, 1, 1.0));
  int on = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    auto z = sample_latent(p, 0.5, SampleMode::relaxed, rng);
    double v = z.z_pres.scalar();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
    if (v > 0.5) ++on;
  }
  double sig = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(static_cast<double>(on) / n == doctest::Approx(sig).epsilon(0.015));
}

TEST_CASE("sample_latent rejects non-finite params") {
  Rng rng(4);
  LatentParams p = LatentParams::zeros();
  p.mu_what = Var::constant(Array::Constant(1, kWhatDim, std::nan("")));
  CHECK_THROWS_AS(sample_latent(p, 0.5, SampleMode::relaxed, rng),
                  std::invalid_argument);
}

TEST_CASE("kl of identical params is zero") {
  Rng rng(5);
  auto p = random_params(rng);
  CHECK(kl_divergence(p, p).scalar() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gaussian kl closed form and Monte Carlo agree") {
  // 1-D: mu_q=1, mu_p=0, sigma=1 -> 0.5; embed in the what part
  LatentParams q = LatentParams::zeros(1);
  LatentParams p = LatentParams::zeros(1);
  q.mu_what = Var::constant(Array::Constant(1, 1, 1.0));
  double kl = kl_divergence(q, p).scalar();
  CHECK(kl == doctest::Approx(0.5).epsilon(1e-12));

  // MC estimate of E_q[log q - log p] over the same 1-D gaussian
  Rng rng(6);
  double acc = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = 1.0 + rng.normal();
    double logq = -0.5 * (x - 1.0) * (x - 1.0);
    double logp = -0.5 * x * x;
    acc += logq - logp;
  }
  CHECK(acc / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("bernoulli kl of matching near-degenerate logits is about zero") {
  LatentParams q = LatentParams::zeros(1);
  LatentParams p = LatentParams::zeros(1);
  q.logit_pres = Var::constant(Array::Constant(1, 1, 20.0));
  p.logit_pres = Var::constant(Array::Constant(1, 1, 20.0));
  CHECK(kl_divergence(q, p).scalar() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("kl is non-negative over random parameter pairs") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    auto q = random_params(rng);
    auto p = random_params(rng);
    CHECK(kl_divergence(q, p).scalar() >= -1e-12);
  }
}

TEST_CASE("reparameterized path: dE[z]/dmu is 1 by finite differences") {
  // same seed on both sides keeps the noise fixed
  double h = 1e-4;
  auto run = [&](double mu) {
    Rng rng(8);
    LatentParams p = LatentParams::zeros(1);
    p.mu_what = Var::constant(Array::Constant(1, 1, mu));
    double acc = 0;
    for (int i = 0; i < 64; ++i)
      acc += sample_latent(p, 0.5, SampleMode::relaxed, rng).z_what.scalar();
    return acc / 64;
  };
  double deriv = (run(0.3 + h) - run(0.3 - h)) / (2 * h);
  CHECK(deriv == doctest::Approx(1.0).epsilon(1e-4));

  // and the autodiff gradient through a sample agrees
  Rng rng(9);
  LatentParams p = LatentParams::zeros(1);
  p.mu_what = Var::param(Array::Constant(1, 1, 0.3));
  auto z = sample_latent(p, 0.5, SampleMode::relaxed, rng);
  ad::backward(ad::sum(z.z_what));
  CHECK(p.mu_what.grad()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("flatten round trip") {
  Rng rng(10);
  auto p = random_params(rng);
  auto q = LatentParams::unflatten(p.flatten());
  CHECK((q.mu_what.value() - p.mu_what.value()).abs().maxCoeff() == 0.0);
  CHECK((q.log_sigma_where.value() - p.log_sigma_where.value()).abs().maxCoeff() == 0.0);
  CHECK(q.logit_pres.scalar() == p.logit_pres.scalar());

  auto v = p.flat_values();
  CHECK(static_cast<int>(v.size()) == LatentParams::flat_size());
  auto r = LatentParams::from_flat_values(v);
  CHECK(r.mu_where.value()(0, 1) == p.mu_where.value()(0, 1));
}

TEST_CASE("where transform matches the geometry reference and round trips") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    auto p = random_params(rng);
    GroundPose cam{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi)};
    auto q = p.transformed(cam, FrameDir::to_camera);
    GroundPose w{p.mu_where.value()(0, 0), p.mu_where.value()(0, 1),
                 p.mu_where.value()(0, 2)};
    auto ref = transform_where(w, cam, FrameDir::to_camera);
    CHECK(q.mu_where.value()(0, 0) == doctest::Approx(ref.x).epsilon(1e-12));
    CHECK(q.mu_where.value()(0, 1) == doctest::Approx(ref.z).epsilon(1e-12));
    CHECK(wrap_angle(q.mu_where.value()(0, 2) - ref.yaw) ==
          doctest::Approx(0.0).epsilon(1e-12));
    auto back = q.transformed(cam, FrameDir::to_global);
    CHECK(std::abs(back.mu_where.value()(0, 0) - p.mu_where.value()(0, 0)) < 1e-9);
    CHECK(std::abs(back.mu_where.value()(0, 1) - p.mu_where.value()(0, 1)) < 1e-9);
    CHECK(std::abs(wrap_angle(back.mu_where.value()(0, 2) - p.mu_where.value()(0, 2))) < 1e-9);
  }
}

TEST_CASE("gradients flow through the where transform") {
  LatentParams p = LatentParams::zeros();
  Array mw(1, 3);
  mw << 1.0, 2.0, 0.5;
  p.mu_where = Var::param(mw);
  GroundPose cam{3.0, -1.0, 0.8};
  auto q = p.transformed(cam, FrameDir::to_camera);
  ad::backward(ad::sum(q.mu_where));
  // columns of the jacobian sum: rotation columns sum to cos+sin terms, yaw to 1
  double c = std::cos(cam.yaw), s = std::sin(cam.yaw);
  CHECK(p.mu_where.grad()(0, 0) == doctest::Approx(c + s));
  CHECK(p.mu_where.grad()(0, 1) == doctest::Approx(c - s));
  CHECK(p.mu_where.grad()(0, 2) == doctest::Approx(1.0));
}
