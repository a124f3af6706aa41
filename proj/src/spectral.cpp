#include "rpareto/spectral.hpp"

#include <cmath>

#include "rpareto/errors.hpp"

namespace rpareto {

void ModelParams::validate() const {
  variogram.validate();
  if (!(alpha > 0.0)) throw usage_error("model: alpha must be positive");
}

SpectralSample spectral_from_gaussian(const GaussianFieldSample& g,
                                      const SiteSet& sites,
                                      const ModelParams& params) {
  const int n = sites.n_fine();
  const int s0 = sites.s0_fine();
  const double g0 = g.values[s0];
  SpectralSample out;
  out.w.resize(n);
  for (int i = 0; i < n; ++i) {
    const double gamma = semivariogram_dist(
        distance(sites.fine_sites[i], sites.s0()), params.variogram);
    out.w[i] = std::exp((g.values[i] - g0 - gamma) / params.alpha);
  }
  out.w[s0] = 1.0;
  return out;
}

WTiltChain::WTiltChain(const SiteSet& sites, const ModelParams& params,
                       const RiskSpec& spec, RngStream& rng)
    : sites_(sites), params_(params), spec_(spec), sampler_(sites, params.variogram) {
  params.validate();
  // r(W) > 0 almost surely; resample on the measure-zero event r = 0.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    state_ = spectral_from_gaussian(sampler_.sample(rng), sites_, params_);
    risk_ = risk_of_fine_field(spec_, sites_, state_.w);
    if (risk_ > 0.0) return;
  }
  throw numeric_error("tilted chain: could not initialize with r(w) > 0");
}

void WTiltChain::step(RngStream& rng) {
  SpectralSample prop = spectral_from_gaussian(sampler_.sample(rng), sites_, params_);
  const double prop_risk = risk_of_fine_field(spec_, sites_, prop.w);
  bool accept = prop_risk >= risk_;
  if (!accept) {
    const double ratio = std::pow(prop_risk / risk_, params_.alpha);
    accept = rng.uniform() < ratio;
  }
  if (accept) {
    state_ = std::move(prop);
    risk_ = prop_risk;
  }
}

SpectralSample sample_w_r(const SiteSet& sites, const ModelParams& params,
                          const RiskSpec& spec, int n_steps, RngStream& rng) {
  if (n_steps < 1) throw usage_error("sample_w_r: n_steps must be >= 1");
  WTiltChain chain(sites, params, spec, rng);
  for (int i = 0; i < n_steps; ++i) chain.step(rng);
  return chain.state();
}

double sample_pareto(double alpha, RngStream& rng) {
  if (!(alpha > 0.0)) throw usage_error("pareto: alpha must be positive");
  return std::pow(rng.uniform_pos(), -1.0 / alpha);
}

std::vector<double> sample_r_pareto(const SiteSet& sites, const ModelParams& params,
                                    const RiskSpec& spec, int n_burn, RngStream& rng) {
  const SpectralSample w = sample_w_r(sites, params, spec, n_burn, rng);
  const double r = risk_of_fine_field(spec, sites, w.w);
  const double pareto = sample_pareto(params.alpha, rng);
  std::vector<double> out(w.w.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = pareto * w.w[i] / r;
  return out;
}

}  // namespace rpareto
