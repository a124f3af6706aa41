#ifndef RPARETO_SPECTRAL_HPP
#define RPARETO_SPECTRAL_HPP

#include <vector>

#include "rpareto/gauss_field.hpp"
#include "rpareto/geometry.hpp"
#include "rpareto/risk.hpp"
#include "rpareto/rng.hpp"

namespace rpareto {

struct ModelParams {
  VariogramParams variogram;
  double alpha = 1.0;
  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

// Brown-Resnick spectral sample on the fine grid; w[s0] == 1 exactly.
struct SpectralSample {
  std::vector<double> w;
};

// w(s) = exp((1/alpha) * (g(s) - g(s0) - gamma(s - s0))).
SpectralSample spectral_from_gaussian(const GaussianFieldSample& g,
                                      const SiteSet& sites,
                                      const ModelParams& params);

// MH chain targeting the r-tilted spectral law: independent proposals
// from W, acceptance min{ (r(w')/r(w))^alpha, 1 }.
class WTiltChain {
 public:
  WTiltChain(const SiteSet& sites, const ModelParams& params,
             const RiskSpec& spec, RngStream& rng);
  void step(RngStream& rng);
  const SpectralSample& state() const { return state_; }
  double risk() const { return risk_; }

 private:
  const SiteSet& sites_;
  ModelParams params_;
  RiskSpec spec_;
  FbfSampler sampler_;
  SpectralSample state_;
  double risk_ = 0.0;
};

SpectralSample sample_w_r(const SiteSet& sites, const ModelParams& params,
                          const RiskSpec& spec, int n_steps, RngStream& rng);

// Inverse-CDF alpha-Pareto draw, value >= 1.
double sample_pareto(double alpha, RngStream& rng);

// One r-Pareto realization on the fine grid: P_alpha * w / r(w).
std::vector<double> sample_r_pareto(const SiteSet& sites, const ModelParams& params,
                                    const RiskSpec& spec, int n_burn, RngStream& rng);

}  // namespace rpareto

#endif
