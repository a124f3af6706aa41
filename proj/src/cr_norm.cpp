#include "rpareto/cr_norm.hpp"

#include <cmath>

#include "rpareto/errors.hpp"
#include "rpareto/fft.hpp"

namespace rpareto {

int noise_bank_dim(const SiteSet& sites) {
  int m_total = 1;
  for (int a = 0; a < sites.dim(); ++a) {
    const int n = sites.side_counts[a];
    m_total *= (n == 1) ? 1 : next_pow2(2 * (n - 1));
  }
  return 2 * m_total + sites.dim();
}

NoiseBank draw_noise_bank(int n_rows, int dim, RngStream& rng) {
  NoiseBank bank;
  bank.rows.resize(n_rows, dim);
  for (int i = 0; i < n_rows; ++i)
    for (int j = 0; j < dim; ++j) bank.rows(i, j) = rng.normal();
  return bank;
}

void append_noise_rows(NoiseBank& bank, int extra, RngStream& rng) {
  const int old_rows = bank.n_rows();
  bank.rows.conservativeResize(old_rows + extra, Eigen::NoChange);
  for (int i = old_rows; i < old_rows + extra; ++i)
    for (int j = 0; j < bank.dim(); ++j) bank.rows(i, j) = rng.normal();
}

FbfSampler bank_sampler(const SiteSet& sites, const VariogramParams& params) {
  return FbfSampler(sites, params, FbfSampler::Path::Auto, /*max_doublings=*/0);
}

namespace {

struct MomentAccumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return sum / n; }
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq - n * m * m) / (n - 1));
  }
};

CrEstimate finalize(const MomentAccumulator& acc) {
  if (!(acc.mean() > 0.0))
    throw numeric_error("c_r estimation: all r(w)^alpha vanished; cannot take log");
  CrEstimate est;
  est.log_value = std::log(acc.mean());
  est.n_used = acc.n;
  est.variance_heuristic = acc.variance() / (double(acc.n) * acc.mean() * acc.mean());
  return est;
}

MomentAccumulator accumulate_tilt_moments(const ModelParams& params,
                                          const RiskSpec& spec,
                                          const SiteSet& sites,
                                          const FbfSampler& sampler,
                                          const NoiseBank& noise, int n_rows) {
  // Same arithmetic as spectral_from_gaussian, with the per-site
  // semivariogram hoisted out of the per-row loop (it dominates the cost
  // of large banks otherwise).
  const int n = sites.n_fine();
  const int s0 = sites.s0_fine();
  std::vector<double> gamma(n);
  for (int i = 0; i < n; ++i)
    gamma[i] = semivariogram_dist(distance(sites.fine_sites[i], sites.s0()),
                                  params.variogram);
  std::vector<double> field, w(n);
  MomentAccumulator acc;
  for (int i = 0; i < n_rows; ++i) {
    sampler.transform(std::span<const double>(noise.rows.row(i).data(), noise.dim()), field);
    const double g0 = field[s0];
    for (int k = 0; k < n; ++k)
      w[k] = std::exp((field[k] - g0 - gamma[k]) / params.alpha);
    w[s0] = 1.0;
    acc.add(std::pow(risk_of_fine_field(spec, sites, w), params.alpha));
  }
  return acc;
}

}  // namespace

CrEstimate estimate_log_cr(const ModelParams& params, const RiskSpec& spec,
                           const SiteSet& sites, const NoiseBank& noise) {
  if (noise.n_rows() < 1) throw usage_error("c_r estimation: empty noise bank");
  params.validate();
  const FbfSampler sampler = bank_sampler(sites, params.variogram);
  CrEstimate est = finalize(
      accumulate_tilt_moments(params, spec, sites, sampler, noise, noise.n_rows()));
  est.accuracy_ok = noise.accuracy_ok;
  return est;
}

std::pair<CrEstimate, CrEstimate> coupled_log_cr(const ModelParams& old_params,
                                                 const ModelParams& prop_params,
                                                 const RiskSpec& spec,
                                                 const SiteSet& sites,
                                                 const NoiseBank& noise) {
  return {estimate_log_cr(old_params, spec, sites, noise),
          estimate_log_cr(prop_params, spec, sites, noise)};
}

NoiseBank dynamic_n(const ModelParams& params, const RiskSpec& spec,
                    const SiteSet& sites, double q, int n_min, int n_max,
                    RngStream& rng) {
  if (!(q > 0.0)) throw usage_error("dynamic_n: accuracy target must be positive");
  if (n_min < 1 || n_min > n_max) throw usage_error("dynamic_n: need 1 <= n_min <= n_max");
  params.validate();

  const FbfSampler sampler = bank_sampler(sites, params.variogram);
  NoiseBank bank = draw_noise_bank(n_min, noise_bank_dim(sites), rng);
  for (;;) {
    const MomentAccumulator acc = accumulate_tilt_moments(
        params, spec, sites, sampler, bank, bank.n_rows());
    if (acc.mean() > 0.0) {
      // Plug-in version of the accuracy inequality:
      // (1/c) * sqrt(Var(r(W)^alpha) / n) < q.
      const double sd = std::sqrt(acc.variance() / acc.n) / acc.mean();
      if (sd < q) return bank;
    }
    if (bank.n_rows() >= n_max) {
      bank.accuracy_ok = false;
      return bank;
    }
    const int extra = std::min(bank.n_rows(), n_max - bank.n_rows());
    append_noise_rows(bank, extra, rng);
  }
}

}  // namespace rpareto
