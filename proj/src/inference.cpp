#include "rpareto/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "rpareto/errors.hpp"

namespace rpareto {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_observation(const Observation& o, int n_coarse) {
  if (int(o.xs.size()) != n_coarse || o.present.size() != o.xs.size())
    throw usage_error("observation: value vector does not match the coarse sites");
  if (!(o.x0 > 0.0)) throw usage_error("observation: x0 must be positive");
  for (size_t k = 0; k < o.xs.size(); ++k)
    if (o.present[k] && !(o.xs[k] > 0.0))
      throw usage_error("observation: non-missing values must be positive");
}
}  // namespace

std::vector<int> Observation::present_ids() const {
  std::vector<int> ids;
  for (size_t k = 0; k < xs.size(); ++k)
    if (present[k]) ids.push_back(int(k) + 1);
  return ids;
}

double PriorSpec::log_density(const ModelParams& p) const {
  // Density in the chain coordinates (log c, beta, log alpha).
  if (!(p.variogram.beta > 0.0) || p.variogram.beta >= 2.0) {
    if (p.variogram.beta != 2.0) return kNegInf;
  }
  if (!(p.variogram.c > 0.0) || !(p.alpha > 0.0)) return kNegInf;
  auto log_normal_pdf = [](double x, double m, double sd) {
    const double z = (x - m) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
  };
  return log_normal_pdf(std::log(p.variogram.c), log_c_mean, log_c_sd) +
         log_normal_pdf(std::log(p.alpha), log_alpha_mean, log_alpha_sd) +
         std::log(0.5);
}

ModelParams propose(const ModelParams& cur, const ProposalSpec& spec, RngStream& rng) {
  ModelParams prop = cur;
  prop.variogram.c = std::exp(std::log(cur.variogram.c) + spec.log_c_sd * rng.normal());
  prop.alpha = std::exp(std::log(cur.alpha) + spec.log_alpha_sd * rng.normal());
  double b = cur.variogram.beta +
             spec.beta_halfwidth * (2.0 * rng.uniform() - 1.0);
  if (spec.boundary == BetaBoundary::Reflect) {
    while (b < 0.0 || b > 2.0) {
      if (b < 0.0) b = -b;
      if (b > 2.0) b = 4.0 - b;
    }
    b = std::clamp(b, 1e-9, 2.0);  // the endpoints have probability zero
  } else {
    b = std::clamp(b, 1e-6, 2.0);
  }
  prop.variogram.beta = b;
  return prop;
}

CoarseLogGaussianDensity::CoarseLogGaussianDensity(const ModelParams& params,
                                                   const SiteSet& sites,
                                                   const std::vector<int>& coarse_ids) {
  params.validate();
  const int n = int(coarse_ids.size());
  if (n == 0) throw usage_error("spectral density: empty site subset");
  const double a2 = params.alpha * params.alpha;
  mean_.resize(n);
  Eigen::MatrixXd cov(n, n);
  std::vector<double> gamma0(n);
  for (int i = 0; i < n; ++i) {
    const Coord& si = sites.coarse_site(coarse_ids[i]);
    gamma0[i] = semivariogram_dist(distance(si, sites.s0()), params.variogram);
    mean_(i) = -gamma0[i] / params.alpha;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double gij = semivariogram_dist(
          distance(sites.coarse_site(coarse_ids[i]), sites.coarse_site(coarse_ids[j])),
          params.variogram);
      cov(i, j) = cov(j, i) = (gamma0[i] + gamma0[j] - gij) / a2;
    }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw numeric_error("spectral density: singular coarse covariance");
  chol_ = llt.matrixL();
  double log_det = 0.0;
  for (int i = 0; i < n; ++i) log_det += std::log(chol_(i, i));
  log_norm_ = -0.5 * n * std::log(2.0 * M_PI) - log_det;
}

double CoarseLogGaussianDensity::log_density(std::span<const double> ratios) const {
  const int n = int(mean_.size());
  if (int(ratios.size()) != n)
    throw usage_error("spectral density: ratio vector length mismatch");
  Eigen::VectorXd y(n);
  double log_jacobian = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(ratios[i] > 0.0)) throw usage_error("spectral density: ratios must be positive");
    y(i) = std::log(ratios[i]);
    log_jacobian -= y(i);
  }
  const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(y - mean_);
  return log_norm_ - 0.5 * z.squaredNorm() + log_jacobian;
}

double log_spectral_density(const std::vector<double>& xs_ratio,
                            const ModelParams& params, const SiteSet& sites) {
  std::vector<int> ids(sites.n_coarse());
  for (int k = 0; k < sites.n_coarse(); ++k) ids[k] = k + 1;
  return CoarseLogGaussianDensity(params, sites, ids).log_density(xs_ratio);
}

double log_intensity_density(double x0_over_u, double r_of_ratio, double alpha) {
  if (!(r_of_ratio > 0.0)) throw usage_error("intensity density: r(w) must be positive");
  if (!(x0_over_u * r_of_ratio > 1.0)) return kNegInf;
  return std::log(alpha) - alpha * std::log(r_of_ratio) -
         (alpha + 1.0) * std::log(x0_over_u);
}

namespace {

// Shared per-exceedance posterior term of Eq-(9) shape:
// log alpha - log c_r - (alpha+1) log(x0/u) + log f_{W(s)}(ratios).
// Both posteriors compose their terms through this function so that the
// fully-observed reduction is an exact identity.
class PosteriorTermEvaluator {
 public:
  PosteriorTermEvaluator(const ModelParams& params, const SiteSet& sites,
                         double u, const CrEstimate& cr)
      : params_(params), sites_(sites), u_(u), cr_(cr) {}

  double term(const Observation& o) {
    const auto ids = o.present_ids();
    if (ids.empty()) throw numeric_error("posterior: exceedance with no observed coarse values");
    std::vector<double> ratios(ids.size());
    for (size_t k = 0; k < ids.size(); ++k) ratios[k] = o.xs[ids[k] - 1] / o.x0;
    auto it = cache_.find(ids);
    if (it == cache_.end())
      it = cache_.emplace(ids, CoarseLogGaussianDensity(params_, sites_, ids)).first;
    double t = std::log(params_.alpha) - cr_.log_value;
    t += -(params_.alpha + 1.0) * std::log(o.x0 / u_);
    t += it->second.log_density(ratios);
    return t;
  }

 private:
  ModelParams params_;
  const SiteSet& sites_;
  double u_;
  CrEstimate cr_;
  std::map<std::vector<int>, CoarseLogGaussianDensity> cache_;
};

ExceedanceSet observable_exceedances(const std::vector<Observation>& obs,
                                     double u, const RiskSpec& spec) {
  ExceedanceSet ex;
  ex.u = u;
  for (size_t i = 0; i < obs.size(); ++i) {
    const auto ids = obs[i].present_ids();
    std::vector<double> ratios(ids.size());
    for (size_t k = 0; k < ids.size(); ++k) ratios[k] = obs[i].xs[ids[k] - 1] / obs[i].x0;
    const double r = obs[i].x0 * evaluate_prepended(spec, ratios);
    ex.risk_values.push_back(r);
    if (r > u) ex.indices.push_back(int(i));
  }
  return ex;
}

}  // namespace

double log_posterior_observable(const ModelParams& params,
                                const std::vector<Observation>& obs, double u,
                                const RiskSpec& spec, const PriorSpec& prior,
                                const SiteSet& sites, const CrEstimate& cr) {
  if (spec.target != RiskSpec::Target::Coarse)
    throw usage_error("observable posterior: the risk functional must be observable (coarse target)");
  if (!(u > 0.0)) throw usage_error("posterior: threshold must be positive");
  for (const auto& o : obs) validate_observation(o, sites.n_coarse());

  const double lp = prior.log_density(params);
  if (lp == kNegInf) return kNegInf;
  const ExceedanceSet ex = observable_exceedances(obs, u, spec);
  PosteriorTermEvaluator eval(params, sites, u, cr);
  double total = lp;
  for (int i : ex.indices) total += eval.term(obs[i]);
  return total;
}

CondXSampler::CondXSampler(const Observation& obs, const ModelParams& params,
                           const SiteSet& sites) {
  params.validate();
  validate_observation(obs, sites.n_coarse());
  const int n = sites.n_fine();
  const double a = params.alpha;
  const double a2 = a * a;

  // Law of log W on the fine grid.
  Eigen::VectorXd mean(n);
  Eigen::MatrixXd cov(n, n);
  std::vector<double> gamma0(n);
  for (int i = 0; i < n; ++i) {
    gamma0[i] = semivariogram_dist(distance(sites.fine_sites[i], sites.s0()),
                                   params.variogram);
    mean(i) = -gamma0[i] / a;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double gij = semivariogram_dist(
          distance(sites.fine_sites[i], sites.fine_sites[j]), params.variogram);
      cov(i, j) = cov(j, i) = (gamma0[i] + gamma0[j] - gij) / a2;
    }

  base_w_.assign(n, 0.0);
  base_w_[sites.s0_fine()] = 1.0;
  std::vector<int> cond_idx{sites.s0_fine()};
  std::vector<double> cond_val{0.0};
  for (size_t k = 0; k < obs.xs.size(); ++k) {
    if (!obs.present[k]) continue;
    const int fine = sites.coarse_in_fine[k + 1];
    const double ratio = obs.xs[k] / obs.x0;
    cond_idx.push_back(fine);
    cond_val.push_back(std::log(ratio));
    base_w_[fine] = ratio;  // exact data ratio, not exp(log(ratio))
  }
  cond_ = condition_gaussian(mean, cov, cond_idx, cond_val);
  open_latent_ = cond_.latent_indices;
}

void CondXSampler::draw_w(RngStream& rng, std::vector<double>& w) const {
  noise_.resize(cond_.noise_dim());
  for (double& v : noise_) v = rng.normal();
  cond_.transform(noise_, h_);
  w = base_w_;
  for (int i : open_latent_) w[i] = std::exp(h_[i]);
}

double cond_x(const Observation& obs, const ModelParams& params,
              const RiskSpec& spec, const SiteSet& sites, int n_steps,
              RngStream& rng, std::vector<double>* warm) {
  const CondXSampler sampler(obs, params, sites);
  std::vector<double> w, w_prop;
  if (warm != nullptr && int(warm->size()) == sites.n_fine()) {
    w = *warm;
  } else {
    sampler.draw_w(rng, w);
  }
  double r = risk_of_fine_field(spec, sites, w);
  for (int step = 0; step < n_steps; ++step) {
    sampler.draw_w(rng, w_prop);
    const double r_prop = risk_of_fine_field(spec, sites, w_prop);
    bool accept = r_prop >= r;
    if (!accept) accept = rng.uniform() < std::pow(r_prop / r, params.alpha);
    if (accept) {
      w.swap(w_prop);
      r = r_prop;
    }
  }
  if (warm != nullptr) *warm = w;
  return obs.x0 * r;
}

ExceedanceSet classify_exceedances(const std::vector<Observation>& obs,
                                   const ModelParams& params, const RiskSpec& spec,
                                   const SiteSet& sites, double u, int n_condx,
                                   RngStream& rng,
                                   std::vector<std::vector<double>>* warm) {
  if (warm != nullptr && warm->size() != obs.size()) warm->resize(obs.size());
  ExceedanceSet ex;
  ex.u = u;
  for (size_t i = 0; i < obs.size(); ++i) {
    RngStream obs_rng = rng.fork(i);
    std::vector<double>* w = (warm != nullptr) ? &(*warm)[i] : nullptr;
    const double r = cond_x(obs[i], params, spec, sites, n_condx, obs_rng, w);
    ex.risk_values.push_back(r);
    if (r > u) ex.indices.push_back(int(i));  // ties excluded
  }
  return ex;
}

double exceedance_probability(const Observation& obs, const ModelParams& params,
                              const RiskSpec& spec, const SiteSet& sites, double u,
                              int n_draws, RngStream& rng) {
  if (n_draws < 1) throw usage_error("exceedance probability: need n_draws >= 1");
  const CondXSampler sampler(obs, params, sites);
  std::vector<double> w;
  int count = 0;
  for (int i = 0; i < n_draws; ++i) {
    sampler.draw_w(rng, w);
    if (obs.x0 * risk_of_fine_field(spec, sites, w) > u) ++count;
  }
  return double(count) / double(n_draws);
}

double log_posterior_latent(const ModelParams& params,
                            const std::vector<Observation>& obs,
                            const std::vector<int>& exceed_idx, double u,
                            const PriorSpec& prior, const SiteSet& sites,
                            const CrEstimate& cr, const std::vector<double>& log_d) {
  if (!(u > 0.0)) throw usage_error("posterior: threshold must be positive");
  if (log_d.size() != exceed_idx.size())
    throw usage_error("latent posterior: log_d must align with the exceedance set");
  const double lp = prior.log_density(params);
  if (lp == kNegInf) return kNegInf;
  PosteriorTermEvaluator eval(params, sites, u, cr);
  double total = lp;
  for (size_t k = 0; k < exceed_idx.size(); ++k) {
    double t = eval.term(obs[exceed_idx[k]]);
    t += log_d[k];
    total += t;
  }
  return total;
}

namespace {

// Stream tags shared by both chains so that the fully-observed reduction
// walks through identical proposal / acceptance / noise-bank draws.
enum StreamTag : std::uint64_t {
  kProposal = 1,
  kAccept = 2,
  kBank = 3,
  kCondX = 4,
  kExceedProb = 5,
};

bool mh_decide(double log_ratio, RngStream& acc_rng) {
  const double v = acc_rng.uniform();
  if (log_ratio >= 0.0) return true;
  if (log_ratio == kNegInf) return false;
  return std::log(v) < log_ratio;
}

}  // namespace

std::vector<ChainState> run_observable_chain(
    const std::vector<Observation>& obs, double u, const RiskSpec& spec,
    const SiteSet& sites, const PriorSpec& prior, const ProposalSpec& proposal,
    const ChainSettings& settings, const ModelParams& start,
    const RngStream& master, ChainDiagnostics* diag) {
  if (settings.n_mcmc < 1) throw usage_error("chain: n_mcmc must be >= 1");
  start.validate();
  RngStream prop_rng = master.fork(kProposal);
  RngStream acc_rng = master.fork(kAccept);
  RngStream bank_rng = master.fork(kBank);

  const ExceedanceSet ex = observable_exceedances(obs, u, spec);
  ChainDiagnostics local;
  std::vector<ChainState> chain;
  chain.reserve(settings.n_mcmc + 1);

  {
    RngStream b0 = bank_rng.fork(0);
    NoiseBank bank = dynamic_n(start, spec, sites, settings.q, settings.n_min,
                               settings.n_max, b0);
    if (!bank.accuracy_ok) ++local.cr_flagged;
    const CrEstimate cr = estimate_log_cr(start, spec, sites, bank);
    const double lp = log_posterior_observable(start, obs, u, spec, prior, sites, cr);
    chain.push_back({start, lp, int(ex.indices.size()), true});
  }

  for (int iter = 1; iter <= settings.n_mcmc; ++iter) {
    const ModelParams cur = chain.back().params;
    RngStream it_prop = prop_rng.fork(iter);
    const ModelParams prop = propose(cur, proposal, it_prop);

    RngStream it_bank = bank_rng.fork(iter);
    NoiseBank bank = dynamic_n(cur, spec, sites, settings.q, settings.n_min,
                               settings.n_max, it_bank);
    if (!bank.accuracy_ok) ++local.cr_flagged;
    const auto [cr_cur, cr_prop] = coupled_log_cr(cur, prop, spec, sites, bank);

    const double lp_cur = log_posterior_observable(cur, obs, u, spec, prior, sites, cr_cur);
    const double lp_prop = log_posterior_observable(prop, obs, u, spec, prior, sites, cr_prop);

    RngStream it_acc = acc_rng.fork(iter);
    const bool accepted = mh_decide(lp_prop - lp_cur, it_acc);
    if (accepted) ++local.accepted_steps;
    chain.push_back({accepted ? prop : cur, accepted ? lp_prop : lp_cur,
                     int(ex.indices.size()), accepted});
  }
  if (diag != nullptr) *diag = local;
  return chain;
}

std::vector<ChainState> run_latent_chain(
    const std::vector<Observation>& obs, double u, const RiskSpec& spec,
    const SiteSet& sites, const PriorSpec& prior, const ProposalSpec& proposal,
    const ChainSettings& settings, const ModelParams& start,
    const RngStream& master, ChainDiagnostics* diag) {
  if (settings.n_mcmc < 1) throw usage_error("chain: n_mcmc must be >= 1");
  start.validate();
  for (const auto& o : obs) validate_observation(o, sites.n_coarse());
  RngStream prop_rng = master.fork(kProposal);
  RngStream acc_rng = master.fork(kAccept);
  RngStream bank_rng = master.fork(kBank);
  RngStream condx_rng = master.fork(kCondX);
  RngStream d_rng = master.fork(kExceedProb);

  ChainDiagnostics local;
  std::vector<std::vector<double>> warm(obs.size());
  std::vector<ChainState> chain;
  chain.reserve(settings.n_mcmc + 1);

  auto estimate_log_d = [&](const std::vector<int>& idx, const ModelParams& p,
                            RngStream base, int which) {
    std::vector<double> out(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) {
      RngStream r = base.fork(2 * k + which);
      const double d = exceedance_probability(obs[idx[k]], p, spec, sites, u,
                                              settings.n_cond_gauss, r);
      if (d == 0.0) ++local.d_underflows;
      out[k] = std::log(d);
    }
    return out;
  };

  {
    RngStream cx0 = condx_rng.fork(0);
    const ExceedanceSet ex = classify_exceedances(obs, start, spec, sites, u,
                                                  settings.n_condx, cx0, &warm);
    RngStream b0 = bank_rng.fork(0);
    NoiseBank bank = dynamic_n(start, spec, sites, settings.q, settings.n_min,
                               settings.n_max, b0);
    if (!bank.accuracy_ok) ++local.cr_flagged;
    const CrEstimate cr = estimate_log_cr(start, spec, sites, bank);
    const auto log_d = estimate_log_d(ex.indices, start, d_rng.fork(0), 0);
    const double lp =
        log_posterior_latent(start, obs, ex.indices, u, prior, sites, cr, log_d);
    chain.push_back({start, lp, int(ex.indices.size()), true});
  }

  for (int iter = 1; iter <= settings.n_mcmc; ++iter) {
    const ModelParams cur = chain.back().params;

    // Step 1: re-classify the exceedances under the current parameters.
    RngStream it_condx = condx_rng.fork(iter);
    const ExceedanceSet ex = classify_exceedances(obs, cur, spec, sites, u,
                                                  settings.n_condx, it_condx, &warm);

    // Step 2: propose.
    RngStream it_prop = prop_rng.fork(iter);
    const ModelParams prop = propose(cur, proposal, it_prop);

    // Step 3: both posteriors under the same fixed I(u) and coupled noise.
    RngStream it_bank = bank_rng.fork(iter);
    NoiseBank bank = dynamic_n(cur, spec, sites, settings.q, settings.n_min,
                               settings.n_max, it_bank);
    if (!bank.accuracy_ok) ++local.cr_flagged;
    const auto [cr_cur, cr_prop] = coupled_log_cr(cur, prop, spec, sites, bank);

    RngStream it_d = d_rng.fork(iter);
    const auto log_d_cur = estimate_log_d(ex.indices, cur, it_d, 0);
    const auto log_d_prop = estimate_log_d(ex.indices, prop, it_d, 1);

    const double lp_cur =
        log_posterior_latent(cur, obs, ex.indices, u, prior, sites, cr_cur, log_d_cur);
    const double lp_prop =
        log_posterior_latent(prop, obs, ex.indices, u, prior, sites, cr_prop, log_d_prop);

    // Step 4: accept / reject.
    RngStream it_acc = acc_rng.fork(iter);
    const bool accepted = mh_decide(lp_prop - lp_cur, it_acc);
    if (accepted) ++local.accepted_steps;
    chain.push_back({accepted ? prop : cur, accepted ? lp_prop : lp_cur,
                     int(ex.indices.size()), accepted});
  }
  if (diag != nullptr) *diag = local;
  return chain;
}

}  // namespace rpareto
