#ifndef RPARETO_INFERENCE_HPP
#define RPARETO_INFERENCE_HPP

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "rpareto/cr_norm.hpp"
#include "rpareto/gauss_field.hpp"
#include "rpareto/geometry.hpp"
#include "rpareto/risk.hpp"
#include "rpareto/rng.hpp"
#include "rpareto/spectral.hpp"

namespace rpareto {

struct Observation {
  int id = 0;
  double x0 = 0.0;             // value at s0, positive
  std::vector<double> xs;      // values at s1..sn
  std::vector<char> present;   // same length as xs; 0 marks missing

  std::vector<int> present_ids() const;  // coarse ids 1..n with data
};

struct PriorSpec {
  double log_c_mean = 0.0, log_c_sd = 1.5;
  double log_alpha_mean = 0.0, log_alpha_sd = 1.5;
  // beta is uniform on (0,2).
  double log_density(const ModelParams& p) const;
};

enum class BetaBoundary { Reflect, Clamp };

struct ProposalSpec {
  double log_c_sd = 0.1;
  double log_alpha_sd = 0.1;
  double beta_halfwidth = 0.1;
  BetaBoundary boundary = BetaBoundary::Reflect;
};

ModelParams propose(const ModelParams& cur, const ProposalSpec& spec, RngStream& rng);

struct ChainState {
  ModelParams params;
  double log_posterior = 0.0;
  int exceedance_count = 0;
  bool accepted = false;
};

struct ExceedanceSet {
  double u = 0.0;
  std::vector<int> indices;          // observation positions with r(X_i) > u
  std::vector<double> risk_values;   // r(X_i) for every observation
};

// Log-Gaussian density of W at the coarse sites (or a subset of them,
// for observations with missing entries): log W(s_i) is multivariate
// normal with mean -gamma(s_i - s0)/alpha and covariance
// (gamma_i0 + gamma_j0 - gamma_ij) / alpha^2.
class CoarseLogGaussianDensity {
 public:
  CoarseLogGaussianDensity(const ModelParams& params, const SiteSet& sites,
                           const std::vector<int>& coarse_ids);
  double log_density(std::span<const double> ratios) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd chol_;
  double log_norm_ = 0.0;
};

double log_spectral_density(const std::vector<double>& xs_ratio,
                            const ModelParams& params, const SiteSet& sites);

// log of the conditional intensity density: -inf when x * r(w) <= 1.
double log_intensity_density(double x0_over_u, double r_of_ratio, double alpha);

double log_posterior_observable(const ModelParams& params,
                                const std::vector<Observation>& obs, double u,
                                const RiskSpec& spec, const PriorSpec& prior,
                                const SiteSet& sites, const CrEstimate& cr);

// Conditional log-Gaussian law of the fine-grid spectral field given one
// observation (conditioning on s0 and the present coarse values).
// Conditioned entries of the produced field carry the exact data ratios.
class CondXSampler {
 public:
  CondXSampler(const Observation& obs, const ModelParams& params,
               const SiteSet& sites);
  void draw_w(RngStream& rng, std::vector<double>& w) const;
  int n_latent() const { return cond_.noise_dim(); }

 private:
  ConditionalGaussian cond_;
  std::vector<double> base_w_;
  std::vector<int> open_latent_;  // latent indices with nonzero variance
  mutable std::vector<double> noise_, h_;
};

// Inner MH chain of the tilted conditional field; returns r(X_i) =
// x0 * r(w_final). warm, when non-null and non-empty, is the chain's
// starting field and receives the final one.
double cond_x(const Observation& obs, const ModelParams& params,
              const RiskSpec& spec, const SiteSet& sites, int n_steps,
              RngStream& rng, std::vector<double>* warm = nullptr);

ExceedanceSet classify_exceedances(const std::vector<Observation>& obs,
                                   const ModelParams& params, const RiskSpec& spec,
                                   const SiteSet& sites, double u, int n_condx,
                                   RngStream& rng,
                                   std::vector<std::vector<double>>* warm = nullptr);

// Fraction of conditional log-Gaussian draws with x0 * r(draw) > u.
double exceedance_probability(const Observation& obs, const ModelParams& params,
                              const RiskSpec& spec, const SiteSet& sites, double u,
                              int n_draws, RngStream& rng);

// exceed_idx must be fixed for the evaluation; log_d aligned with it.
double log_posterior_latent(const ModelParams& params,
                            const std::vector<Observation>& obs,
                            const std::vector<int>& exceed_idx, double u,
                            const PriorSpec& prior, const SiteSet& sites,
                            const CrEstimate& cr, const std::vector<double>& log_d);

struct ChainSettings {
  int n_mcmc = 10000;
  int n_condx = 100;
  int n_cond_gauss = 2000;
  double q = 0.01;
  int n_min = 500;
  int n_max = 50000;
};

struct ChainDiagnostics {
  long d_underflows = 0;     // Monte-Carlo underflow of a small d_i
  long cr_flagged = 0;       // dynamic_n iterations that hit n_max
  long accepted_steps = 0;
};

std::vector<ChainState> run_observable_chain(
    const std::vector<Observation>& obs, double u, const RiskSpec& spec,
    const SiteSet& sites, const PriorSpec& prior, const ProposalSpec& proposal,
    const ChainSettings& settings, const ModelParams& start,
    const RngStream& master, ChainDiagnostics* diag = nullptr);

std::vector<ChainState> run_latent_chain(
    const std::vector<Observation>& obs, double u, const RiskSpec& spec,
    const SiteSet& sites, const PriorSpec& prior, const ProposalSpec& proposal,
    const ChainSettings& settings, const ModelParams& start,
    const RngStream& master, ChainDiagnostics* diag = nullptr);

}  // namespace rpareto

#endif
