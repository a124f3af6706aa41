#ifndef RPARETO_CR_NORM_HPP
#define RPARETO_CR_NORM_HPP

#include <Eigen/Dense>
#include <utility>

#include "rpareto/risk.hpp"
#include "rpareto/rng.hpp"
#include "rpareto/spectral.hpp"

namespace rpareto {

struct CrEstimate {
  double log_value = 0.0;       // estimate of log c_r
  int n_used = 0;
  double variance_heuristic = 0.0;  // Var(r(W)^alpha) / (n * c^2), plug-in
  bool accuracy_ok = true;      // false when dynamic_n hit n_max unsatisfied
};

// Raw standard-normal driving noise for the fBf sampler; one row per
// replication. Rows are fixed once drawn, so appending rows never changes
// the transform of existing ones, and two parameter values transformed
// through the same bank are coupled by common random numbers.
struct NoiseBank {
  // Row-major so each replication's noise is a contiguous span.
  using Matrix =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Matrix rows;  // n_rows x dim
  bool accuracy_ok = true;

  int n_rows() const { return int(rows.rows()); }
  int dim() const { return int(rows.cols()); }
};

// Driving-noise dimension for a given grid (2x the unpadded embedding
// size; samplers that fall back to dense consume a prefix of the row).
int noise_bank_dim(const SiteSet& sites);

NoiseBank draw_noise_bank(int n_rows, int dim, RngStream& rng);
void append_noise_rows(NoiseBank& bank, int extra, RngStream& rng);

// Bank-compatible sampler: circulant without padding, else dense.
FbfSampler bank_sampler(const SiteSet& sites, const VariogramParams& params);

// log( mean_i r(w_i)^alpha ) over the bank rows; deterministic in
// (params, spec, sites, noise).
CrEstimate estimate_log_cr(const ModelParams& params, const RiskSpec& spec,
                           const SiteSet& sites, const NoiseBank& noise);

// Both estimates consume the identical rows (common random numbers).
std::pair<CrEstimate, CrEstimate> coupled_log_cr(const ModelParams& old_params,
                                                 const ModelParams& prop_params,
                                                 const RiskSpec& spec,
                                                 const SiteSet& sites,
                                                 const NoiseBank& noise);

// Grows a bank from n_min rows, doubling until the plug-in accuracy
// inequality (sd of log c-bar below q) holds or n_max is reached; in the
// latter case the bank is returned flagged.
NoiseBank dynamic_n(const ModelParams& params, const RiskSpec& spec,
                    const SiteSet& sites, double q, int n_min, int n_max,
                    RngStream& rng);

}  // namespace rpareto

#endif
