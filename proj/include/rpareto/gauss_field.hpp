#ifndef RPARETO_GAUSS_FIELD_HPP
#define RPARETO_GAUSS_FIELD_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "rpareto/geometry.hpp"
#include "rpareto/rng.hpp"

namespace rpareto {

// Power variogram gamma(h) = c * ||h||^beta.
struct VariogramParams {
  double c = 1.0;
  double beta = 1.0;
  void validate() const;
  bool operator==(const VariogramParams&) const = default;
};

double semivariogram_dist(double dist, const VariogramParams& p);
double semivariogram(const Coord& h, const VariogramParams& p);

// Covariance of the fractional Brownian field pinned at the coordinate
// origin: c * (||s||^beta + ||t||^beta - ||s-t||^beta).
double fbf_covariance(const Coord& s, const Coord& t, const VariogramParams& p);

struct GaussianFieldSample {
  std::vector<double> values;  // indexed by fine grid
  std::uint64_t seed_trace = 0;
};

// Exact sampler for the fBf on the fine grid, pinned at fine index 0
// (the coordinate origin). The fast path simulates a stationary auxiliary
// field with the compactly supported covariance
//   K(x) = c0 + c2 x^2 - x^beta          for 0 <= x <= 1,
//   K(x) = b0 (2 - x)^3 / x              for 1 <= x <= 2,   K(x) = 0 beyond,
// (distances normalized by the grid diameter) via block-circulant FFT
// embedding, pins it at the origin, and adds an independent random-plane
// term to supply the c2 x^2 part of the increment variance; the sum has
// exactly the power variogram. If the embedding is not positive
// semidefinite after padding doublings, a dense Cholesky factor of the
// pinned covariance is used instead.
class FbfSampler {
 public:
  enum class Path { Auto, Circulant, Dense };

  FbfSampler(const SiteSet& sites, const VariogramParams& params,
             Path path = Path::Auto, int max_doublings = 2);

  // Number of N(0,1) draws consumed per sample. Fixed by the grid alone
  // (2 * embedding size + one draw per axis for the random-plane term),
  // so noise banks can be shared across parameter values; the dense path
  // reads a prefix of the row.
  int noise_dim() const { return noise_dim_; }
  bool used_dense_fallback() const { return dense_; }

  GaussianFieldSample sample(RngStream& rng) const;
  // Deterministic map from raw noise to field values.
  void transform(std::span<const double> noise, std::vector<double>& out) const;

 private:
  void build_circulant(const SiteSet& sites, const VariogramParams& params,
                       int doublings);
  void build_dense(const SiteSet& sites, const VariogramParams& params);

  int n_fine_ = 0;
  int noise_dim_ = 0;
  bool dense_ = false;

  // circulant path
  std::vector<int> embed_dims_;
  std::vector<double> sqrt_eigen_;   // sqrt(lambda / M_total), includes scale
  std::vector<int> fine_to_embed_;   // fine index -> embedding index
  Eigen::MatrixXd plane_;            // N x dim random-plane coefficients
  mutable std::vector<std::complex<double>> work_;

  // dense path: pinned covariance factor, row/col 0 are zero
  Eigen::MatrixXd chol_;  // N x (N-1)
};

// Conditional law of a Gaussian vector given exact values at a subset of
// coordinates. Conditioned coordinates (and coordinates with zero prior
// variance) reproduce their values exactly: their factor rows are zero
// and their means are set directly.
struct ConditionalGaussian {
  std::vector<int> cond_indices;
  std::vector<double> cond_values;
  Eigen::VectorXd mean;    // length N
  Eigen::MatrixXd factor;  // N x n_latent, covariance = factor * factor^T
  std::vector<int> latent_indices;

  int size() const { return int(mean.size()); }
  int noise_dim() const { return int(factor.cols()); }
  void transform(std::span<const double> z, std::vector<double>& out) const;
  void sample(RngStream& rng, std::vector<double>& out) const;
};

ConditionalGaussian condition_gaussian(const Eigen::VectorXd& mean,
                                       const Eigen::MatrixXd& cov,
                                       const std::vector<int>& cond_indices,
                                       const std::vector<double>& cond_values);

// Conditioning of the pinned fBf on the fine grid via fbf_covariance.
ConditionalGaussian build_conditional(const SiteSet& sites,
                                      const std::vector<int>& cond_indices,
                                      const std::vector<double>& cond_values,
                                      const VariogramParams& params);

}  // namespace rpareto

#endif
