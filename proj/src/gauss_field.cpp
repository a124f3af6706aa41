#include "rpareto/gauss_field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rpareto/errors.hpp"
#include "rpareto/fft.hpp"

namespace rpareto {

void VariogramParams::validate() const {
  if (!(c > 0.0)) throw usage_error("variogram: c must be positive");
  if (!(beta > 0.0) || beta > 2.0) throw usage_error("variogram: beta must be in (0,2]");
}

double semivariogram_dist(double dist, const VariogramParams& p) {
  return p.c * std::pow(dist, p.beta);
}

double semivariogram(const Coord& h, const VariogramParams& p) {
  double s = 0.0;
  for (double v : h) s += v * v;
  return semivariogram_dist(std::sqrt(s), p);
}

double fbf_covariance(const Coord& s, const Coord& t, const VariogramParams& p) {
  Coord origin(s.size(), 0.0);
  return semivariogram_dist(distance(s, origin), p) +
         semivariogram_dist(distance(t, origin), p) -
         semivariogram_dist(distance(s, t), p);
}

namespace {

// Cholesky with an escalating diagonal jitter; throws on exhaustion.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& m, const char* what) {
  const int n = int(m.rows());
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const double base = m.trace() / n;
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd j = m;
    if (jitter > 0.0) j.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(j);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = (jitter == 0.0) ? 1e-10 * base : 10.0 * jitter;
    if (jitter > 1e-6 * base * 10.0) break;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double cond = es.eigenvalues().maxCoeff() /
                      std::max(es.eigenvalues().minCoeff(), 1e-300);
  throw numeric_error(std::string(what) +
                      ": matrix not positive definite within jitter budget"
                      " (condition number ~" + std::to_string(cond) + ")");
}

}  // namespace

FbfSampler::FbfSampler(const SiteSet& sites, const VariogramParams& params,
                       Path path, int max_doublings) {
  params.validate();
  n_fine_ = sites.n_fine();

  // The embedding geometry (and thus the noise dimension) is fixed by the
  // grid: the noise bank layout must not depend on the parameter value.
  embed_dims_.resize(sites.dim());
  for (int a = 0; a < sites.dim(); ++a) {
    const int n = sites.side_counts[a];
    embed_dims_[a] = (n == 1) ? 1 : next_pow2(2 * (n - 1));
  }
  int m_total = 1;
  for (int d : embed_dims_) m_total *= d;
  noise_dim_ = 2 * m_total + sites.dim();

  if (path == Path::Dense || n_fine_ < 2) {
    build_dense(sites, params);
    return;
  }
  for (int doublings = 0; doublings <= max_doublings; ++doublings) {
    build_circulant(sites, params, doublings);
    if (!dense_) return;
  }
  if (path == Path::Circulant)
    throw numeric_error("circulant embedding not positive semidefinite after padding");
  build_dense(sites, params);
}

void FbfSampler::build_circulant(const SiteSet& sites,
                                 const VariogramParams& params, int doublings) {
  const int d = sites.dim();
  std::vector<int> dims(d);
  int m_total = 1;
  for (int a = 0; a < d; ++a) {
    const int n = sites.side_counts[a];
    dims[a] = (n == 1) ? 1 : (next_pow2(2 * (n - 1)) << doublings);
    m_total *= dims[a];
  }

  // Auxiliary stationary covariance K with compact support, distances
  // normalized by the grid diameter so every needed lag satisfies x <= 1:
  //   K(x) = c0 + c2 x^2 - x^beta    on [0, 1],
  //   K(x) = b0 (2 - x)^3 / x        on [1, 2],   0 beyond.
  // Constants make K continuously differentiable; for beta <= 1.5 the
  // cubic tail vanishes. The c2 x^2 part is removed from the increments
  // by an independent random-plane term added in transform().
  const double beta = params.beta;
  const double b0 = beta <= 1.5 ? 0.0 : beta * (2.0 - beta) / 18.0;
  const double c2 = beta <= 1.5 ? beta / 2.0 : (beta - 4.0 * b0) / 2.0;
  const double c0 = beta <= 1.5 ? 1.0 - beta / 2.0 : b0 + 1.0 - c2;

  double diam_sq = 0.0;
  for (int a = 0; a < d; ++a) {
    const double e = (sites.side_counts[a] - 1) * sites.spacing[a];
    diam_sq += e * e;
  }
  const double diam = std::sqrt(diam_sq);
  const double scale_sq = params.c * std::pow(diam, beta);  // A^2

  std::vector<std::complex<double>> row(m_total);
  for (int j = 0; j < m_total; ++j) {
    int rem = j;
    double sq = 0.0;
    for (int a = d - 1; a >= 0; --a) {
      const int ja = rem % dims[a];
      rem /= dims[a];
      const double h = std::min(ja, dims[a] - ja) * sites.spacing[a];
      sq += h * h;
    }
    const double x = std::sqrt(sq) / diam;
    double k = 0.0;
    if (x <= 1.0)
      k = c0 + c2 * x * x - std::pow(x, beta);
    else if (x < 2.0)
      k = b0 * (2.0 - x) * (2.0 - x) * (2.0 - x) / x;
    row[j] = scale_sq * k;
  }
  fft_nd(row, dims, false);

  double max_eig = 0.0, min_eig = 0.0;
  for (const auto& z : row) {
    max_eig = std::max(max_eig, z.real());
    min_eig = std::min(min_eig, z.real());
  }
  if (min_eig < -1e-10 * std::max(max_eig, 1.0)) {
    dense_ = true;  // caller retries with more padding / dense fallback
    return;
  }

  sqrt_eigen_.resize(m_total);
  for (int j = 0; j < m_total; ++j)
    sqrt_eigen_[j] = std::sqrt(std::max(row[j].real(), 0.0) / m_total);

  // Map fine indices into the embedding torus.
  std::vector<int> strides(d, 1);
  for (int a = d - 2; a >= 0; --a) strides[a] = strides[a + 1] * dims[a + 1];
  fine_to_embed_.resize(n_fine_);
  for (int i = 0; i < n_fine_; ++i) {
    int rem = i, pos = 0;
    for (int a = d - 1; a >= 0; --a) {
      const int ia = rem % sites.side_counts[a];
      rem /= sites.side_counts[a];
      pos += ia * strides[a];
    }
    fine_to_embed_[i] = pos;
  }

  // The noise bank layout stays at the unpadded size unless padding was
  // needed; dims may exceed embed_dims_ after doublings.
  embed_dims_ = dims;
  noise_dim_ = 2 * m_total + d;

  // Random-plane coefficients: G picks up sqrt(2 c2) * A * (s / diam) . Z
  // for one standard normal Z per axis; zero at the pinned origin.
  plane_.resize(n_fine_, d);
  const double plane_coef = std::sqrt(2.0 * c2 * scale_sq) / diam;
  for (int i = 0; i < n_fine_; ++i)
    for (int a = 0; a < d; ++a)
      plane_(i, a) = plane_coef * sites.fine_sites[i][a];

  work_.resize(m_total);
  dense_ = false;
}

void FbfSampler::build_dense(const SiteSet& sites, const VariogramParams& params) {
  const int n = n_fine_;
  Eigen::MatrixXd cov(n - 1, n - 1);
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      cov(i - 1, j - 1) = fbf_covariance(sites.fine_sites[i], sites.fine_sites[j], params);
  const Eigen::MatrixXd l = cholesky_with_jitter(cov, "fbf dense fallback");
  chol_ = Eigen::MatrixXd::Zero(n, n - 1);
  chol_.bottomRows(n - 1) = l;
  dense_ = true;
}

GaussianFieldSample FbfSampler::sample(RngStream& rng) const {
  std::vector<double> noise(noise_dim_);
  for (double& v : noise) v = rng.normal();
  GaussianFieldSample out;
  out.seed_trace = rng.key();
  transform(noise, out.values);
  return out;
}

void FbfSampler::transform(std::span<const double> noise,
                           std::vector<double>& out) const {
  out.resize(n_fine_);
  if (dense_) {
    // Consumes the first N-1 entries of the row.
    Eigen::Map<const Eigen::VectorXd> z(noise.data(), n_fine_ - 1);
    Eigen::Map<Eigen::VectorXd>(out.data(), n_fine_) = chol_ * z;
    out[0] = 0.0;
    return;
  }
  const int m_total = int(sqrt_eigen_.size());
  for (int j = 0; j < m_total; ++j)
    work_[j] = sqrt_eigen_[j] *
               std::complex<double>(noise[2 * j], noise[2 * j + 1]);
  fft_nd(work_, embed_dims_, false);
  const double pin = work_[fine_to_embed_[0]].real();
  for (int i = 0; i < n_fine_; ++i)
    out[i] = work_[fine_to_embed_[i]].real() - pin;
  const int d = int(plane_.cols());
  Eigen::Map<const Eigen::VectorXd> z(noise.data() + 2 * m_total, d);
  Eigen::Map<Eigen::VectorXd>(out.data(), n_fine_) += plane_ * z;
  out[0] = 0.0;
}

void ConditionalGaussian::transform(std::span<const double> z,
                                    std::vector<double>& out) const {
  const int n = size();
  out.resize(n);
  Eigen::Map<Eigen::VectorXd> v(out.data(), n);
  v = mean;
  if (factor.cols() > 0) {
    Eigen::Map<const Eigen::VectorXd> zz(z.data(), factor.cols());
    v += factor * zz;
  }
}

void ConditionalGaussian::sample(RngStream& rng, std::vector<double>& out) const {
  std::vector<double> z(noise_dim());
  for (double& v : z) v = rng.normal();
  transform(z, out);
}

ConditionalGaussian condition_gaussian(const Eigen::VectorXd& mean,
                                       const Eigen::MatrixXd& cov,
                                       const std::vector<int>& cond_indices,
                                       const std::vector<double>& cond_values) {
  const int n = int(mean.size());
  if (cond_indices.size() != cond_values.size())
    throw usage_error("conditioning: index/value length mismatch");
  std::vector<char> is_cond(n, 0);
  for (int i : cond_indices) {
    if (i < 0 || i >= n) throw usage_error("conditioning: index out of range");
    if (is_cond[i]) throw usage_error("conditioning: duplicate site");
    is_cond[i] = 1;
  }

  const double scale = std::max(cov.diagonal().maxCoeff(), 1e-300);

  // Zero-variance coordinates carry no information; their values must be
  // consistent with the (degenerate) prior.
  std::vector<int> informative;
  for (size_t k = 0; k < cond_indices.size(); ++k) {
    const int i = cond_indices[k];
    if (cov(i, i) <= 1e-14 * scale) {
      if (std::abs(cond_values[k] - mean(i)) > 1e-8 * (1.0 + std::abs(cond_values[k])))
        throw numeric_error("conditioning on a deterministic coordinate with an inconsistent value");
    } else {
      informative.push_back(int(k));
    }
  }

  ConditionalGaussian cg;
  cg.cond_indices = cond_indices;
  cg.cond_values = cond_values;
  cg.mean = mean;

  std::vector<int> latent;
  for (int i = 0; i < n; ++i)
    if (!is_cond[i]) latent.push_back(i);
  cg.latent_indices = latent;
  const int nl = int(latent.size());

  const int nb = int(informative.size());
  Eigen::MatrixXd schur(nl, nl);
  if (nb > 0) {
    Eigen::MatrixXd sigma_bb(nb, nb);
    Eigen::VectorXd resid(nb);
    for (int a = 0; a < nb; ++a) {
      const int ia = cond_indices[informative[a]];
      resid(a) = cond_values[informative[a]] - mean(ia);
      for (int b = 0; b < nb; ++b) sigma_bb(a, b) = cov(ia, cond_indices[informative[b]]);
    }
    Eigen::MatrixXd sigma_ab(nl, nb);
    for (int a = 0; a < nl; ++a)
      for (int b = 0; b < nb; ++b) sigma_ab(a, b) = cov(latent[a], cond_indices[informative[b]]);

    const Eigen::MatrixXd lb = cholesky_with_jitter(sigma_bb, "conditioning");
    const auto llt_l = lb.triangularView<Eigen::Lower>();
    const auto llt_u = lb.transpose().triangularView<Eigen::Upper>();
    const Eigen::VectorXd alpha = llt_u.solve(llt_l.solve(resid));
    const Eigen::MatrixXd k_gain = llt_u.solve(llt_l.solve(sigma_ab.transpose())).transpose();

    for (int a = 0; a < nl; ++a) cg.mean(latent[a]) += sigma_ab.row(a).dot(alpha);
    Eigen::MatrixXd sigma_aa(nl, nl);
    for (int a = 0; a < nl; ++a)
      for (int b = 0; b < nl; ++b) sigma_aa(a, b) = cov(latent[a], latent[b]);
    schur = sigma_aa - k_gain * sigma_ab.transpose();
  } else {
    for (int a = 0; a < nl; ++a)
      for (int b = 0; b < nl; ++b) schur(a, b) = cov(latent[a], latent[b]);
  }

  // Conditioned coordinates reproduce their values exactly.
  for (size_t k = 0; k < cond_indices.size(); ++k)
    cg.mean(cond_indices[k]) = cond_values[k];

  // Freeze latent coordinates whose conditional variance vanishes (e.g. a
  // pinned site): PSD forces their cross terms to vanish as well.
  std::vector<int> free_idx;
  for (int a = 0; a < nl; ++a)
    if (schur(a, a) > 1e-12 * scale) free_idx.push_back(a);
  const int nf = int(free_idx.size());
  Eigen::MatrixXd schur_free(nf, nf);
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b < nf; ++b) schur_free(a, b) = schur(free_idx[a], free_idx[b]);
  const Eigen::MatrixXd lf = cholesky_with_jitter(schur_free, "conditional factor");

  cg.factor = Eigen::MatrixXd::Zero(n, nf);
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b <= a; ++b) cg.factor(latent[free_idx[a]], b) = lf(a, b);
  return cg;
}

ConditionalGaussian build_conditional(const SiteSet& sites,
                                      const std::vector<int>& cond_indices,
                                      const std::vector<double>& cond_values,
                                      const VariogramParams& params) {
  params.validate();
  const int n = sites.n_fine();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      cov(i, j) = fbf_covariance(sites.fine_sites[i], sites.fine_sites[j], params);
      cov(j, i) = cov(i, j);
    }
  return condition_gaussian(mean, cov, cond_indices, cond_values);
}

}  // namespace rpareto
