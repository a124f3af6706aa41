#ifndef RPARETO_RISK_HPP
#define RPARETO_RISK_HPP

#include <span>
#include <vector>

#include "rpareto/geometry.hpp"

namespace rpareto {

// Positively homogeneous risk functional over a site-indexed vector.
// Coarse-target specs follow the prepend-1 convention: r applied to an
// n-vector of coarse values means r applied to (1, values), the leading
// 1 standing for the normalized value at s0.
struct RiskSpec {
  enum class Kind { Mean, Sup, Weighted };
  enum class Target { Fine, Coarse };

  Kind kind = Kind::Mean;
  Target target = Target::Fine;
  // For Weighted: one nonnegative weight per site of the target set; for
  // Target::Coarse the first weight belongs to s0.
  std::vector<double> weights;

  static RiskSpec fine_mean() { return {Kind::Mean, Target::Fine, {}}; }
  static RiskSpec coarse_mean() { return {Kind::Mean, Target::Coarse, {}}; }
  static RiskSpec fine_sup() { return {Kind::Sup, Target::Fine, {}}; }
  static RiskSpec weighted(Target t, std::vector<double> w) {
    return {Kind::Weighted, t, std::move(w)};
  }
  // Point evaluation at s0 (degenerate: r(W) = 1 almost surely).
  static RiskSpec point_at_s0(const SiteSet& sites);

  bool reads_fine() const { return target == Target::Fine; }
};

// values has one entry per site of the target set (fine: N entries;
// coarse: n+1 entries ordered (s0, s1..sn)).
double evaluate(const RiskSpec& spec, std::span<const double> values);

// Coarse-target convenience: values at s1..sn only; the s0 slot is 1.
double evaluate_prepended(const RiskSpec& spec, std::span<const double> coarse_values);

// Evaluate a spec against a spectral sample given on the fine grid,
// gathering coarse entries as needed. w_fine[s0] is expected to be 1.
double risk_of_fine_field(const RiskSpec& spec, const SiteSet& sites,
                          std::span<const double> w_fine);

}  // namespace rpareto

#endif
