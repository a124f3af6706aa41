#include "rpareto/risk.hpp"

#include <algorithm>

#include "rpareto/errors.hpp"

namespace rpareto {

RiskSpec RiskSpec::point_at_s0(const SiteSet& sites) {
  std::vector<double> w(sites.n_fine(), 0.0);
  w[sites.s0_fine()] = 1.0;
  return weighted(Target::Fine, std::move(w));
}

double evaluate(const RiskSpec& spec, std::span<const double> values) {
  if (values.empty()) throw usage_error("risk: empty value vector");
  switch (spec.kind) {
    case RiskSpec::Kind::Mean: {
      double s = 0.0;
      for (double v : values) s += v;
      return s / double(values.size());
    }
    case RiskSpec::Kind::Sup:
      return *std::max_element(values.begin(), values.end());
    case RiskSpec::Kind::Weighted: {
      if (spec.weights.size() != values.size())
        throw usage_error("risk: weight/value length mismatch");
      double s = 0.0;
      for (size_t i = 0; i < values.size(); ++i) s += spec.weights[i] * values[i];
      return s;
    }
  }
  throw usage_error("risk: unknown kind");
}

double evaluate_prepended(const RiskSpec& spec, std::span<const double> coarse_values) {
  if (spec.target != RiskSpec::Target::Coarse)
    throw usage_error("risk: evaluate_prepended needs a coarse-target spec");
  switch (spec.kind) {
    case RiskSpec::Kind::Mean: {
      double s = 1.0;
      for (double v : coarse_values) s += v;
      return s / double(coarse_values.size() + 1);
    }
    case RiskSpec::Kind::Sup: {
      double m = 1.0;
      for (double v : coarse_values) m = std::max(m, v);
      return m;
    }
    case RiskSpec::Kind::Weighted: {
      if (spec.weights.size() != coarse_values.size() + 1)
        throw usage_error("risk: weight/value length mismatch");
      double s = spec.weights[0];
      for (size_t i = 0; i < coarse_values.size(); ++i)
        s += spec.weights[i + 1] * coarse_values[i];
      return s;
    }
  }
  throw usage_error("risk: unknown kind");
}

double risk_of_fine_field(const RiskSpec& spec, const SiteSet& sites,
                          std::span<const double> w_fine) {
  if (int(w_fine.size()) != sites.n_fine())
    throw usage_error("risk: field length does not match the fine grid");
  if (spec.reads_fine()) {
    // Accumulate s0 first, then the remaining sites in ascending order.
    // This matches the accumulation order of evaluate_prepended, so when
    // the coarse grid equals the fine grid both pipelines compute
    // bit-identical risks (the reduction identity is exact, not just
    // mathematical).
    const int s0 = sites.s0_fine();
    switch (spec.kind) {
      case RiskSpec::Kind::Mean: {
        double s = w_fine[s0];
        for (int i = 0; i < int(w_fine.size()); ++i)
          if (i != s0) s += w_fine[i];
        return s / double(w_fine.size());
      }
      case RiskSpec::Kind::Sup:
        return evaluate(spec, w_fine);
      case RiskSpec::Kind::Weighted: {
        if (spec.weights.size() != w_fine.size())
          throw usage_error("risk: weight/value length mismatch");
        double s = spec.weights[s0] * w_fine[s0];
        for (int i = 0; i < int(w_fine.size()); ++i)
          if (i != s0) s += spec.weights[i] * w_fine[i];
        return s;
      }
    }
    throw usage_error("risk: unknown kind");
  }
  // Gather (s0, s1..sn); w_fine[s0] carries the (unit) s0 value.
  std::vector<double> coarse(sites.n_coarse() + 1);
  for (size_t k = 0; k < coarse.size(); ++k) coarse[k] = w_fine[sites.coarse_in_fine[k]];
  return evaluate(spec, coarse);
}

}  // namespace rpareto
