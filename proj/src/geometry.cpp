#include "rpareto/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "rpareto/errors.hpp"

namespace rpareto {

double sq_distance(const Coord& a, const Coord& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

double distance(const Coord& a, const Coord& b) { return std::sqrt(sq_distance(a, b)); }

namespace {

std::vector<int> unravel(int idx, const std::vector<int>& side_counts) {
  std::vector<int> out(side_counts.size());
  for (int a = int(side_counts.size()) - 1; a >= 0; --a) {
    out[a] = idx % side_counts[a];
    idx /= side_counts[a];
  }
  return out;
}

}  // namespace

SiteSet build_regular_grid(const std::vector<int>& side_counts,
                           const std::vector<double>& spacing,
                           const CoarsePattern& pattern, int s0_index) {
  if (side_counts.empty() || side_counts.size() != spacing.size())
    throw usage_error("grid: side_counts and spacing must be non-empty and of equal length");
  int n_fine = 1;
  for (size_t a = 0; a < side_counts.size(); ++a) {
    if (side_counts[a] < 1) throw usage_error("grid: side count must be >= 1");
    if (spacing[a] <= 0.0) throw usage_error("grid: spacing must be positive");
    n_fine *= side_counts[a];
  }

  SiteSet sites;
  sites.side_counts = side_counts;
  sites.spacing = spacing;
  sites.fine_sites.reserve(n_fine);
  for (int i = 0; i < n_fine; ++i) {
    const auto idx = unravel(i, side_counts);
    Coord c(side_counts.size());
    for (size_t a = 0; a < side_counts.size(); ++a) c[a] = idx[a] * spacing[a];
    sites.fine_sites.push_back(std::move(c));
  }

  std::vector<int> selected;
  switch (pattern.kind) {
    case CoarsePattern::Kind::All:
      for (int i = 0; i < n_fine; ++i) selected.push_back(i);
      break;
    case CoarsePattern::Kind::Stride: {
      if (pattern.stride.size() != side_counts.size())
        throw usage_error("grid: stride must have one entry per axis");
      for (int s : pattern.stride)
        if (s < 1) throw usage_error("grid: stride entries must be >= 1");
      for (int i = 0; i < n_fine; ++i) {
        const auto idx = unravel(i, side_counts);
        bool on = true;
        for (size_t a = 0; a < side_counts.size(); ++a)
          if (idx[a] % pattern.stride[a] != 0) { on = false; break; }
        if (on) selected.push_back(i);
      }
      break;
    }
    case CoarsePattern::Kind::Indices:
      selected = pattern.indices;
      std::sort(selected.begin(), selected.end());
      if (std::adjacent_find(selected.begin(), selected.end()) != selected.end())
        throw usage_error("grid: duplicate coarse site index");
      for (int i : selected)
        if (i < 0 || i >= n_fine)
          throw usage_error("grid: coarse site index not on the fine grid");
      break;
  }

  if (std::find(selected.begin(), selected.end(), s0_index) == selected.end())
    throw usage_error("grid: s0 must be one of the selected coarse nodes");
  if (selected.size() < 2)
    throw usage_error("grid: need at least one coarse site besides s0");

  sites.coarse_in_fine.push_back(s0_index);
  for (int i : selected)
    if (i != s0_index) sites.coarse_in_fine.push_back(i);
  return sites;
}

}  // namespace rpareto
