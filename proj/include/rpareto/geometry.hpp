#ifndef RPARETO_GEOMETRY_HPP
#define RPARETO_GEOMETRY_HPP

#include <vector>

namespace rpareto {

using Coord = std::vector<double>;

// Fine grid, coarse observation sites and the normalizing site s0.
// coarse_in_fine[0] is the fine index of s0, coarse_in_fine[k] (k>=1)
// the fine index of s_k. Immutable after construction.
struct SiteSet {
  std::vector<int> side_counts;   // nodes per axis
  std::vector<double> spacing;    // grid step per axis
  std::vector<Coord> fine_sites;  // row-major, last axis fastest
  std::vector<int> coarse_in_fine;

  int dim() const { return int(side_counts.size()); }
  int n_fine() const { return int(fine_sites.size()); }
  int n_coarse() const { return int(coarse_in_fine.size()) - 1; }
  int s0_fine() const { return coarse_in_fine[0]; }
  const Coord& s0() const { return fine_sites[coarse_in_fine[0]]; }
  // k in 1..n
  const Coord& coarse_site(int k) const { return fine_sites[coarse_in_fine[k]]; }
};

// Which fine-grid nodes carry observations.
struct CoarsePattern {
  enum class Kind { Stride, Indices, All };
  Kind kind = Kind::Stride;
  std::vector<int> stride;   // per axis, for Kind::Stride
  std::vector<int> indices;  // fine indices, for Kind::Indices

  static CoarsePattern all() { return {Kind::All, {}, {}}; }
  static CoarsePattern with_stride(std::vector<int> s) {
    return {Kind::Stride, std::move(s), {}};
  }
  static CoarsePattern with_indices(std::vector<int> idx) {
    return {Kind::Indices, {}, std::move(idx)};
  }
};

// s0_index is a fine-grid index and must be one of the selected nodes.
SiteSet build_regular_grid(const std::vector<int>& side_counts,
                           const std::vector<double>& spacing,
                           const CoarsePattern& pattern, int s0_index);

double sq_distance(const Coord& a, const Coord& b);
double distance(const Coord& a, const Coord& b);

}  // namespace rpareto

#endif
