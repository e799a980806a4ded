#pragma once

// Near-self-intersection scan of a renewal trajectory.
//
// Segment n of the log covers [tau_n, tau_{n+1}]. A segment p is flagged
// when a dense point of any segment q >= p + 2 (the path after
// tau_{p+2}) comes within 3R of a dense point of segment p. This samples
// the event that the 2R-neighbourhood of one piece meets the
// R-neighbourhood of the tail that starts one piece later. The cone check
// flags segment n (n >= 1) when segment n-1 leaves K-(Y_n, v_n) or
// segment n leaves K+(Y_n, v_n), the cones of half-angle arccos(3/4).

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "rfflab/dynamics.hpp"
#include "rfflab/field.hpp"

namespace rfflab {

struct IntersectionSummary {
  std::int64_t segments = 0;
  std::int64_t near_flags = 0;
  std::int64_t cone_flags = 0;

  bool any() const { return near_flags > 0 || cone_flags > 0; }
};

inline constexpr double kConeCosine = 0.75;

/// y in K+(x, v): (y - x, v) >= 3/4 |y - x| |v|; K- uses -v.
template <int D>
bool in_cone(const Vec<D>& y, const Vec<D>& x, const Vec<D>& v, bool forward) {
  const Vec<D> w = y - x;
  const double lhs = forward ? dot(w, v) : -dot(w, v);
  return lhs >= kConeCosine * norm(w) * norm(v);
}

/// Sets kFlagNearIntersection / kFlagConeViolation on the segment records.
/// `dense` must be ordered in time with segment indices matching `segments`.
template <int D>
IntersectionSummary near_self_intersection_scan(const std::vector<DensePoint<D>>& dense,
                                                std::vector<SegmentRecord<D>>& segments, double radius) {
  IntersectionSummary out;
  out.segments = static_cast<std::int64_t>(segments.size());
  if (segments.empty()) return out;
  auto index_of = [&](std::int64_t n) -> SegmentRecord<D>* {
    const auto k = n - segments.front().n;
    if (k < 0 || k >= static_cast<std::int64_t>(segments.size())) return nullptr;
    return &segments[static_cast<std::size_t>(k)];
  };

  // Hash with cells of side 6R: a ball of radius 3R meets at most 2 cells
  // per axis, chosen by which half of its cell the query point lies in.
  const double reach = 3.0 * radius;
  const double cs = 2.0 * reach;
  std::unordered_map<CellCoord<D>, std::vector<std::size_t>, CellHash<D>> grid;
  auto cell_of = [&](const Vec<D>& x) {
    CellCoord<D> c;
    for (int i = 0; i < D; ++i) c[i] = static_cast<std::int64_t>(std::floor(x[i] / cs));
    return c;
  };

  std::size_t pending = 0;  // dense[0, pending) are inserted
  for (std::size_t q = 0; q < dense.size(); ++q) {
    const auto seg_q = dense[q].segment;
    while (pending < q && dense[pending].segment <= seg_q - 2) {
      grid[cell_of(dense[pending].X)].push_back(pending);
      ++pending;
    }
    if (grid.empty()) continue;
    const Vec<D>& x = dense[q].X;
    CellCoord<D> base = cell_of(x), off{};
    for (int i = 0; i < D; ++i) {
      const double frac = x[i] / cs - static_cast<double>(base[i]);
      off[i] = frac < 0.5 ? -1 : 1;
    }
    for (unsigned mask = 0; mask < (1u << D); ++mask) {
      CellCoord<D> c = base;
      for (int i = 0; i < D; ++i)
        if (mask & (1u << i)) c[i] += off[i];
      auto it = grid.find(c);
      if (it == grid.end()) continue;
      for (std::size_t p : it->second) {
        if (norm2(dense[p].X - x) < reach * reach)
          if (auto* s = index_of(dense[p].segment)) s->flags |= kFlagNearIntersection;
      }
    }
  }

  for (const auto& pt : dense) {
    // pt lies on segment m; it must sit in K+ of segment m's start and in
    // K- of segment m+1's start.
    if (auto* own = index_of(pt.segment); own && own->n >= 1) {
      if (!in_cone(pt.X, own->Y, own->v, true)) own->flags |= kFlagConeViolation;
    }
    if (auto* next = index_of(pt.segment + 1)) {
      if (!in_cone(pt.X, next->Y, next->v, false)) next->flags |= kFlagConeViolation;
    }
  }

  for (const auto& s : segments) {
    if (s.flags & kFlagNearIntersection) ++out.near_flags;
    if (s.flags & kFlagConeViolation) ++out.cone_flags;
  }
  return out;
}

}  // namespace rfflab
