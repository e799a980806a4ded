#pragma once

// Random force field F(x) = sum_i f_i(x - r_i) over a unit-intensity Poisson
// point field, generated lazily cell by cell.
//
// Layout of the randomness: the cell with integer coordinates k in field
// `index` draws its point count and centers from the stream keyed by
// (seed, index, k). Bump i of that cell draws its marks (sign, shape,
// direction) from a second stream keyed by (cell key, i). Marks therefore
// do not depend on which other bumps were filtered out, which lets the
// trajectory accelerator (field_tube.hpp) generate centers first and marks
// only for the bumps it keeps, while still seeing exactly the same field.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rfflab/rng.hpp"
#include "rfflab/vec.hpp"

namespace rfflab {

enum class FamilyKind { uniform_direction, radial_gradient, mixture };
enum class BumpShape : std::uint8_t { uniform_direction, radial_gradient };

inline std::string_view to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::uniform_direction: return "uniform";
    case FamilyKind::radial_gradient: return "radial";
    case FamilyKind::mixture: return "mixture";
  }
  return "uniform";
}

inline FamilyKind family_kind_from_string(std::string_view s) {
  if (s == "uniform" || s == "uniform-direction") return FamilyKind::uniform_direction;
  if (s == "radial" || s == "radial-gradient") return FamilyKind::radial_gradient;
  if (s == "mixture") return FamilyKind::mixture;
  throw std::invalid_argument("unknown bump family '" + std::string(s) + "' (expected uniform|radial|mixture)");
}

/// Radial bump profile phi(rho) = (1 - (rho/R)^2)^3 on [0, R], zero beyond.
/// phi, phi' and phi'' all vanish at rho = R, so bumps glue C^2 to zero.
struct BumpProfile {
  double radius = 1.0;
  double amplitude = 0.5;
  /// Bound m on the C^2 norm of a single bump.
  double c2_bound = 3.0;

  double phi(double rho) const {
    if (rho >= radius) return 0.0;
    const double u = 1.0 - (rho * rho) / (radius * radius);
    return u * u * u;
  }
  double dphi(double rho) const {
    if (rho >= radius) return 0.0;
    const double r2 = radius * radius;
    const double u = 1.0 - (rho * rho) / r2;
    return -6.0 * rho * u * u / r2;
  }
  double d2phi(double rho) const {
    if (rho >= radius) return 0.0;
    const double r2 = radius * radius;
    const double u = 1.0 - (rho * rho) / r2;
    return -6.0 * u * u / r2 + 24.0 * rho * rho * u / (r2 * r2);
  }
};

/// C^2 norm of a unit-amplitude bump of the given shape. The norm is the
/// largest of sup|f|, sup ||Df|| and sup ||D^2 f||, where the derivative
/// norms are taken over the radial coefficient functions that make up the
/// derivative tensors (eigenvalues for the first derivative, the three
/// coefficient functions for the second).
inline double unit_c2_norm(const BumpProfile& p, BumpShape shape) {
  constexpr int kGrid = 4096;
  const double R = p.radius;
  double best = 0.0;
  for (int k = 0; k <= kGrid; ++k) {
    const double rho = R * static_cast<double>(k) / kGrid;
    const double f = p.phi(rho), f1 = p.dphi(rho), f2 = p.d2phi(rho);
    // phi'(rho)/rho -> phi''(0) as rho -> 0.
    const double f1_over_rho = rho > 0.0 ? f1 / rho : f2;
    if (shape == BumpShape::uniform_direction) {
      best = std::max({best, std::abs(f), std::abs(f1), std::abs(f2), std::abs(f1_over_rho)});
    } else {
      // f(x) = phi(|x|) x / R: magnitude g = rho phi / R.
      const double g = rho * f / R;
      const double g1 = (f + rho * f1) / R;
      const double g2 = (2.0 * f1 + rho * f2) / R;
      best = std::max({best, std::abs(g), std::abs(f / R), std::abs(g1), std::abs(f1 / R), std::abs(g2)});
    }
  }
  return best;
}

struct BumpFamily {
  FamilyKind kind = FamilyKind::uniform_direction;
  BumpProfile profile{};
  /// Probability that a mixture bump is uniform-direction (else radial-gradient).
  double mixture_weight = 0.5;

  double radius() const { return profile.radius; }
  double amplitude() const { return profile.amplitude; }
};

/// Validates a family and enforces the C^2 bound by shrinking the amplitude.
inline BumpFamily make_family(FamilyKind kind, BumpProfile profile, double mixture_weight = 0.5) {
  if (!(profile.radius > 0.0) || !std::isfinite(profile.radius)) throw std::invalid_argument("bump radius must be positive");
  if (!(profile.amplitude >= 0.0) || !std::isfinite(profile.amplitude)) throw std::invalid_argument("bump amplitude must be >= 0");
  if (!(profile.c2_bound > 0.0)) throw std::invalid_argument("C^2 bound m must be positive");
  if (!(mixture_weight >= 0.0 && mixture_weight <= 1.0)) throw std::invalid_argument("mixture weight must lie in [0, 1]");
  double unit = 0.0;
  if (kind != FamilyKind::radial_gradient) unit = std::max(unit, unit_c2_norm(profile, BumpShape::uniform_direction));
  if (kind != FamilyKind::uniform_direction) unit = std::max(unit, unit_c2_norm(profile, BumpShape::radial_gradient));
  if (profile.amplitude * unit > profile.c2_bound) profile.amplitude = profile.c2_bound / unit;
  return BumpFamily{kind, profile, mixture_weight};
}

/// Family whose C^2 bound is exactly met by the requested amplitude.
inline BumpFamily make_family_unbounded(FamilyKind kind, double radius, double amplitude, double mixture_weight = 0.5) {
  BumpProfile p{radius, amplitude, 1.0};
  double unit = 0.0;
  if (kind != FamilyKind::radial_gradient) unit = std::max(unit, unit_c2_norm(p, BumpShape::uniform_direction));
  if (kind != FamilyKind::uniform_direction) unit = std::max(unit, unit_c2_norm(p, BumpShape::radial_gradient));
  p.c2_bound = std::max(amplitude * unit, 1e-300);
  return make_family(kind, p, mixture_weight);
}

template <int D>
struct Bump {
  Vec<D> center{};
  /// Unit direction e (uniform-direction bumps only).
  Vec<D> direction{};
  double sign = 1.0;
  BumpShape shape = BumpShape::uniform_direction;
};

/// Force of one bump at x: s A phi e (uniform) or s (A/R) phi (x - r) (radial).
template <int D>
inline Vec<D> bump_force(const Bump<D>& b, const BumpProfile& p, const Vec<D>& x) {
  const Vec<D> dx = x - b.center;
  const double r2 = norm2(dx);
  const double R2 = p.radius * p.radius;
  if (r2 >= R2) return Vec<D>{};
  const double u = 1.0 - r2 / R2;
  const double phi = u * u * u;
  if (b.shape == BumpShape::uniform_direction) return b.direction * (b.sign * p.amplitude * phi);
  return dx * (b.sign * p.amplitude / p.radius * phi);
}

template <int D>
inline Mat<D> bump_jacobian(const Bump<D>& b, const BumpProfile& p, const Vec<D>& x) {
  Mat<D> J{};
  const Vec<D> dx = x - b.center;
  const double r2 = norm2(dx);
  const double R2 = p.radius * p.radius;
  if (r2 >= R2) return J;
  const double u = 1.0 - r2 / R2;
  const double phi = u * u * u;
  // grad phi(|x - r|) = -6 u^2 dx / R^2
  const double g = -6.0 * u * u / R2;
  if (b.shape == BumpShape::uniform_direction) {
    const double s = b.sign * p.amplitude;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) J(i, j) = s * b.direction[i] * g * dx[j];
  } else {
    const double s = b.sign * p.amplitude / p.radius;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) J(i, j) = s * ((i == j ? phi : 0.0) + dx[i] * g * dx[j]);
  }
  return J;
}

template <int D>
struct Exclusion {
  Vec<D> center{};
  double radius = 0.0;

  bool contains(const Vec<D>& x) const { return norm2(x - center) < radius * radius; }
};

template <int D>
using CellCoord = std::array<std::int64_t, D>;

template <int D>
struct CellHash {
  std::size_t operator()(const CellCoord<D>& c) const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (auto v : c) h = mix64(h ^ static_cast<std::uint64_t>(v)) + kGoldenGamma;
    return static_cast<std::size_t>(h);
  }
};

/// One realization of the field (F, or F_n with an excluded ball).
///
/// Not thread-safe: an instance belongs to one worker. Two instances built
/// from the same (family, seed, index, exclusion) are identical fields.
template <int D>
class FieldInstance {
 public:
  enum class Source { poisson, explicit_list };

  FieldInstance(const BumpFamily& family, std::uint64_t seed, std::int64_t index = 0,
                std::optional<Exclusion<D>> exclusion = std::nullopt, double cell_size = 0.0)
      : family_(family),
        seed_(seed),
        index_(index),
        exclusion_(exclusion),
        cell_size_(cell_size > 0.0 ? cell_size : 2.0 * family.profile.radius) {
    cell_mean_ = std::pow(cell_size_, D);
    cell_exp_ = std::exp(-cell_mean_);
    base_key_ = derive_key(seed_, {index_, static_cast<std::int64_t>(D)});
  }

  /// A field made of the given bumps only (test mode; empty list = zero field).
  static FieldInstance from_bumps(const BumpFamily& family, const std::vector<Bump<D>>& bumps,
                                  std::optional<Exclusion<D>> exclusion = std::nullopt, double cell_size = 0.0) {
    FieldInstance f(family, 0, 0, exclusion, cell_size);
    f.source_ = Source::explicit_list;
    for (const auto& b : bumps) {
      if (f.exclusion_ && f.exclusion_->contains(b.center)) continue;
      f.fixed_[f.cell_of(b.center)].push_back(b);
    }
    return f;
  }

  static FieldInstance empty(const BumpFamily& family) { return from_bumps(family, {}); }

  const BumpFamily& family() const { return family_; }
  const BumpProfile& profile() const { return family_.profile; }
  double radius() const { return family_.profile.radius; }
  double cell_size() const { return cell_size_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t index() const { return index_; }
  Source source() const { return source_; }
  const std::optional<Exclusion<D>>& exclusion() const { return exclusion_; }

  CellCoord<D> cell_of(const Vec<D>& x) const {
    CellCoord<D> c;
    for (int i = 0; i < D; ++i) c[i] = static_cast<std::int64_t>(std::floor(x[i] / cell_size_));
    return c;
  }

  std::uint64_t cell_key(const CellCoord<D>& cell) const {
    std::uint64_t h = base_key_;
    for (auto v : cell) h = mix64(h + kGoldenGamma + static_cast<std::uint64_t>(v) * 0xd1b54a32d192ed03ULL);
    return h;
  }

  /// Poisson count and centers of a cell, before exclusion filtering.
  /// Appends to `out`; returns the cell key used for mark streams.
  std::uint64_t cell_centers(const CellCoord<D>& cell, std::vector<Vec<D>>& out) const {
    const std::uint64_t key = cell_key(cell);
    if (source_ != Source::poisson) return key;
    Stream s(key);
    const std::int64_t n = cell_mean_ <= Stream::kPoissonChunk ? s.poisson_small(cell_mean_, cell_exp_) : s.poisson(cell_mean_);
    for (std::int64_t i = 0; i < n; ++i) {
      Vec<D> c;
      for (int k = 0; k < D; ++k) c[k] = (static_cast<double>(cell[k]) + s.uniform()) * cell_size_;
      out.push_back(c);
    }
    return key;
  }

  /// Marks of bump `i` of the cell with the given key.
  Bump<D> make_bump(std::uint64_t cell_key, std::int64_t i, const Vec<D>& center) const {
    Stream s(derive_key(cell_key, {i}));
    Bump<D> b;
    b.center = center;
    b.sign = s.uniform() < 0.5 ? -1.0 : 1.0;
    const double pick = s.uniform();
    switch (family_.kind) {
      case FamilyKind::uniform_direction: b.shape = BumpShape::uniform_direction; break;
      case FamilyKind::radial_gradient: b.shape = BumpShape::radial_gradient; break;
      case FamilyKind::mixture:
        b.shape = pick < family_.mixture_weight ? BumpShape::uniform_direction : BumpShape::radial_gradient;
        break;
    }
    b.direction = s.template unit_vector<D>();
    return b;
  }

  /// Bumps of one cell (cached). The returned reference stays valid until
  /// the next call to sample_cell.
  const std::vector<Bump<D>>& sample_cell(const CellCoord<D>& cell) {
    if (source_ == Source::explicit_list) {
      auto it = fixed_.find(cell);
      return it == fixed_.end() ? empty_ : it->second;
    }
    if (auto it = cache_.find(cell); it != cache_.end()) return it->second;
    if (cached_bumps_ > max_cached_bumps_) {
      cache_.clear();
      cached_bumps_ = 0;
    }
    scratch_.clear();
    const std::uint64_t key = cell_centers(cell, scratch_);
    std::vector<Bump<D>> bumps;
    bumps.reserve(scratch_.size());
    for (std::size_t i = 0; i < scratch_.size(); ++i) {
      if (exclusion_ && exclusion_->contains(scratch_[i])) continue;
      bumps.push_back(make_bump(key, static_cast<std::int64_t>(i), scratch_[i]));
    }
    cached_bumps_ += bumps.size();
    return cache_.emplace(cell, std::move(bumps)).first->second;
  }

  /// Visits every cell intersecting the ball of the given radius around x.
  template <class Fn>
  void for_each_cell_near(const Vec<D>& x, double radius, Fn&& fn) const {
    CellCoord<D> lo, hi, cur;
    for (int i = 0; i < D; ++i) {
      lo[i] = static_cast<std::int64_t>(std::floor((x[i] - radius) / cell_size_));
      hi[i] = static_cast<std::int64_t>(std::floor((x[i] + radius) / cell_size_));
    }
    cur = lo;
    for (;;) {
      // Skip cells whose box misses the ball.
      double d2 = 0.0;
      for (int i = 0; i < D; ++i) {
        const double a = static_cast<double>(cur[i]) * cell_size_, b = a + cell_size_;
        const double q = x[i] < a ? a - x[i] : (x[i] > b ? x[i] - b : 0.0);
        d2 += q * q;
      }
      if (d2 <= radius * radius) fn(cur);
      int k = 0;
      while (k < D) {
        if (++cur[k] <= hi[k]) break;
        cur[k] = lo[k];
        ++k;
      }
      if (k == D) break;
    }
  }

  template <class Fn>
  void for_each_bump_near(const Vec<D>& x, double radius, Fn&& fn) {
    for_each_cell_near(x, radius, [&](const CellCoord<D>& cell) {
      for (const auto& b : sample_cell(cell))
        if (norm2(b.center - x) < radius * radius) fn(b);
    });
  }

  Vec<D> force_at(const Vec<D>& x) {
    Vec<D> f{};
    for_each_bump_near(x, radius(), [&](const Bump<D>& b) { f += bump_force(b, family_.profile, x); });
    return f;
  }

  Mat<D> jacobian_at(const Vec<D>& x) {
    Mat<D> J{};
    for_each_bump_near(x, radius(), [&](const Bump<D>& b) { J += bump_jacobian(b, family_.profile, x); });
    return J;
  }

  /// True iff no bump center lies strictly within 2R of x.
  bool gap_condition(const Vec<D>& x) {
    bool clear = true;
    const double r = 2.0 * radius();
    for_each_cell_near(x, r, [&](const CellCoord<D>& cell) {
      if (!clear) return;
      for (const auto& b : sample_cell(cell))
        if (norm2(b.center - x) < r * r) {
          clear = false;
          return;
        }
    });
    return clear;
  }

  std::size_t cached_cells() const { return cache_.size(); }
  void set_cache_limit(std::size_t max_bumps) { max_cached_bumps_ = max_bumps; }

 private:
  BumpFamily family_;
  std::uint64_t seed_;
  std::int64_t index_;
  std::optional<Exclusion<D>> exclusion_;
  double cell_size_;
  double cell_mean_ = 1.0;
  double cell_exp_ = std::exp(-1.0);
  std::uint64_t base_key_ = 0;
  Source source_ = Source::poisson;
  std::unordered_map<CellCoord<D>, std::vector<Bump<D>>, CellHash<D>> cache_;
  std::unordered_map<CellCoord<D>, std::vector<Bump<D>>, CellHash<D>> fixed_;
  std::vector<Vec<D>> scratch_;
  std::vector<Bump<D>> empty_;
  std::size_t cached_bumps_ = 0;
  std::size_t max_cached_bumps_ = std::size_t{1} << 20;
};

}  // namespace rfflab
