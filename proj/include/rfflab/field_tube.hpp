#pragma once

// Trajectory-local accelerator for FieldInstance.
//
// A particle moving fast through the field follows a nearly straight path.
// FieldTube gathers, once per rebuild, every bump whose center lies in a
// cylinder of radius R + skin around a segment of the current heading,
// sorted by the projection of the center on the axis. A force query then
// only scans the bumps whose projection is within R of the query point.
//
// The tube bypasses the field's cell cache: it regenerates the centers of
// the cells it crosses and draws marks only for the bumps it keeps. Both
// paths read the same counter-based streams, so force() agrees with
// FieldInstance::force_at() up to summation order.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rfflab/field.hpp"

namespace rfflab {

template <int D>
class FieldTube {
 public:
  struct Eval {
    Vec<D> force{};
    bool inside_support = false;
  };

  explicit FieldTube(FieldInstance<D>& field, double length_in_radii = 64.0, double skin_in_radii = 0.25)
      : field_(&field),
        R_(field.radius()),
        length_(length_in_radii * field.radius()),
        skin_(skin_in_radii * field.radius()) {}

  FieldInstance<D>& field() { return *field_; }

  Eval evaluate(const Vec<D>& x, const Vec<D>& heading) {
    ensure_covered(x, heading);
    Eval out;
    const double p = dot(x - origin_, axis_);
    const double R2 = R_ * R_;
    auto first = std::lower_bound(proj_.begin(), proj_.end(), p - R_);
    for (std::size_t k = static_cast<std::size_t>(first - proj_.begin()); k < proj_.size() && proj_[k] <= p + R_; ++k) {
      const Vec<D> dx = x - center_[k];
      const double r2 = norm2(dx);
      if (r2 >= R2) continue;
      const double u = 1.0 - r2 / R2;
      const double phi = u * u * u;
      out.force += (weight_[k] + dx * radial_coef_[k]) * phi;
      out.inside_support = true;
    }
    return out;
  }

  Vec<D> force(const Vec<D>& x, const Vec<D>& heading) { return evaluate(x, heading).force; }

  /// Distance along the unit direction u from x before the straight line
  /// enters the support of any bump, capped at max_dist. Zero if x is
  /// already inside a support.
  double free_path(const Vec<D>& x, const Vec<D>& u, double max_dist) {
    ensure_covered(x, u);
    double cap = std::min(max_dist, coverage_along(x, u));
    if (cap < R_) {
      rebuild(x, u);
      cap = std::min(max_dist, coverage_along(x, u));
    }
    const double p = dot(x - origin_, axis_);
    const double R2 = R_ * R_;
    double best = cap;
    auto first = std::lower_bound(proj_.begin(), proj_.end(), p - R_);
    for (std::size_t k = static_cast<std::size_t>(first - proj_.begin()); k < proj_.size() && proj_[k] <= p + best + R_; ++k) {
      const Vec<D> w = center_[k] - x;
      const double b = dot(w, u);
      const double q = norm2(w) - b * b;
      if (q >= R2) continue;
      const double half = std::sqrt(R2 - q);
      if (b + half <= 0.0) continue;  // behind
      const double entry = b - half;
      if (entry <= 0.0) return 0.0;
      best = std::min(best, entry);
    }
    return std::max(best, 0.0);
  }

  std::size_t rebuild_count() const { return rebuilds_; }
  std::size_t size() const { return proj_.size(); }

 private:
  bool covered(const Vec<D>& x) const {
    if (!built_) return false;
    const Vec<D> w = x - origin_;
    const double p = dot(w, axis_);
    if (p < -skin_ || p > length_) return false;
    return norm2(w) - p * p <= skin_ * skin_;
  }

  void ensure_covered(const Vec<D>& x, const Vec<D>& heading) {
    if (!covered(x)) rebuild(x, heading);
  }

  // Conservative distance along u for which x + s u stays inside the tube.
  double coverage_along(const Vec<D>& x, const Vec<D>& u) const {
    const Vec<D> w = x - origin_;
    const double p = dot(w, axis_);
    const double perp = std::sqrt(std::max(0.0, norm2(w) - p * p));
    const double c = dot(u, axis_);
    const double sin_angle = std::sqrt(std::max(0.0, 1.0 - c * c));
    double s = std::numeric_limits<double>::infinity();
    if (c > 1e-12) s = std::min(s, (length_ - p) / c);
    else if (c < -1e-12) s = std::min(s, (p + skin_) / -c);
    if (sin_angle > 1e-12) s = std::min(s, (skin_ - perp) / sin_angle);
    return std::max(0.0, s);
  }

  void rebuild(const Vec<D>& x, const Vec<D>& heading) {
    ++rebuilds_;
    built_ = true;
    origin_ = x;
    const double hn = norm(heading);
    axis_ = hn > 0.0 ? heading / hn : Vec<D>::unit(0);

    // Cells within L-infinity distance R + skin of the axis segment: fix
    // one coordinate at a time and narrow the segment parameter interval to
    // the part whose coordinate lies within reach of that cell row.
    cells_.clear();
    const Vec<D> a = origin_ + axis_ * (-skin_ - R_);
    const Vec<D> b = origin_ + axis_ * (length_ + R_);
    CellCoord<D> cur{};
    enumerate_cells(0, 0.0, 1.0, a, b, R_ + skin_, cur);

    const double rr = R_ + skin_;
    const double plo = -skin_ - R_, phi_ = length_ + R_;
    entries_.clear();
    auto consider = [&](const Bump<D>& b) {
      const Vec<D> w = b.center - origin_;
      const double p = dot(w, axis_);
      if (p < plo || p > phi_) return;
      if (norm2(w) - p * p >= rr * rr) return;
      entries_.push_back({p, b});
    };
    const auto& exclusion = field_->exclusion();
    for (const auto& cell : cells_) {
      if (field_->source() == FieldInstance<D>::Source::explicit_list) {
        for (const auto& b : field_->sample_cell(cell)) consider(b);
        continue;
      }
      centers_.clear();
      const std::uint64_t key = field_->cell_centers(cell, centers_);
      for (std::size_t i = 0; i < centers_.size(); ++i) {
        const Vec<D> w = centers_[i] - origin_;
        const double p = dot(w, axis_);
        if (p < plo || p > phi_) continue;
        if (norm2(w) - p * p >= rr * rr) continue;
        if (exclusion && exclusion->contains(centers_[i])) continue;
        entries_.push_back({p, field_->make_bump(key, static_cast<std::int64_t>(i), centers_[i])});
      }
    }
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.proj < b.proj; });

    const auto& prof = field_->profile();
    proj_.resize(entries_.size());
    center_.resize(entries_.size());
    weight_.resize(entries_.size());
    radial_coef_.resize(entries_.size());
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const auto& b = entries_[k].bump;
      proj_[k] = entries_[k].proj;
      center_[k] = b.center;
      if (b.shape == BumpShape::uniform_direction) {
        weight_[k] = b.direction * (b.sign * prof.amplitude);
        radial_coef_[k] = 0.0;
      } else {
        weight_[k] = Vec<D>{};
        radial_coef_[k] = b.sign * prof.amplitude / prof.radius;
      }
    }
  }

  void enumerate_cells(int j, double ta, double tb, const Vec<D>& a, const Vec<D>& b, double r, CellCoord<D>& cur) {
    const double cs = field_->cell_size();
    const double da = b[j] - a[j];
    const double xa = a[j] + da * ta, xb = a[j] + da * tb;
    const auto i0 = static_cast<std::int64_t>(std::floor((std::min(xa, xb) - r) / cs));
    const auto i1 = static_cast<std::int64_t>(std::floor((std::max(xa, xb) + r) / cs));
    if (j + 1 == D) {
      for (std::int64_t i = i0; i <= i1; ++i) {
        cur[j] = i;
        cells_.push_back(cur);
      }
      return;
    }
    for (std::int64_t i = i0; i <= i1; ++i) {
      double lo = ta, hi = tb;
      if (da != 0.0) {
        double u0 = (static_cast<double>(i) * cs - r - a[j]) / da;
        double u1 = (static_cast<double>(i + 1) * cs + r - a[j]) / da;
        if (u0 > u1) std::swap(u0, u1);
        lo = std::max(lo, u0);
        hi = std::min(hi, u1);
        if (lo > hi) continue;
      }
      cur[j] = i;
      enumerate_cells(j + 1, lo, hi, a, b, r, cur);
    }
  }

  struct Entry {
    double proj;
    Bump<D> bump;
  };

  FieldInstance<D>* field_;
  double R_, length_, skin_;
  bool built_ = false;
  Vec<D> origin_{}, axis_{};
  std::vector<double> proj_;
  std::vector<Vec<D>> center_, weight_;
  std::vector<double> radial_coef_;
  std::vector<CellCoord<D>> cells_;
  std::vector<Vec<D>> centers_;
  std::vector<Entry> entries_;
  std::size_t rebuilds_ = 0;
};

}  // namespace rfflab
