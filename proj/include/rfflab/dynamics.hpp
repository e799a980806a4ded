#pragma once

// Particle dynamics X'' = F(X) in a single field (process X) and in the
// renewal construction that switches to an independent field copy at the
// stopping times tau_n (processes Y and Z), with per-segment diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "rfflab/field.hpp"
#include "rfflab/field_tube.hpp"
#include "rfflab/vec.hpp"

namespace rfflab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <int D>
struct ParticleState {
  double t = 0.0;
  Vec<D> X{};
  Vec<D> V{};

  double energy() const { return 0.5 * norm2(V); }
};

struct IntegratorConfig {
  /// Spatial step bound h0; the time step is h0 / max(|V|, v_min).
  /// Zero means 0.05 R of the field in use.
  double h0 = 0.0;
  double v_min = 1.0;
  double t_max = 1000.0;
  /// Observation times, strictly increasing; samples are emitted exactly there.
  std::vector<double> observe{};
  /// Time spent below v_min after which a run is labeled trapped.
  double trap_patience = 100.0;
  std::int64_t max_segments = 1'000'000;
  /// Cross force-free stretches in a single exact straight-line step.
  bool exact_free_flight = false;
  /// Record the path whenever it has moved this far since the last dense
  /// point (0 = off). Used by the self-intersection scan; keep it below R
  /// minus the spatial step so that consecutive points are less than R apart.
  double dense_spacing = 0.0;

  double spatial_step(double radius) const { return h0 > 0.0 ? h0 : 0.05 * radius; }
};

/// Geometric observation schedule first, first*ratio, ... capped by t_max,
/// with t_max appended if it is not already on the grid.
inline std::vector<double> geometric_schedule(double t_max, double first = 1.0, double ratio = 2.0) {
  if (!(first > 0.0) || !(ratio > 1.0)) throw std::invalid_argument("geometric_schedule: need first > 0, ratio > 1");
  std::vector<double> out;
  for (double t = first; t < t_max * (1.0 - 1e-12); t *= ratio) out.push_back(t);
  out.push_back(t_max);
  return out;
}

/// Tracker of the dyadic level process: level m starts at the nearest
/// power of two to |v0|; a crossing is logged when the speed reaches
/// 2^(m+1) or 2^(m-1).
struct DyadicCrossing {
  double t = 0.0;
  int from = 0;
  int to = 0;
};

class DyadicTracker {
 public:
  DyadicTracker() = default;
  explicit DyadicTracker(double speed, double t0 = 0.0) { reset(speed, t0); }

  void reset(double speed, double t0 = 0.0) {
    level_ = static_cast<int>(std::floor(std::log2(std::max(speed, 1e-300)) + 0.5));
    start_level_ = level_;
    (void)t0;
  }

  void update(double t, double speed) {
    while (speed >= std::ldexp(1.0, level_ + 1)) {
      log_.push_back({t, level_, level_ + 1});
      ++level_;
    }
    while (speed <= std::ldexp(1.0, level_ - 1)) {
      log_.push_back({t, level_, level_ - 1});
      --level_;
    }
  }

  int level() const { return level_; }
  int start_level() const { return start_level_; }
  const std::vector<DyadicCrossing>& log() const { return log_; }
  std::vector<DyadicCrossing> take_log() { return std::move(log_); }

 private:
  int level_ = 0;
  int start_level_ = 0;
  std::vector<DyadicCrossing> log_;
};

template <int D>
struct DensePoint {
  double t;
  Vec<D> X;
  std::int64_t segment;
};

template <int D>
struct Trajectory {
  std::vector<ParticleState<D>> samples;
  std::vector<DensePoint<D>> dense;
  std::vector<DyadicCrossing> crossings;
  int start_level = 0;
  bool trapped = false;
  bool truncated = false;
  double final_time = 0.0;
  std::int64_t steps = 0;
  /// Largest per-step displacement seen (for the step-size contract).
  double max_displacement = 0.0;
};

// ---------------------------------------------------------------------------
// Velocity Verlet

/// One velocity-Verlet step given the force at the current position.
/// Returns the new state and writes the force at the new position.
template <int D, class ForceFn>
inline ParticleState<D> verlet_step(const ParticleState<D>& s, const Vec<D>& force_here, ForceFn&& force, double h,
                                    Vec<D>& force_next) {
  ParticleState<D> out;
  out.X = s.X + s.V * h + force_here * (0.5 * h * h);
  force_next = force(out.X);
  out.V = s.V + (force_here + force_next) * (0.5 * h);
  out.t = s.t + h;
  return out;
}

template <int D>
inline ParticleState<D> verlet_step(const ParticleState<D>& s, FieldInstance<D>& field, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("verlet_step: h must be positive");
  Vec<D> f_next;
  return verlet_step(s, field.force_at(s.X), [&](const Vec<D>& x) { return field.force_at(x); }, h, f_next);
}

// ---------------------------------------------------------------------------
// Shared integration driver

namespace detail {

template <int D>
class Driver {
 public:
  Driver(FieldInstance<D>& field, const IntegratorConfig& cfg, const ParticleState<D>& start)
      : cfg_(cfg), tube_(std::make_unique<FieldTube<D>>(field)), state_(start) {
    h0_ = cfg.spatial_step(field.radius());
    refresh_force();
  }

  void switch_field(FieldInstance<D>& field) {
    tube_ = std::make_unique<FieldTube<D>>(field);
    refresh_force();
  }

  const ParticleState<D>& state() const { return state_; }
  double h0() const { return h0_; }

  /// Advances by one step that does not pass `target`; returns true if the
  /// step landed exactly on target. Free flight is allowed when `allow_jump`.
  bool advance(double target, bool allow_jump, double jump_cap_distance) {
    const double speed = norm(state_.V);
    const double remaining = target - state_.t;
    if (allow_jump && cfg_.exact_free_flight && !inside_ && speed > 0.0) {
      const double cap = std::min(remaining * speed, jump_cap_distance);
      const double dist = tube_->free_path(state_.X, state_.V / speed, cap);
      if (dist > h0_) {
        const bool lands = dist >= remaining * speed * (1.0 - 1e-15);
        const double dt = lands ? remaining : dist / speed;
        const Vec<D> X_old = state_.X;
        state_.X += state_.V * dt;
        state_.t = lands ? target : state_.t + dt;
        max_disp_ = std::max(max_disp_, norm(state_.X - X_old));
        refresh_force();
        ++steps_;
        return lands;
      }
    }
    double h = h0_ / std::max(speed, cfg_.v_min);
    bool lands = false;
    if (h >= remaining) {
      h = remaining;
      lands = true;
    }
    Vec<D> f_next;
    const Vec<D> heading = state_.V;
    bool inside_next = false;
    auto force = [&](const Vec<D>& x) {
      auto e = tube_->evaluate(x, heading);
      inside_next = e.inside_support;
      return e.force;
    };
    ParticleState<D> next = verlet_step(state_, force_, force, h, f_next);
    if (lands) next.t = target;
    max_disp_ = std::max(max_disp_, norm(next.X - state_.X));
    state_ = next;
    force_ = f_next;
    inside_ = inside_next;
    ++steps_;
    return lands;
  }

  std::int64_t steps() const { return steps_; }
  double max_displacement() const { return max_disp_; }

 private:
  void refresh_force() {
    auto e = tube_->evaluate(state_.X, state_.V);
    force_ = e.force;
    inside_ = e.inside_support;
  }

  IntegratorConfig cfg_;
  std::unique_ptr<FieldTube<D>> tube_;
  ParticleState<D> state_;
  Vec<D> force_{};
  bool inside_ = false;
  double h0_ = 0.05;
  std::int64_t steps_ = 0;
  double max_disp_ = 0.0;
};

inline void check_schedule(const IntegratorConfig& cfg) {
  if (!(cfg.t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  for (std::size_t i = 0; i < cfg.observe.size(); ++i) {
    if (cfg.observe[i] < 0.0 || cfg.observe[i] > cfg.t_max) throw std::invalid_argument("observation time outside [0, t_max]");
    if (i > 0 && !(cfg.observe[i] > cfg.observe[i - 1])) throw std::invalid_argument("observation schedule must be strictly increasing");
  }
}

/// Bookkeeping common to X and Y/Z runs: observations, trapping, dyadic log.
template <int D>
struct Recorder {
  const IntegratorConfig& cfg;
  Trajectory<D>& out;
  DyadicTracker dyadic;
  std::size_t next_obs = 0;
  double slow_time = 0.0;
  Vec<D> last_dense{};

  Recorder(const IntegratorConfig& c, Trajectory<D>& o, const ParticleState<D>& start)
      : cfg(c), out(o), dyadic(norm(start.V)), last_dense(start.X) {
    out.start_level = dyadic.start_level();
    if (cfg.dense_spacing > 0.0) out.dense.push_back({start.t, start.X, 0});
    if (next_obs < cfg.observe.size() && cfg.observe[next_obs] == start.t) {
      out.samples.push_back(start);
      ++next_obs;
    }
  }

  double next_target() const {
    return next_obs < cfg.observe.size() ? std::min(cfg.observe[next_obs], cfg.t_max) : cfg.t_max;
  }

  void after_step(const ParticleState<D>& s, double h, std::int64_t segment, bool force_dense = false) {
    const double speed = norm(s.V);
    if (speed < cfg.v_min) {
      slow_time += h;
      if (slow_time > cfg.trap_patience) out.trapped = true;
    } else {
      slow_time = 0.0;
    }
    dyadic.update(s.t, speed);
    if (next_obs < cfg.observe.size() && s.t == cfg.observe[next_obs]) {
      out.samples.push_back(s);
      ++next_obs;
    }
    if (cfg.dense_spacing > 0.0 && (force_dense || norm2(s.X - last_dense) >= cfg.dense_spacing * cfg.dense_spacing)) {
      out.dense.push_back({s.t, s.X, segment});
      last_dense = s.X;
    }
  }

  void finish(const ParticleState<D>& s) {
    out.final_time = s.t;
    out.crossings = dyadic.take_log();
  }
};

}  // namespace detail

/// Integrates X'' = F(X) in one field from X(0) = 0, V(0) = v0.
template <int D>
Trajectory<D> simulate_x(const Vec<D>& v0, FieldInstance<D>& field, const IntegratorConfig& cfg) {
  if (!(norm(v0) > 0.0)) throw std::invalid_argument("simulate_x: |v0| must be positive");
  detail::check_schedule(cfg);
  Trajectory<D> out;
  ParticleState<D> start{0.0, Vec<D>{}, v0};
  detail::Driver<D> drv(field, cfg, start);
  detail::Recorder<D> rec(cfg, out, start);
  const double jump_cap = cfg.dense_spacing > 0.0 ? cfg.dense_spacing : std::numeric_limits<double>::infinity();
  while (drv.state().t < cfg.t_max) {
    const double t_before = drv.state().t;
    drv.advance(rec.next_target(), true, jump_cap);
    rec.after_step(drv.state(), drv.state().t - t_before, 0);
  }
  rec.finish(drv.state());
  out.steps = drv.steps();
  out.max_displacement = drv.max_displacement();
  return out;
}

template <int D>
Trajectory<D> simulate_x(const Vec<D>& v0, const BumpFamily& family, std::uint64_t seed, const IntegratorConfig& cfg) {
  FieldInstance<D> field(family, seed, 0);
  return simulate_x(v0, field, cfg);
}

// ---------------------------------------------------------------------------
// Renewal processes

enum class RenewalVariant { Y, Z };

inline std::string_view to_string(RenewalVariant v) { return v == RenewalVariant::Y ? "Y" : "Z"; }

/// Bit flags carried by a segment record.
enum SegmentFlag : unsigned {
  kFlagNearIntersection = 1u << 0,
  kFlagConeViolation = 1u << 1,
  kFlagEtaUndefined = 1u << 2,
  kFlagOpen = 1u << 3,
};

/// Segment n covers [tau_n, tau_{n+1}] in field n (excluded ball at Y_n).
template <int D>
struct SegmentRecord {
  std::int64_t n = 0;
  double tau = 0.0;
  Vec<D> Y{};
  Vec<D> v{};
  double tau_next = kNaN;
  /// First time after tau_n + l/|v_n| at which the straight line z_n has
  /// no field-n point within 2R (the free-flight analogue of tau_{n+1}).
  double eta = kNaN;
  /// xi_n(tau_{n+1}): force of field n integrated along z_n.
  Vec<D> xi{};
  double xi_norm = kNaN;
  /// sup over the segment of |Y'(t) - v_n|.
  double max_dev = 0.0;
  unsigned flags = 0;
};

template <int D>
struct RenewalRun {
  RenewalVariant variant = RenewalVariant::Y;
  Trajectory<D> path;
  std::vector<SegmentRecord<D>> segments;
  double l = 0.0;
};

inline double renewal_length(double radius) { return 4.0 * radius + 1.0; }

/// Straight-line diagnostics of a completed segment: eta_n, xi_n(tau_{n+1})
/// by trapezoid quadrature with the integration step, and the flag for an
/// undefined eta (search capped at 10x the segment duration).
template <int D>
void free_flight_diagnostics(SegmentRecord<D>& seg, FieldInstance<D>& field, double h0, double v_min) {
  if (!std::isfinite(seg.tau_next)) throw std::invalid_argument("free_flight_diagnostics: segment not complete");
  const double speed = norm(seg.v);
  const double h = h0 / std::max(speed, v_min);
  const double l = renewal_length(field.radius());
  auto z = [&](double t) { return seg.Y + seg.v * (t - seg.tau); };

  const double t_adm = seg.tau + l / std::max(speed, 1e-300);
  const double cap = seg.tau + 10.0 * (seg.tau_next - seg.tau);
  seg.eta = kNaN;
  for (double t = t_adm; t <= cap; t += h) {
    if (field.gap_condition(z(t))) {
      seg.eta = t;
      break;
    }
  }
  if (std::isnan(seg.eta)) seg.flags |= kFlagEtaUndefined;

  FieldTube<D> tube(field);
  const Vec<D> heading = speed > 0.0 ? seg.v : Vec<D>::unit(0);
  Vec<D> acc{};
  double t = seg.tau;
  Vec<D> f_prev = tube.force(z(t), heading);
  while (t < seg.tau_next) {
    const double dt = std::min(h, seg.tau_next - t);
    const double t_next = (t + dt >= seg.tau_next) ? seg.tau_next : t + dt;
    const Vec<D> f_next = tube.force(z(t_next), heading);
    acc += (f_prev + f_next) * (0.5 * (t_next - t));
    f_prev = f_next;
    t = t_next;
  }
  seg.xi = acc;
  seg.xi_norm = norm(acc);
}

/// Integrates the renewal process (Y, or Z when the initial field also has
/// an excluded ball at the origin).
template <int D>
RenewalRun<D> simulate_renewal(const Vec<D>& v0, const BumpFamily& family, std::uint64_t seed,
                               const IntegratorConfig& cfg, RenewalVariant variant) {
  if (!(norm(v0) > 0.0)) throw std::invalid_argument("simulate_renewal: |v0| must be positive");
  detail::check_schedule(cfg);
  const double R = family.profile.radius;
  RenewalRun<D> run;
  run.variant = variant;
  run.l = renewal_length(R);

  std::optional<Exclusion<D>> excl0;
  if (variant == RenewalVariant::Z) excl0 = Exclusion<D>{Vec<D>{}, 2.0 * R};
  auto field = std::make_unique<FieldInstance<D>>(family, seed, 0, excl0);

  ParticleState<D> start{0.0, Vec<D>{}, v0};
  detail::Driver<D> drv(*field, cfg, start);
  detail::Recorder<D> rec(cfg, run.path, start);
  const double jump_cap = cfg.dense_spacing > 0.0 ? cfg.dense_spacing : std::numeric_limits<double>::infinity();

  SegmentRecord<D> seg;
  seg.n = 0;
  seg.tau = 0.0;
  seg.Y = start.X;
  seg.v = v0;
  double t_adm = run.l / norm(v0);

  while (drv.state().t < cfg.t_max) {
    const double t_before = drv.state().t;
    const bool before_adm = t_before < t_adm;
    const double target = before_adm ? std::min(rec.next_target(), t_adm) : rec.next_target();
    drv.advance(target, before_adm, jump_cap);
    const auto& s = drv.state();
    seg.max_dev = std::max(seg.max_dev, norm(s.V - seg.v));

    bool switched = false;
    if (s.t >= t_adm && field->gap_condition(s.X)) {
      switched = true;
      seg.tau_next = s.t;
      free_flight_diagnostics(seg, *field, drv.h0(), cfg.v_min);
      run.segments.push_back(seg);
      if (static_cast<std::int64_t>(run.segments.size()) >= cfg.max_segments) {
        rec.after_step(s, s.t - t_before, seg.n, true);
        run.path.truncated = true;
        break;
      }
      const std::int64_t n = seg.n + 1;
      field = std::make_unique<FieldInstance<D>>(family, seed, n, Exclusion<D>{s.X, 2.0 * R});
      drv.switch_field(*field);
      seg = SegmentRecord<D>{};
      seg.n = n;
      seg.tau = s.t;
      seg.Y = s.X;
      seg.v = s.V;
      t_adm = s.t + run.l / std::max(norm(s.V), 1e-300);
    }
    rec.after_step(s, s.t - t_before, seg.n, switched);
  }
  if (!run.path.truncated) {
    seg.flags |= kFlagOpen;
    run.segments.push_back(seg);
  }
  rec.finish(drv.state());
  run.path.steps = drv.steps();
  run.path.max_displacement = drv.max_displacement();
  return run;
}

// ---------------------------------------------------------------------------

/// Converts samples between X'' = F(X) and x'' = eps F(x):
/// (t, X, V) -> (t / sqrt(eps), X, sqrt(eps) V).
template <int D>
std::vector<ParticleState<D>> rescale_kp(const std::vector<ParticleState<D>>& samples, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("rescale_kp: eps must be positive");
  const double r = std::sqrt(eps);
  std::vector<ParticleState<D>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.t / r, s.X, s.V * r});
  return out;
}

}  // namespace rfflab
