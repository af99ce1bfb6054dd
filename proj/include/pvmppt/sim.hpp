#pragma once

// Fixed-step closed-loop simulation: environment profile, PV array, a
// single-state converter plant and one controller.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pvmppt/controllers.hpp"
#include "pvmppt/errors.hpp"
#include "pvmppt/io.hpp"
#include "pvmppt/pv_model.hpp"

namespace pvmppt {

enum class Interpolation { step, linear };

inline const char* to_string(Interpolation i) { return i == Interpolation::step ? "step" : "linear"; }

struct Breakpoint {
  double time = 0.0;  // s
  EnvSample env;
};

struct EnvProfile {
  double duration = 0.0;  // s
  std::vector<Breakpoint> breakpoints;
  Interpolation interpolation = Interpolation::linear;

  void validate() const {
    if (!(duration >= 0.0)) throw ConfigError("profile duration must be >= 0");
    if (breakpoints.empty()) throw ConfigError("profile needs at least one breakpoint");
    if (breakpoints.front().time != 0.0) throw ConfigError("profile must start at t = 0");
    for (std::size_t k = 1; k < breakpoints.size(); ++k) {
      if (!(breakpoints[k].time > breakpoints[k - 1].time)) {
        throw ConfigError("profile breakpoints must be strictly increasing in time");
      }
      if (breakpoints[k].env.g.size() != breakpoints[0].env.g.size()) {
        throw ConfigError("profile breakpoints disagree on the substring count");
      }
    }
  }

  /// Environment at time t; the last breakpoint holds past its time.
  EnvSample at(double t) const {
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t,
                               [](double x, const Breakpoint& b) { return x < b.time; });
    if (it == breakpoints.begin()) return breakpoints.front().env;
    const Breakpoint& a = *(it - 1);
    if (interpolation == Interpolation::step || it == breakpoints.end()) return a.env;
    const Breakpoint& b = *it;
    const double w = (t - a.time) / (b.time - a.time);
    EnvSample out = a.env;
    for (std::size_t k = 0; k < out.g.size(); ++k) out.g[k] = a.env.g[k] + w * (b.env.g[k] - a.env.g[k]);
    out.t = a.env.t + w * (b.env.t - a.env.t);
    return out;
  }
};

struct PlantConfig {
  double dt = 1e-3;            // s
  double pi_kp = 0.02;         // V/W
  double pi_ki = 2.0;          // V/(W s)
  double v_slew_max = 200.0;   // V/s
  double loss_fraction = 0.02;
  double v_start_fraction = 0.9;  // initial voltage as a fraction of v_oc at t = 0

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (!(pi_kp >= 0.0) || !(pi_ki >= 0.0)) throw ConfigError("PI gains must be >= 0");
    if (!(v_slew_max > 0.0)) throw ConfigError("v_slew_max must be > 0");
    if (!(loss_fraction >= 0.0 && loss_fraction < 0.1)) throw ConfigError("loss_fraction must be in [0, 0.1)");
    if (!(v_start_fraction >= 0.0 && v_start_fraction <= 1.0)) throw ConfigError("v_start_fraction must be in [0, 1]");
  }
};

struct TraceRow {
  double t = 0.0;
  double g = 0.0;  // aggregate
  double t_k = 0.0;
  double v = 0.0;
  double i = 0.0;
  double p_actual = 0.0;
  double p_ref = 0.0;  // NaN for voltage-reference controllers
  double p_mpp = 0.0;
};

struct Metrics {
  double tracking_efficiency = 0.0;
  double steady_state_ripple = 0.0;
  double settle_time = 0.0;
};

struct SimTrace {
  double dt = 0.0;
  std::vector<TraceRow> rows;
  Metrics metrics;
};

/// (max - min) / mean, or 0 when the mean is not positive.
inline double ripple(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  return mean > 0.0 ? (*hi - *lo) / mean : 0.0;
}

inline Metrics metrics(const SimTrace& trace) {
  const auto& rows = trace.rows;
  if (rows.empty()) throw EmptyTrace();
  Metrics m;
  double got = 0.0;
  double avail = 0.0;
  for (const TraceRow& r : rows) {
    got += r.p_actual * trace.dt;
    avail += r.p_mpp * trace.dt;
  }
  m.tracking_efficiency = avail > 0.0 ? got / avail : 0.0;

  const std::size_t tail = rows.size() - std::max<std::size_t>(1, rows.size() / 5);
  std::vector<double> p;
  p.reserve(rows.size() - tail);
  for (std::size_t k = tail; k < rows.size(); ++k) p.push_back(rows[k].p_actual);
  m.steady_state_ripple = ripple(p);

  double mean = 0.0;
  for (double x : p) mean += x;
  mean /= static_cast<double>(p.size());
  std::size_t settled = 0;  // first row of the final in-band stretch
  for (std::size_t k = rows.size(); k-- > 0;) {
    if (std::abs(rows[k].p_actual - mean) > 0.02 * std::abs(mean)) {
      settled = k + 1;
      break;
    }
  }
  m.settle_time = rows[std::min(settled, rows.size() - 1)].t;
  return m;
}

/// Instantaneous oracle MPP power for every tick of a run; shareable across
/// controllers simulated on the same profile.
inline std::vector<double> oracle_series(const EnvProfile& env, const PvArrayConfig& array, double dt) {
  env.validate();
  const auto n = static_cast<std::size_t>(std::llround(env.duration / dt));
  std::vector<double> out(n);
  std::optional<EnvSample> last;
  double last_p = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    EnvSample e = env.at(static_cast<double>(k) * dt);
    if (!last || !(e == *last)) {
      last_p = find_mpp_oracle(e, array).p;
      last = std::move(e);
    }
    out[k] = last_p;
  }
  return out;
}

/// Runs the closed loop. The controller is stepped on its own sample period
/// and its last command is held in between. `oracle` may carry a
/// precomputed oracle_series for the same profile and dt.
inline SimTrace run(const EnvProfile& env, const PlantConfig& plant, Controller& controller,
                    const PvArrayConfig& array, const std::vector<double>* oracle = nullptr) {
  env.validate();
  plant.validate();
  if (!array.calibrated()) throw ConfigError("array configuration is not calibrated");
  validate_env(env.breakpoints.front().env, array);

  SimTrace trace;
  trace.dt = plant.dt;
  const auto n = static_cast<std::size_t>(std::llround(env.duration / plant.dt));
  if (oracle && oracle->size() != n) throw ConfigError("oracle series does not match the run length");
  const auto period = std::max<long>(1, std::lround(controller.sample_period() / plant.dt));
  trace.rows.reserve(n);

  std::optional<EnvSample> cached_env;
  std::optional<ArrayModel> model;
  double p_mpp = 0.0;
  double v = 0.0;
  double integ = 0.0;
  double i_prev = std::numeric_limits<double>::quiet_NaN();
  ControllerCommand cmd;

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * plant.dt;
    EnvSample e = env.at(t);
    if (!cached_env || !(e == *cached_env)) {
      validate_env(e, array);
      model.emplace(e, array);
      if (!oracle) p_mpp = find_mpp_oracle(e, array).p;
      cached_env = std::move(e);
    }
    if (oracle) p_mpp = (*oracle)[k];
    const double voc = model->voc();
    if (k == 0) {
      v = plant.v_start_fraction * voc;
      integ = v;
    }
    v = std::clamp(v, 0.0, voc);

    double i = 0.0;
    try {
      i = model->current(v, i_prev);
    } catch (const NonConvergence& ex) {
      throw SimulationError(k, ex.what());
    }
    i_prev = i;
    const double p = v * i;
    const SensorReading sensor{cached_env->aggregate_g(), cached_env->t};

    if (k % static_cast<std::size_t>(period) == 0) {
      try {
        cmd = controller.step(Measurement{t, v, i, p, sensor});
      } catch (const BoundsViolation& ex) {
        throw SimulationError(k, ex.what());
      }
      if (cmd.kind != controller.kind()) throw SimulationError(k, "controller changed command kind");
    }

    trace.rows.push_back({t, sensor.g, sensor.t, v, i, p * (1.0 - plant.loss_fraction),
                          cmd.kind == CommandKind::power_reference ? cmd.value
                                                                   : std::numeric_limits<double>::quiet_NaN(),
                          p_mpp});

    double target = 0.0;
    if (cmd.kind == CommandKind::voltage_reference) {
      target = cmd.value;
    } else {
      const double err = cmd.value - p;
      integ = std::clamp(integ - plant.pi_ki * err * plant.dt, 0.0, voc);
      target = integ - plant.pi_kp * err;
    }
    const double max_dv = plant.v_slew_max * plant.dt;
    v = std::clamp(v + std::clamp(target - v, -max_dv, max_dv), 0.0, voc);
  }

  if (!trace.rows.empty()) trace.metrics = metrics(trace);
  return trace;
}

// ---------------------------------------------------------------------------
// Operating locus

struct LocusPoint {
  double v = 0.0;
  double p = 0.0;  // array terminal power
};

/// Trace projected onto the P-V plane, optionally from time t_from on.
inline std::vector<LocusPoint> operating_locus(const SimTrace& trace, double t_from = 0.0) {
  if (trace.rows.empty()) throw EmptyTrace();
  std::vector<LocusPoint> out;
  out.reserve(trace.rows.size());
  for (const TraceRow& r : trace.rows) {
    if (r.t >= t_from) out.push_back({r.v, r.v * r.i});
  }
  return out;
}

/// Number of direction changes of v along the locus, ignoring wiggles
/// smaller than `hysteresis` volts.
inline int voltage_reversals(std::span<const LocusPoint> locus, double hysteresis = 1e-3) {
  if (locus.empty()) return 0;
  int reversals = 0;
  int dir = 0;
  double anchor = locus.front().v;  // extreme value in the current direction
  for (const LocusPoint& pt : locus) {
    const double d = pt.v - anchor;
    if (dir == 0) {
      if (std::abs(d) > hysteresis) {
        dir = d > 0.0 ? 1 : -1;
        anchor = pt.v;
      }
    } else if (dir * d > 0.0) {
      anchor = pt.v;
    } else if (std::abs(d) > hysteresis) {
      ++reversals;
      dir = -dir;
      anchor = pt.v;
    }
  }
  return reversals;
}

// ---------------------------------------------------------------------------
// Scenarios

inline EnvProfile scenario_constant(double g, double t_k, double duration, int n_substrings) {
  EnvProfile p;
  p.duration = duration;
  p.interpolation = Interpolation::step;
  p.breakpoints = {{0.0, EnvSample::uniform(g, t_k, n_substrings)}};
  p.validate();
  return p;
}

/// Linear irradiance ramp between 1 s constant pads.
inline EnvProfile scenario_ramp(double g_from, double g_to, double ramp_seconds, double t_k, int n_substrings) {
  if (!(ramp_seconds > 0.0)) throw ConfigError("ramp_seconds must be > 0");
  EnvProfile p;
  p.duration = ramp_seconds + 2.0;
  p.interpolation = Interpolation::linear;
  p.breakpoints = {{0.0, EnvSample::uniform(g_from, t_k, n_substrings)},
                   {1.0, EnvSample::uniform(g_from, t_k, n_substrings)},
                   {1.0 + ramp_seconds, EnvSample::uniform(g_to, t_k, n_substrings)},
                   {2.0 + ramp_seconds, EnvSample::uniform(g_to, t_k, n_substrings)}};
  p.validate();
  return p;
}

/// First half of the substrings at g_full, the rest at g_shaded.
inline EnvProfile scenario_partial_shade(double g_full, double g_shaded, double t_k, double duration,
                                         int n_substrings) {
  if (n_substrings < 2 || n_substrings % 2 != 0) throw ConfigError("partial shading needs an even substring count");
  EnvSample e;
  e.t = t_k;
  e.g.assign(static_cast<std::size_t>(n_substrings), g_full);
  std::fill(e.g.begin() + n_substrings / 2, e.g.end(), g_shaded);
  EnvProfile p;
  p.duration = duration;
  p.interpolation = Interpolation::step;
  p.breakpoints = {{0.0, e}};
  p.validate();
  return p;
}

/// Step-and-ramp profile over 4 s. Irradiance holds at 1000 W/m^2 for 1 s,
/// then jumps between cloud levels every 100 ms until 2 s (2 ms edges),
/// ramps to 700 W/m^2 by 3 s and holds. Temperature rises 298.15 K to
/// 308.15 K between 1 s and 3 s.
inline EnvProfile scenario_case1(int n_substrings) {
  const auto temp = [](double t) { return t <= 1.0 ? 298.15 : t >= 3.0 ? 308.15 : 298.15 + 5.0 * (t - 1.0); };
  const auto at = [&](double t, double g) { return Breakpoint{t, EnvSample::uniform(g, temp(t), n_substrings)}; };
  constexpr double kLevels[] = {800.0, 950.0, 700.0, 900.0, 750.0, 850.0};
  constexpr double kEdge = 0.002;
  EnvProfile p;
  p.duration = 4.0;
  p.interpolation = Interpolation::linear;
  p.breakpoints = {at(0.0, 1000.0)};
  double g = 1000.0;
  for (int k = 0; k < 10; ++k) {
    const double t = 1.0 + 0.1 * k;
    p.breakpoints.push_back(at(t, g));
    g = kLevels[k % 6];
    p.breakpoints.push_back(at(t + kEdge, g));
  }
  p.breakpoints.push_back(at(2.0, g));
  p.breakpoints.push_back(at(3.0, 700.0));
  p.breakpoints.push_back(at(4.0, 700.0));
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Trace and metrics serialization

inline constexpr const char* kTraceHeader = "t_s,g_wpm2,t_k,v_v,i_a,p_w,p_ref_w,p_mpp_w";

inline std::string trace_csv(const SimTrace& trace) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const TraceRow& r : trace.rows) {
    for (double x : {r.t, r.g, r.t_k, r.v, r.i, r.p_actual, r.p_ref}) {
      out += format_double(x);
      out += ',';
    }
    out += format_double(r.p_mpp);
    out += '\n';
  }
  return out;
}

inline std::string locus_csv(std::span<const LocusPoint> locus) {
  std::string out = "v_v,p_w\n";
  for (const LocusPoint& pt : locus) out += format_double(pt.v) + "," + format_double(pt.p) + "\n";
  return out;
}

}  // namespace pvmppt
