#pragma once

// Single-diode PV array model with per-substring bypass diodes, datasheet
// calibration, and a brute-force maximum-power-point oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "pvmppt/errors.hpp"
#include "pvmppt/golden_section.hpp"

namespace pvmppt {

inline constexpr double kBoltzmann = 1.380649e-23;       // J/K
inline constexpr double kElectronCharge = 1.602176634e-19;  // C
inline constexpr double kStcIrradiance = 1000.0;          // W/m^2
inline constexpr double kStcTemperature = 298.15;         // K

inline double thermal_voltage(double t_kelvin) {
  return kBoltzmann * t_kelvin / kElectronCharge;
}

/// Datasheet values plus the fitted single-diode parameters of the array.
///
/// The first block is what a datasheet provides; `calibrate` fills in the
/// second block. Defaults are the 10 V / 15 A / 115.5 W case-study array.
struct PvArrayConfig {
  double v_oc = 10.0;
  double i_sc = 15.0;
  double v_mpp = 8.25;
  double p_max = 115.5;
  double i_sc_stc = 15.0;  // feeds the short-circuit estimate of the supervisor
  int n_substrings = 2;
  int cells_per_substring = 8;
  double temp_coeff_isc = 0.0005 * 15.0;   // A/K
  double temp_coeff_voc = -0.0023 * 10.0;  // V/K

  // Fitted by calibrate(). Zero means "not calibrated yet".
  double series_resistance = 0.0;  // whole array, ohms
  double diode_ideality = 0.0;
  double photo_current_stc = 0.0;       // A
  double saturation_current_stc = 0.0;  // A

  bool calibrated() const {
    return diode_ideality > 0.0 && photo_current_stc > 0.0 &&
           saturation_current_stc > 0.0;
  }
  int total_cells() const { return n_substrings * cells_per_substring; }
  double impp() const { return p_max / v_mpp; }
};

/// Irradiance per substring (W/m^2) and cell temperature (K).
struct EnvSample {
  std::vector<double> g;
  double t = kStcTemperature;

  static EnvSample uniform(double irradiance, double t_kelvin, int n_substrings) {
    return EnvSample{std::vector<double>(static_cast<std::size_t>(n_substrings), irradiance),
                     t_kelvin};
  }

  // Single pyranometer reading: area-weighted mean over equal substrings.
  double aggregate_g() const {
    if (g.empty()) return 0.0;
    return std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
  }

  bool operator==(const EnvSample&) const = default;
};

struct IvPoint {
  double v = 0.0;
  double i = 0.0;
  double p = 0.0;
};

inline void validate_env(const EnvSample& env, const PvArrayConfig& cfg) {
  if (static_cast<int>(env.g.size()) != cfg.n_substrings) {
    throw ConfigError("environment has " + std::to_string(env.g.size()) +
                      " irradiance values for " + std::to_string(cfg.n_substrings) +
                      " substrings");
  }
  for (double g : env.g) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("irradiance must be finite and >= 0");
  }
  if (!(env.t > 0.0) || !std::isfinite(env.t)) throw ConfigError("temperature must be > 0 K");
}

/// The array evaluated at one environment: per-substring photo-currents and
/// the shared diode parameters. Cheap to build, reused for curve sweeps.
class ArrayModel {
 public:
  static constexpr int kMaxNewtonIterations = 100;
  static constexpr double kCurrentTolerance = 1e-10;  // A, Newton step size at exit

  ArrayModel(const EnvSample& env, const PvArrayConfig& cfg) {
    if (!cfg.calibrated()) throw ConfigError("array config is not calibrated");
    validate_env(env, cfg);
    const double dt = env.t - kStcTemperature;
    const double n_sub = static_cast<double>(cfg.n_substrings);
    const double a_total =
        cfg.diode_ideality * cfg.total_cells() * thermal_voltage(env.t);
    const double isc_scale = 1.0 + cfg.temp_coeff_isc / cfg.i_sc * dt;
    const double voc_t = cfg.v_oc + cfg.temp_coeff_voc * dt;
    if (!(isc_scale > 0.0) || !(voc_t > 0.0)) {
      throw ConfigError("temperature outside the range of the temperature coefficients");
    }
    // Saturation current is pinned so the STC-irradiance open-circuit voltage
    // follows the datasheet temperature coefficient.
    i0_ = cfg.photo_current_stc * isc_scale / std::expm1(voc_t / a_total);
    a_sub_ = a_total / n_sub;
    rs_sub_ = cfg.series_resistance / n_sub;
    iph_.reserve(env.g.size());
    for (double g : env.g) iph_.push_back(cfg.photo_current_stc * isc_scale * g / kStcIrradiance);
    for (double iph : iph_) isc_.push_back(substring_short_circuit(iph));
    i_max_ = *std::max_element(isc_.begin(), isc_.end());
    iph_max_ = *std::max_element(iph_.begin(), iph_.end());
    voc_ = 0.0;
    for (double iph : iph_) voc_ += std::max(0.0, substring_voltage(iph, 0.0));
  }

  /// Open-circuit voltage at this environment.
  double voc() const { return voc_; }
  /// Current at zero terminal voltage (strongest substring, others bypassed).
  double isc() const { return i_max_; }
  double photo_current(std::size_t k) const { return iph_.at(k); }

  /// Terminal voltage for a given string current, with ideal bypass diodes.
  double voltage(double current) const {
    double v = 0.0;
    for (double iph : iph_) v += std::max(0.0, substring_voltage(iph, current));
    return v;
  }

  /// String current at terminal voltage v. `seed` is the Newton start.
  ///
  /// Newton runs on s = ln(Iph_max + I0 - I): the strongest substring's
  /// voltage is linear in s, which removes the log singularity near Isc.
  double current(double v, double seed = std::numeric_limits<double>::quiet_NaN()) const {
    if (v >= voc_) return 0.0;
    if (v <= 0.0) return i_max_;
    const double c = iph_max_ + i0_;
    double lo = std::log(c - i_max_);  // f(lo) <= 0
    double hi = std::log(c);           // f(hi) > 0
    double x = (std::isfinite(seed) && seed < c) ? std::log(c - seed)
                                                 : std::log(c - 0.5 * i_max_);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    for (int it = 0; it < kMaxNewtonIterations; ++it) {
      const double es = std::exp(x);
      const double current = c - es;
      double f = -v;
      double df = 0.0;
      for (double iph : iph_) {
        const double vk = substring_voltage(iph, current);
        if (vk > 0.0) {
          f += vk;
          df += es * (a_sub_ / (iph - current + i0_) + rs_sub_);
        }
      }
      if (std::abs(f) <= 1e-14 * voc_) return std::clamp(current, 0.0, i_max_);
      if (f > 0.0) {
        hi = x;
      } else {
        lo = x;
      }
      double next = (df > 0.0) ? x - f / df : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      // Step size expressed in amperes.
      const double step = std::abs(std::exp(next) - es);
      x = next;
      if (step < kCurrentTolerance || std::exp(hi) - std::exp(lo) < kCurrentTolerance) {
        return std::clamp(c - std::exp(x), 0.0, i_max_);
      }
    }
    throw NonConvergence("array current did not converge at v = " + std::to_string(v));
  }

  double power(double v) const { return v * current(v); }

 private:
  // V_k(I) = a ln((Iph - I)/I0 + 1) - I Rs; -inf once the substring cannot
  // carry the current at all.
  double substring_voltage(double iph, double current) const {
    const double arg = (iph - current) / i0_;
    if (arg <= -1.0) return -std::numeric_limits<double>::infinity();
    return a_sub_ * std::log1p(arg) - current * rs_sub_;
  }

  double substring_short_circuit(double iph) const {
    if (iph <= 0.0) return 0.0;
    // V_k is concave and decreasing, so Newton from the right converges
    // monotonically.
    double x = iph;
    for (int it = 0; it < kMaxNewtonIterations; ++it) {
      const double f = substring_voltage(iph, x);
      const double df = -a_sub_ / (iph - x + i0_) - rs_sub_;
      const double next = x - f / df;
      if (std::abs(next - x) < 1e-13 * std::max(1.0, iph)) return next;
      x = next;
    }
    throw NonConvergence("substring short-circuit current did not converge");
  }

  std::vector<double> iph_;
  std::vector<double> isc_;
  double i0_ = 0.0;
  double a_sub_ = 0.0;
  double rs_sub_ = 0.0;
  double i_max_ = 0.0;
  double iph_max_ = 0.0;
  double voc_ = 0.0;
};

inline double array_current(double v, const EnvSample& env, const PvArrayConfig& cfg) {
  return ArrayModel(env, cfg).current(v);
}

inline double v_oc_adjusted(const EnvSample& env, const PvArrayConfig& cfg) {
  return ArrayModel(env, cfg).voc();
}

namespace detail {
// Newton seed for the next point of a uniform voltage sweep: linear
// extrapolation from the last two solved points.
inline double sweep_seed(const std::vector<IvPoint>& done, double first) {
  if (done.empty()) return first;
  if (done.size() == 1) return done.back().i;
  const IvPoint& a = done[done.size() - 2];
  const IvPoint& b = done.back();
  return b.i + (b.i - a.i);
}
}  // namespace detail

/// Uniformly sampled I-V/P-V curve over [0, Voc(env)].
inline std::vector<IvPoint> pv_curve(const EnvSample& env, const PvArrayConfig& cfg,
                                     std::size_t n_points) {
  if (n_points < 2) throw ConfigError("pv_curve needs at least 2 points");
  const ArrayModel model(env, cfg);
  std::vector<IvPoint> out;
  out.reserve(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    const double v = model.voc() * static_cast<double>(k) / static_cast<double>(n_points - 1);
    const double i = model.current(v, detail::sweep_seed(out, model.isc()));
    out.push_back({v, i, v * i});
  }
  return out;
}

/// Indices of interior local power maxima in a sampled curve.
inline std::vector<std::size_t> local_power_maxima(const std::vector<IvPoint>& curve) {
  std::vector<std::size_t> peaks;
  for (std::size_t k = 1; k + 1 < curve.size(); ++k) {
    if (curve[k].p > curve[k - 1].p && curve[k].p >= curve[k + 1].p) peaks.push_back(k);
  }
  return peaks;
}

struct MppPoint {
  double v = 0.0;
  double p = 0.0;
};

/// Global maximum of P(V): coarse grid, then golden-section refinement of
/// every local-maximum bracket.
inline MppPoint find_mpp_oracle(const EnvSample& env, const PvArrayConfig& cfg,
                                std::size_t grid_points = 1000, double v_tolerance = 1e-4) {
  const ArrayModel model(env, cfg);
  if (model.voc() <= 0.0) return {};
  std::vector<IvPoint> grid;
  grid.reserve(grid_points);
  for (std::size_t k = 0; k < grid_points; ++k) {
    const double v = model.voc() * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    const double i = model.current(v, detail::sweep_seed(grid, model.isc()));
    grid.push_back({v, i, v * i});
  }
  MppPoint best;
  auto consider = [&best](double v, double p) {
    if (p > best.p) best = {v, p};
  };
  for (std::size_t k : local_power_maxima(grid)) {
    consider(grid[k].v, grid[k].p);
    const double v = golden_section_maximize([&model](double x) { return model.power(x); },
                                             grid[k - 1].v, grid[k + 1].v, v_tolerance);
    consider(v, model.power(v));
  }
  return best;
}

/// Fits ideality, series resistance, photo-current and saturation current so
/// the model passes through (0, Isc), (Voc, 0) and (Vmpp, Pmax) with zero
/// slope of P(V) at the MPP, all at STC.
inline PvArrayConfig calibrate(PvArrayConfig ds) {
  if (!(ds.v_oc > 0 && ds.i_sc > 0 && ds.v_mpp > 0 && ds.p_max > 0 && ds.i_sc_stc > 0)) {
    throw CalibrationFailure("datasheet values must be positive");
  }
  if (ds.n_substrings < 1 || ds.cells_per_substring < 1) {
    throw CalibrationFailure("array needs at least one cell per substring");
  }
  if (!(ds.v_mpp < ds.v_oc)) throw CalibrationFailure("v_mpp must be below v_oc");
  const double impp = ds.impp();
  if (!(impp < ds.i_sc)) throw CalibrationFailure("p_max exceeds v_mpp * i_sc");

  const double voc = ds.v_oc;
  const double isc = ds.i_sc;
  const double vm = ds.v_mpp;
  struct Diode {
    double iph, i0;
  };
  auto diode = [&](double a, double rs) {
    const double i0 = isc / (std::exp(voc / a) - std::exp(isc * rs / a));
    return Diode{i0 * std::expm1(voc / a), i0};
  };
  // Residuals: the MPP lies on the curve, and dI/dV = -I/V there.
  auto residual = [&](double a, double rs) {
    const Diode d = diode(a, rs);
    const double e = std::exp((vm + impp * rs) / a);
    const double k = d.i0 * e / a;
    return std::array<double, 2>{d.iph - d.i0 * (e - 1.0) - impp,
                                 -k / (1.0 + rs * k) + impp / vm};
  };
  auto norm = [](const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); };

  double a = 1.3 * ds.total_cells() * thermal_voltage(kStcTemperature);
  double rs = 0.05 * (voc - vm) / impp;
  auto r = residual(a, rs);
  constexpr int kMaxIterations = 100;
  bool converged = false;
  for (int it = 0; it < kMaxIterations && !converged; ++it) {
    const double ha = 1e-7 * a;
    const double hr = 1e-7 * std::max(rs, 1e-4);
    const auto ra1 = residual(a + ha, rs);
    const auto ra0 = residual(a - ha, rs);
    const auto rr1 = residual(a, rs + hr);
    const auto rr0 = residual(a, rs - hr);
    const double j00 = (ra1[0] - ra0[0]) / (2 * ha), j10 = (ra1[1] - ra0[1]) / (2 * ha);
    const double j01 = (rr1[0] - rr0[0]) / (2 * hr), j11 = (rr1[1] - rr0[1]) / (2 * hr);
    const double det = j00 * j11 - j01 * j10;
    if (!std::isfinite(det) || det == 0.0) break;
    const double da = -(j11 * r[0] - j01 * r[1]) / det;
    const double drs = -(-j10 * r[0] + j00 * r[1]) / det;
    // Damped step: keep a positive and require the residual to shrink.
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
      const double a_new = a + lambda * da;
      const double rs_new = rs + lambda * drs;
      if (!(a_new > 0.0)) continue;
      const auto r_new = residual(a_new, rs_new);
      if (std::isfinite(r_new[0]) && std::isfinite(r_new[1]) && norm(r_new) < norm(r)) {
        a = a_new;
        rs = rs_new;
        r = r_new;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    converged = norm(r) < 1e-12;
  }
  if (!converged || !(rs >= 0.0) || !(a > 0.0)) {
    throw CalibrationFailure("single-diode fit did not converge for this datasheet");
  }

  const Diode d = diode(a, rs);
  PvArrayConfig out = ds;
  out.series_resistance = rs;
  out.diode_ideality = a / (ds.total_cells() * thermal_voltage(kStcTemperature));
  out.photo_current_stc = d.iph;
  out.saturation_current_stc = d.i0;

  // Post-check the fitted model against the datasheet points.
  const EnvSample stc = EnvSample::uniform(kStcIrradiance, kStcTemperature, ds.n_substrings);
  const ArrayModel model(stc, out);
  const double i0v = model.current(0.0);
  const double ivoc = model.current(ds.v_oc);
  const MppPoint mpp = find_mpp_oracle(stc, out);
  if (std::abs(i0v - isc) > 0.005 * isc || std::abs(ivoc) > 0.005 * isc ||
      std::abs(mpp.v - vm) > 0.01 * vm || std::abs(mpp.p - ds.p_max) > 0.01 * ds.p_max) {
    throw CalibrationFailure("fitted model misses the datasheet points");
  }
  return out;
}

/// Datasheet of the case-study array, calibrated.
inline const PvArrayConfig& default_array() {
  static const PvArrayConfig cfg = calibrate(PvArrayConfig{});
  return cfg;
}

}  // namespace pvmppt
