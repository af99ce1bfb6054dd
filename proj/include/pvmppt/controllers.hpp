#pragma once

// MPPT strategies behind one interface: perturb-and-observe, incremental
// conductance, and the network-reference controller with short-circuit
// supervision.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "pvmppt/errors.hpp"
#include "pvmppt/nn.hpp"
#include "pvmppt/pv_model.hpp"

namespace pvmppt {

/// What the controller sees: aggregate irradiance and temperature.
struct SensorReading {
  double g = 0.0;  // W/m^2
  double t = kStcTemperature;
};

struct Measurement {
  double time = 0.0;  // s
  double v = 0.0;
  double i = 0.0;
  double p = 0.0;  // v * i at the array terminals
  SensorReading env;

  static Measurement at(double v, double i, SensorReading env = {}, double time = 0.0) {
    return {time, v, i, v * i, env};
  }
};

enum class CommandKind { voltage_reference, power_reference };

struct ControllerCommand {
  CommandKind kind = CommandKind::voltage_reference;
  double value = 0.0;  // V or W
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual CommandKind kind() const = 0;
  /// Seconds between calls to step(); the simulator holds the last command
  /// in between.
  virtual double sample_period() const = 0;
  virtual ControllerCommand step(const Measurement& meas) = 0;
};

// ---------------------------------------------------------------------------
// Perturb and observe

struct PoState {
  bool started = false;
  double last_p = 0.0;
  double last_ref = 0.0;
  int direction = +1;
};

/// Hill climbing: keep the perturbation direction while power rises,
/// reverse it otherwise.
inline ControllerCommand po_step(PoState& st, const Measurement& meas, double v_step) {
  if (!st.started) {
    st.started = true;
    st.direction = +1;
    st.last_ref = meas.v;
  } else if (!(meas.p - st.last_p > 0.0)) {
    st.direction = -st.direction;
  }
  st.last_p = meas.p;
  st.last_ref = std::max(0.0, st.last_ref + st.direction * v_step);
  return {CommandKind::voltage_reference, st.last_ref};
}

struct PoConfig {
  double v_step = 0.05;  // V
  double period = 0.1;   // s
};

class PerturbObserveController : public Controller {
 public:
  explicit PerturbObserveController(PoConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.v_step > 0.0) || !(cfg_.period > 0.0)) throw ConfigError("P&O needs v_step > 0 and period > 0");
  }
  std::string name() const override { return "po"; }
  CommandKind kind() const override { return CommandKind::voltage_reference; }
  double sample_period() const override { return cfg_.period; }
  ControllerCommand step(const Measurement& meas) override { return po_step(state_, meas, cfg_.v_step); }
  const PoState& state() const { return state_; }

 private:
  PoConfig cfg_;
  PoState state_;
};

// ---------------------------------------------------------------------------
// Incremental conductance

struct IncCondState {
  bool started = false;
  double last_v = 0.0;
  double last_i = 0.0;
  double last_ref = 0.0;
};

/// Compares dI/dV with -I/V: inside the band `delta` hold, left of the MPP
/// step up, right of it step down. With dV = 0 the sign of dI decides.
inline ControllerCommand inc_cond_step(IncCondState& st, const Measurement& meas, double v_step, double delta) {
  int move = 0;
  if (!st.started) {
    st.started = true;
    st.last_ref = meas.v;
    move = +1;
  } else {
    const double dv = meas.v - st.last_v;
    const double di = meas.i - st.last_i;
    if (dv == 0.0) {
      if (di > 0.0) {
        move = +1;
      } else if (di < 0.0) {
        move = -1;
      }
    } else if (meas.v <= 0.0) {
      move = +1;
    } else {
      const double mismatch = di / dv + meas.i / meas.v;
      if (std::abs(mismatch) <= delta) {
        move = 0;
      } else {
        move = mismatch > 0.0 ? +1 : -1;
      }
    }
  }
  st.last_v = meas.v;
  st.last_i = meas.i;
  st.last_ref = std::max(0.0, st.last_ref + move * v_step);
  return {CommandKind::voltage_reference, st.last_ref};
}

struct IncCondConfig {
  double v_step = 0.05;  // V
  double delta = 0.015;  // S; 0.01 * i_sc / v_oc of the default array
  double period = 0.1;   // s

  static IncCondConfig for_array(const PvArrayConfig& cfg) {
    IncCondConfig c;
    c.delta = 0.01 * cfg.i_sc / cfg.v_oc;
    return c;
  }
};

class IncCondController : public Controller {
 public:
  explicit IncCondController(IncCondConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.v_step > 0.0) || !(cfg_.period > 0.0) || !(cfg_.delta >= 0.0)) {
      throw ConfigError("Inc-Cond needs v_step > 0, period > 0 and delta >= 0");
    }
  }
  std::string name() const override { return "inc-cond"; }
  CommandKind kind() const override { return CommandKind::voltage_reference; }
  double sample_period() const override { return cfg_.period; }
  ControllerCommand step(const Measurement& meas) override {
    return inc_cond_step(state_, meas, cfg_.v_step, cfg_.delta);
  }
  const IncCondState& state() const { return state_; }

 private:
  IncCondConfig cfg_;
  IncCondState state_;
};

// ---------------------------------------------------------------------------
// Network reference and supervision

/// MPP power predicted from the sensor reading, clamped to [0, 1.5 p_max].
inline double nn_reference(const Network& net, const SensorReading& env, double p_max) {
  net.norm.check_inputs(env.g, env.t);
  const double u = forward(net, {net.norm.g.normalize(env.g), net.norm.t.normalize(env.t)});
  return std::clamp(net.norm.p.denormalize(u), 0.0, 1.5 * p_max);
}

/// Short-circuit current estimate from irradiance and temperature (kelvin).
inline double compute_isc_real(const SensorReading& env, double i_sc_stc) {
  if (env.g <= 0.0) return 0.0;
  return i_sc_stc * std::pow(env.g / 1000.0, 1.01) * std::pow(env.t / 300.0, 0.2775);
}

struct SupervisionConfig {
  double gamma = 0.95;
  double threshold_frac = 0.94;
  int tick_period = 10;       // control periods between judgements
  double deadband_g = 10.0;   // W/m^2
  double deadband_t = 1.0;    // K

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
    if (!(threshold_frac > 0.0)) throw ConfigError("threshold_frac must be > 0");
    if (tick_period < 1) throw ConfigError("supervision tick period must be >= 1");
  }
};

struct SupervisionState {
  double y_cor = 0.0;
  bool triggered = false;
  SensorReading anchor;  // sensor reading when the episode started
  int attenuations = 0;  // in the current episode
};

/// One supervision judgement. While the array current exceeds
/// threshold_frac * I_sc_real the reference is attenuated by gamma, once per
/// call. After the current recovers the attenuated value is held until the
/// sensed environment leaves the dead-band around the episode's start.
inline double supervise(SupervisionState& sup, double y, const Measurement& meas, const SupervisionConfig& cfg,
                        double i_sc_stc) {
  if (sup.triggered && (std::abs(meas.env.g - sup.anchor.g) > cfg.deadband_g ||
                        std::abs(meas.env.t - sup.anchor.t) > cfg.deadband_t)) {
    sup.triggered = false;
    sup.attenuations = 0;
  }
  const double isc_real = compute_isc_real(meas.env, i_sc_stc);
  if (meas.i > cfg.threshold_frac * isc_real) {
    if (!sup.triggered) {
      sup.triggered = true;
      sup.anchor = meas.env;
      sup.y_cor = y;
    }
    sup.y_cor *= cfg.gamma;
    ++sup.attenuations;
  } else if (!sup.triggered) {
    sup.y_cor = y;
  }
  sup.y_cor = std::min(sup.y_cor, y);
  return sup.y_cor;
}

struct RpropNnConfig {
  SupervisionConfig supervision;
  bool supervision_enabled = true;
  // Fraction taken off the predicted MPP before it becomes the power
  // reference; keeps the reference feasible under small prediction errors.
  double reference_derating = 0.005;
  double period = 1e-3;  // s, one control period
};

class RpropNnController : public Controller {
 public:
  RpropNnController(std::shared_ptr<const Network> net, const PvArrayConfig& array, RpropNnConfig cfg = {})
      : net_(std::move(net)), p_max_(array.p_max), i_sc_stc_(array.i_sc_stc), cfg_(cfg) {
    if (!net_) throw ConfigError("rprop-nn controller needs a network");
    cfg_.supervision.validate();
    if (!(cfg_.reference_derating >= 0.0 && cfg_.reference_derating < 1.0)) {
      throw ConfigError("reference_derating must be in [0, 1)");
    }
    if (!(cfg_.period > 0.0)) throw ConfigError("controller period must be > 0");
  }

  std::string name() const override { return "rprop-nn"; }
  CommandKind kind() const override { return CommandKind::power_reference; }
  double sample_period() const override { return cfg_.period; }

  ControllerCommand step(const Measurement& meas) override {
    last_y_ = nn_reference(*net_, meas.env, p_max_) * (1.0 - cfg_.reference_derating);
    double y_cor = last_y_;
    if (cfg_.supervision_enabled) {
      if (ticks_ % cfg_.supervision.tick_period == 0) {
        y_cor = supervise(sup_, last_y_, meas, cfg_.supervision, i_sc_stc_);
      } else {
        sup_.y_cor = sup_.triggered ? std::min(sup_.y_cor, last_y_) : last_y_;
        y_cor = sup_.y_cor;
      }
    }
    ++ticks_;
    return {CommandKind::power_reference, y_cor};
  }

  const SupervisionState& supervision() const { return sup_; }
  double last_prediction() const { return last_y_; }

 private:
  std::shared_ptr<const Network> net_;
  double p_max_;
  double i_sc_stc_;
  RpropNnConfig cfg_;
  SupervisionState sup_;
  long ticks_ = 0;
  double last_y_ = 0.0;
};

}  // namespace pvmppt
