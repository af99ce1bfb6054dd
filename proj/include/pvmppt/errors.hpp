#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pvmppt {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationFailure : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class BoundsViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyTrace : public Error {
 public:
  EmptyTrace() : Error("trace is empty") {}
};

// Raised by the simulator; carries the tick at which the plant failed.
class SimulationError : public Error {
 public:
  SimulationError(std::size_t tick, const std::string& what)
      : Error("tick " + std::to_string(tick) + ": " + what), tick_(tick) {}
  std::size_t tick() const { return tick_; }

 private:
  std::size_t tick_;
};

// Training stopped at max_epochs with E > epsilon. The history is kept so
// callers can decide whether the network is still usable.
class DidNotConverge : public Error {
 public:
  DidNotConverge(double final_loss, std::vector<double> history)
      : Error("training did not reach the loss threshold (E = " +
              std::to_string(final_loss) + ")"),
        final_loss_(final_loss),
        history_(std::move(history)) {}
  double final_loss() const { return final_loss_; }
  const std::vector<double>& history() const { return history_; }

 private:
  double final_loss_;
  std::vector<double> history_;
};

}  // namespace pvmppt
