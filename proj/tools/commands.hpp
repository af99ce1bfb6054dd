#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "pvmppt/dataset.hpp"

namespace pvmppt::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kNotConverged = 3,
  kSimulationFailed = 4,
  kPartialBenchmark = 5,
};

struct GenerateOptions {
  DatasetSpec spec;
  std::string out = "dataset.csv";
};

struct TrainOptions {
  std::string data = "dataset.csv";
  double eps = 1e-5;
  int max_epochs = 5000;
  std::uint64_t seed = 42;
  double holdout = 0.2;  // tail fraction of the file used for validation
  std::string out = "model.json";
};

struct SimulateOptions {
  std::string config;
  std::string out;  // overrides the config's output_dir when set
};

struct CompareOptions {
  std::string model = "model.json";
  std::string out = "compare";
  bool with_ripple_test = false;
};

int cmd_generate(const GenerateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareOptions& opt, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to one of the commands above.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pvmppt::cli
