#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pan/autodiff.hpp"
#include "pan/data_io.hpp"
#include "pan/model.hpp"

namespace pan::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
  kGradCheckFailed = 5,
};

/// Runs `pan <command> ...`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 5-node, 6-edge graph with two node and two edge feature fields.
Graph gradcheck_fixture();

/// Finite-difference check of a freshly initialized model on the fixture,
/// with frozen batch norm (randomized running statistics) and frozen Z.
GradCheckReport run_model_gradcheck(const ModelConfig& config, double h, double tol);

/// "mean ± std" in percent with two decimals, using the sample standard deviation.
std::string format_mean_std(std::span<const double> values);

}  // namespace pan::cli
