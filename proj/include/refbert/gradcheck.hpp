#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "refbert/nn.hpp"

namespace refbert::nn {

struct GradCheckOptions {
  double epsilon = 1e-5;  // must lie in [1e-6, 1e-3]
  std::size_t samples_per_tensor = 200;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric) noexcept;

/// Loss of the parameters; fills `grads` (same shape, pre-zeroed) with the
/// analytic gradient when it is non-null.
using ParamLoss = std::function<double(const ModelParams& params, ModelParams* grads)>;

/// Compares the analytic gradient against central differences on up to
/// samples_per_tensor coordinates of every tensor (all of them when a tensor
/// is smaller). Throws Error(NonFiniteGradient).
GradCheckResult gradient_check(const ParamLoss& loss_fn, const ModelParams& params,
                               const GradCheckOptions& options = {});

/// Same check over a flat parameter vector. `grad` is empty when only the
/// value is wanted.
using VectorLoss = std::function<double(std::span<const double> x, std::span<double> grad)>;
GradCheckResult gradient_check(const VectorLoss& loss_fn, std::vector<double> x, const GradCheckOptions& options = {});

}  // namespace refbert::nn
