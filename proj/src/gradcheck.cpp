#include "refbert/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "refbert/error.hpp"
#include "refbert/rng.hpp"

namespace refbert::nn {
namespace {

void check_epsilon(double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw Error(Errc::InvalidConfig, "epsilon must lie in [1e-6, 1e-3]");
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t count, SplitMix64& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  if (size <= count) return idx;
  // Partial Fisher-Yates: the first `count` entries are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.below(size - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void record(GradCheckResult& r, const std::string& name, std::size_t index, double analytic, double numeric) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
    throw Error(Errc::NonFiniteGradient, name + "[" + std::to_string(index) + "]");
  }
  ++r.coordinates_checked;
  const double err = relative_error(analytic, numeric);
  if (r.coordinates_checked == 1 || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_tensor = name;
    r.worst_index = index;
    r.worst_analytic = analytic;
    r.worst_numeric = numeric;
  }
}

}  // namespace

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const ParamLoss& loss_fn, const ModelParams& params, const GradCheckOptions& options) {
  check_epsilon(options.epsilon);
  ModelParams grads = params.zeros_like();
  loss_fn(params, &grads);
  const auto grad_views = tensors(std::as_const(grads));

  ModelParams probe = params;
  auto views = tensors(probe);
  SplitMix64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t t = 0; t < views.size(); ++t) {
    auto& view = views[t];
    for (std::size_t i : sample_indices(view.data.size(), options.samples_per_tensor, rng)) {
      const double saved = view.data[i];
      view.data[i] = saved + options.epsilon;
      const double up = loss_fn(probe, nullptr);
      view.data[i] = saved - options.epsilon;
      const double down = loss_fn(probe, nullptr);
      view.data[i] = saved;
      record(result, view.name, i, grad_views[t].data[i], (up - down) / (2.0 * options.epsilon));
    }
  }
  return result;
}

GradCheckResult gradient_check(const VectorLoss& loss_fn, std::vector<double> x, const GradCheckOptions& options) {
  check_epsilon(options.epsilon);
  std::vector<double> grad(x.size(), 0.0);
  loss_fn(x, grad);
  std::vector<double> scratch(x.size(), 0.0);
  SplitMix64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t i : sample_indices(x.size(), options.samples_per_tensor, rng)) {
    const double saved = x[i];
    x[i] = saved + options.epsilon;
    const double up = loss_fn(x, {});
    x[i] = saved - options.epsilon;
    const double down = loss_fn(x, {});
    x[i] = saved;
    record(result, "x", i, grad[i], (up - down) / (2.0 * options.epsilon));
  }
  return result;
}

}  // namespace refbert::nn
