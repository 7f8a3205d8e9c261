#include "nhp/trigger_kernel.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "nhp/error.hpp"

namespace nhp {

std::vector<double> KernelParams::flatten() const {
  std::vector<double> out;
  out.reserve(flat_size());
  out.push_back(c);
  out.push_back(d);
  out.insert(out.end(), beta.begin(), beta.end());
  return out;
}

KernelParams KernelParams::unflatten(std::span<const double> flat) {
  if (flat.size() < 3) {
    throw Error(ErrorKind::kDimensionMismatch, "parameter vector needs c, d and an intercept");
  }
  return {flat[kParamC], flat[kParamD], {flat.begin() + kParamBeta0, flat.end()}};
}

KernelParams KernelParams::initial(std::size_t feature_dims) {
  KernelParams p;
  p.beta.assign(feature_dims + 1, 0.0);
  p.beta[0] = 1.0;
  return p;
}

namespace {

struct Parts {
  double numer;
  double time_term;  // Δt + c
  double space_term; // Δs + d
  double value;
};

Parts evaluate(const KernelParams& params, const TriggerInput& in) {
  if (params.beta.empty()) throw Error(ErrorKind::kDimensionMismatch, "kernel needs an intercept");
  if (in.dw.size() != params.feature_dims()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("kernel expects {} feature differences, got {}",
                            params.feature_dims(), in.dw.size()));
  }
  if (!std::isfinite(in.ds_km) || !std::isfinite(in.dt_days) || in.ds_km < 0.0 || in.dt_days < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "kernel distances must be finite and nonnegative");
  }
  if (!std::isfinite(params.c) || !std::isfinite(params.d)) {
    throw Error(ErrorKind::kInvalidArgument, "kernel offsets must be finite");
  }
  double numer = params.beta[0];
  for (std::size_t j = 0; j < in.dw.size(); ++j) {
    if (!std::isfinite(in.dw[j])) throw Error(ErrorKind::kInvalidArgument, "non-finite feature difference");
    numer += params.beta[j + 1] * in.dw[j];
  }
  if (!std::isfinite(numer)) throw Error(ErrorKind::kInvalidArgument, "non-finite kernel numerator");
  const double tt = in.dt_days + params.c;
  const double s = in.ds_km + params.d;
  if (!(tt > 0.0) || !(s > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "kernel denominator must be positive");
  }
  // Same operation order as simd::trigger_accumulate.
  const double value = numer / (tt * tt * s * s);
  return {numer, tt, s, value};
}

}  // namespace

double kernel_eval(const KernelParams& params, const TriggerInput& input, bool clamp) {
  const Parts p = evaluate(params, input);
  if (clamp && !(p.value > 0.0)) return 0.0;
  return p.value;
}

double add_kernel_grad(const KernelParams& params, const TriggerInput& input, double weight,
                       std::span<double> grad, bool clamp) {
  if (grad.size() != params.flat_size()) {
    throw Error(ErrorKind::kDimensionMismatch, "gradient buffer has the wrong length");
  }
  const Parts p = evaluate(params, input);
  if (clamp && !(p.value > 0.0)) return 0.0;
  const double inv_denom = 1.0 / (p.time_term * p.time_term * p.space_term * p.space_term);
  grad[kParamC] += weight * (-2.0 * p.value / p.time_term);
  grad[kParamD] += weight * (-2.0 * p.value / p.space_term);
  grad[kParamBeta0] += weight * inv_denom;
  for (std::size_t j = 0; j < input.dw.size(); ++j) {
    grad[kParamBeta0 + 1 + j] += weight * input.dw[j] * inv_denom;
  }
  return p.value;
}

std::vector<double> kernel_grad(const KernelParams& params, const TriggerInput& input, bool clamp) {
  std::vector<double> grad(params.flat_size(), 0.0);
  add_kernel_grad(params, input, 1.0, grad, clamp);
  return grad;
}

void project_offsets(KernelParams& params, double floor_c, double floor_d) {
  params.c = std::max(params.c, floor_c);
  params.d = std::max(params.d, floor_d);
}

nlohmann::json params_to_json(const KernelParams& params,
                              const std::vector<std::string>& feature_names,
                              const KernelOptions& options) {
  if (feature_names.size() != params.feature_dims()) {
    throw Error(ErrorKind::kDimensionMismatch, "feature names do not match beta length");
  }
  return nlohmann::json{
      {"c", params.c},
      {"d", params.d},
      {"beta", params.beta},
      {"features", feature_names},
      {"diff_mode", options.diff_mode == FeatureDiffMode::kSigned ? "signed" : "absolute"},
      {"clamp", options.clamp},
  };
}

LoadedParams params_from_json(const nlohmann::json& j) {
  LoadedParams out;
  try {
    out.params.c = j.at("c").get<double>();
    out.params.d = j.at("d").get<double>();
    out.params.beta = j.at("beta").get<std::vector<double>>();
    out.feature_names = j.value("features", std::vector<std::string>{});
    const std::string mode = j.value("diff_mode", "signed");
    if (mode == "signed") {
      out.options.diff_mode = FeatureDiffMode::kSigned;
    } else if (mode == "absolute") {
      out.options.diff_mode = FeatureDiffMode::kAbsolute;
    } else {
      throw Error(ErrorKind::kParse, fmt::format("unknown diff_mode '{}'", mode));
    }
    out.options.clamp = j.value("clamp", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("kernel parameters: ") + e.what());
  }
  if (out.params.beta.empty()) throw Error(ErrorKind::kParse, "kernel parameters: empty beta");
  if (out.feature_names.size() != out.params.feature_dims()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("kernel parameters: {} feature names for {} feature weights",
                            out.feature_names.size(), out.params.feature_dims()));
  }
  return out;
}

}  // namespace nhp
