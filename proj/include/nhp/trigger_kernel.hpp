#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace nhp {

/// How the geographic difference between a candidate cell and a prior
/// crime's cell enters the kernel numerator.
enum class FeatureDiffMode {
  kSigned,    // ω_l − ω_g
  kAbsolute,  // |ω_l − ω_g|
};

struct KernelOptions {
  FeatureDiffMode diff_mode = FeatureDiffMode::kSigned;
  /// κ ← max(0, κ), subgradient 0 wherever the numerator is ≤ 0.
  bool clamp = false;
};

inline constexpr double kOffsetFloor = 1e-3;

// Layout of the flattened parameter vector.
inline constexpr std::size_t kParamC = 0;
inline constexpr std::size_t kParamD = 1;
inline constexpr std::size_t kParamBeta0 = 2;

/// Triggering-kernel parameters: temporal offset c (days), spatial offset
/// d (km), intercept β₀ and one weight per standardized feature.
struct KernelParams {
  double c = 1.0;
  double d = 1.0;
  std::vector<double> beta{1.0};

  std::size_t feature_dims() const noexcept { return beta.empty() ? 0 : beta.size() - 1; }
  /// Length of the flattened vector [c, d, β₀, …, β_J].
  std::size_t flat_size() const noexcept { return beta.size() + 2; }

  std::vector<double> flatten() const;
  static KernelParams unflatten(std::span<const double> flat);

  /// c = d = 1, β₀ = 1, feature weights 0.
  static KernelParams initial(std::size_t feature_dims);

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

/// One prior-crime contribution: Δs in km, Δt in days, Δω per feature.
struct TriggerInput {
  double ds_km = 0.0;
  double dt_days = 0.0;
  std::span<const double> dw;
};

/// (β₀ + Σ_j β_j Δw_j) / ((Δt + c)² (Δs + d)²).
/// Throws kInvalidArgument on non-finite or negative inputs and
/// kDimensionMismatch when |Δω| ≠ J.
double kernel_eval(const KernelParams& params, const TriggerInput& input, bool clamp = false);

/// Gradient with respect to [c, d, β₀, …, β_J].
std::vector<double> kernel_grad(const KernelParams& params, const TriggerInput& input,
                                bool clamp = false);

/// grad += weight * ∂κ/∂Θ; returns κ. `grad` has length flat_size().
double add_kernel_grad(const KernelParams& params, const TriggerInput& input, double weight,
                       std::span<double> grad, bool clamp = false);

/// Projects c and d onto [floor, ∞).
void project_offsets(KernelParams& params, double floor_c = kOffsetFloor,
                     double floor_d = kOffsetFloor);

// Serialization: {"c", "d", "beta", "features", "diff_mode", "clamp"}.
nlohmann::json params_to_json(const KernelParams& params,
                              const std::vector<std::string>& feature_names,
                              const KernelOptions& options);

struct LoadedParams {
  KernelParams params;
  std::vector<std::string> feature_names;
  KernelOptions options;
};

/// Throws kParse on malformed input and kDimensionMismatch when the beta
/// length disagrees with the embedded feature list.
LoadedParams params_from_json(const nlohmann::json& j);

}  // namespace nhp
