#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nhp/geo_grid.hpp"
#include "nhp/pipeline.hpp"
#include "nhp/synthgen.hpp"

namespace nhp {

struct BoundingBox {
  GeoPoint min;
  GeoPoint max;
};

/// Settings shared by every subcommand. Text form is one `key = value` per
/// line; `#` starts a comment; lists are comma separated.
struct RunConfig {
  std::string events;
  std::string land_use;
  std::string stations;
  std::string features;
  std::string output_dir = "out";

  std::optional<BoundingBox> bbox;
  std::size_t grid_cells = 900;
  std::vector<std::size_t> resolutions{1100, 2200, 4400};

  PipelineConfig pipeline;
  FeatureSchema schema = FeatureSchema::defaults();
  SynthSpec synth;
  bool synth_null_signal = false;

  /// Applies one setting; throws kInvalidArgument naming unknown keys and
  /// values outside their domain.
  void set(std::string_view key, std::string_view value);
  /// Sets both the training and the generator seed.
  void set_seed(std::uint64_t seed);
  void validate() const;

  /// Generator spec with the null-signal switch applied.
  SynthSpec effective_synth() const;
};

/// Applies every line of `in` on top of `base`. Errors carry the line number.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Every recognized key, for documentation and error messages.
std::vector<std::string> config_keys();

}  // namespace nhp
