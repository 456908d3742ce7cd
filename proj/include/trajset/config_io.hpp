// SPDX-License-Identifier: Apache-2.0
//
// Key-value configuration files: one `key = value` per line, `#` starts a
// comment. Reals are written with 17 significant digits so a write/read
// round-trip is exact.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trajset/data.hpp"
#include "trajset/harness.hpp"
#include "trajset/model.hpp"

namespace trajset {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(const std::string& text, const std::string& origin = "<string>");
std::string format_key_values(const KeyValues& kv);
KeyValues read_key_values(const std::string& path);
void write_key_values(const KeyValues& kv, const std::string& path);

/// Entries whose key starts with `prefix`, with the prefix removed.
KeyValues select_prefix(const KeyValues& kv, const std::string& prefix);
KeyValues add_prefix(const KeyValues& kv, const std::string& prefix);

KeyValues to_key_values(const ModelConfig& c);
KeyValues to_key_values(const TrainConfig& c);
KeyValues to_key_values(const GeneratorConfig& c);

/// Overwrites the named fields; unknown keys raise ConfigError.
void apply_key_values(ModelConfig& c, const KeyValues& kv);
void apply_key_values(TrainConfig& c, const KeyValues& kv);
void apply_key_values(GeneratorConfig& c, const KeyValues& kv);

/// `<csv>.cfg` next to a data file records its pitch and frame rate.
void write_data_sidecar(const std::string& csv_path, const PitchSpec& pitch, double frame_rate_hz);
/// Defaults (with a warning) when the sidecar is missing.
LoadOptions read_data_sidecar(const std::string& csv_path);

}  // namespace trajset
