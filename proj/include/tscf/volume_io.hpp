#pragma once

#include <string>

#include "tscf/types.hpp"

namespace tscf {

/// Container: <stem>.json header + <stem>.f32 little-endian float32 raster.
/// `path` may name either the .json file or the bare stem.
TimeSeriesVolume read_volume(const std::string& path);
void write_volume(const TimeSeriesVolume& volume, const std::string& path);

/// CSV with `# key: value` comment header (kind, upsample_factor) followed by
/// a `time_s,value` header row.
AifSeries read_aif(const std::string& path);
void write_aif(const AifSeries& aif, const std::string& path);

/// One volume container per parameter plus a JSON summary at <stem>.summary.json.
void write_param_map(const ParamMap& map, double dt_seconds, const std::string& stem);
ParamMap read_param_map(const std::string& stem);

}  // namespace tscf
