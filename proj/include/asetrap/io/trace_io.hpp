#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "asetrap/noise.hpp"

namespace asetrap::io {

enum class TraceFormat { Csv, Raw };

TraceFormat parse_format(const std::string& name);
std::string format_name(TraceFormat format);

/// Sidecar of a trace file, stored next to it as `<trace path>.json`.
struct TraceMetadata {
  double sample_rate_hz = 0.0;
  std::string unit = "V";
  double scale = 1.0;
};

std::filesystem::path sidecar_path(const std::filesystem::path& trace_path);

/// Parses and validates a sidecar document.
TraceMetadata parse_sidecar(const nlohmann::json& doc);

/// Loads a trace. `.csv` files hold `time_s,value` or a single `value` column
/// (the sample rate then comes from `sample_rate_hz` or the sidecar); anything
/// else is read as RAW little-endian float64 with a mandatory sidecar.
/// Lines starting with '#' are comments.
IntensityTrace load_trace(const std::filesystem::path& path,
                          std::optional<double> sample_rate_hz = std::nullopt);

/// 17 significant digits, the lossless round-trip precision of a double.
std::string format_double(double value);

/// Writes `trace` atomically. CSV files carry `# manifest: {...}` header lines;
/// RAW files get a sidecar embedding the manifest.
void write_trace(const std::filesystem::path& path, const IntensityTrace& trace, TraceFormat format,
                 const nlohmann::json& manifest);

/// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace asetrap::io
