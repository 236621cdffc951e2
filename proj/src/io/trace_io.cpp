#include "asetrap/io/trace_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "asetrap/error.hpp"

namespace asetrap::io {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  return cells;
}

bool parse_number(const std::string& text, double& value) {
  if (text.empty()) return false;
  char* end = nullptr;
  value = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size();
}

std::optional<TraceMetadata> read_sidecar_if_present(const fs::path& trace_path) {
  const fs::path side = sidecar_path(trace_path);
  if (!fs::exists(side)) return std::nullopt;
  std::ifstream in(side);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed sidecar " + side.string() + ": " + e.what());
  }
  try {
    return parse_sidecar(doc);
  } catch (const InputError& e) {
    throw InputError("sidecar " + side.string() + ": " + e.what());
  }
}

IntensityTrace load_csv(const fs::path& path, std::optional<double> sample_rate_hz) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trace file " + path.string());
  const auto sidecar = read_sidecar_if_present(path);

  std::vector<double> times, values;
  int columns = 0;
  int value_col = 0;
  int time_col = -1;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split_csv(t);
    double probe = 0.0;
    if (!header_seen && !parse_number(cells[0], probe)) {
      header_seen = true;
      columns = static_cast<int>(cells.size());
      for (int c = 0; c < columns; ++c) {
        if (cells[static_cast<std::size_t>(c)] == "time_s") time_col = c;
        else if (cells[static_cast<std::size_t>(c)] == "value") value_col = c;
        else throw InputError(path.string() + ": unknown CSV column '" + cells[static_cast<std::size_t>(c)] + "'");
      }
      if (columns > 2 || (columns == 2 && time_col < 0)) {
        throw InputError(path.string() + ": expected columns 'time_s,value' or 'value'");
      }
      continue;
    }
    if (columns == 0) {
      header_seen = true;
      columns = static_cast<int>(cells.size());
      if (columns == 2) {
        time_col = 0;
        value_col = 1;
      } else if (columns != 1) {
        throw InputError(path.string() + ": expected one or two CSV columns");
      }
    }
    if (static_cast<int>(cells.size()) != columns) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
    }
    double v = 0.0;
    if (!parse_number(cells[static_cast<std::size_t>(value_col)], v) || !std::isfinite(v)) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": bad value");
    }
    values.push_back(v);
    if (time_col >= 0) {
      double tv = 0.0;
      if (!parse_number(cells[static_cast<std::size_t>(time_col)], tv)) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": bad time");
      }
      times.push_back(tv);
    }
  }
  if (values.size() < 2) throw InputError(path.string() + ": trace needs at least 2 samples");

  IntensityTrace trace;
  trace.samples = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  if (sidecar) {
    trace.unit = sidecar->unit;
    trace.samples *= sidecar->scale;
  }
  if (time_col >= 0) {
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(dt > 0.0)) throw InputError(path.string() + ": time column must increase");
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double expected = times.front() + dt * static_cast<double>(i);
      if (std::abs(times[i] - expected) > 1e-6 * dt) {
        throw InputError(path.string() + ": time column not uniformly spaced within 1 ppm at row " +
                         std::to_string(i));
      }
    }
    trace.fs = 1.0 / dt;
  } else if (sample_rate_hz) {
    trace.fs = *sample_rate_hz;
  } else if (sidecar) {
    trace.fs = sidecar->sample_rate_hz;
  } else {
    throw InputError(path.string() + ": single-column CSV needs --sample-rate or a sidecar");
  }
  if (!(trace.fs > 0.0)) throw InputError("sample rate must be > 0");
  return trace;
}

IntensityTrace load_raw(const fs::path& path) {
  const auto sidecar = read_sidecar_if_present(path);
  if (!sidecar) throw InputError("RAW trace " + path.string() + " has no sidecar " + sidecar_path(path).string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open trace file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) {
    throw InputError(path.string() + ": RAW byte length " + std::to_string(bytes.size()) +
                     " is not a multiple of 8");
  }
  const auto n = static_cast<Eigen::Index>(bytes.size() / 8);
  if (n < 2) throw InputError(path.string() + ": trace needs at least 2 samples");

  IntensityTrace trace;
  trace.fs = sidecar->sample_rate_hz;
  trace.unit = sidecar->unit;
  trace.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t word = 0;
    std::memcpy(&word, bytes.data() + 8 * i, 8);
    if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap64(word);
    trace.samples[i] = std::bit_cast<double>(word) * sidecar->scale;
  }
  return trace;
}

}  // namespace

TraceFormat parse_format(const std::string& name) {
  if (name == "csv") return TraceFormat::Csv;
  if (name == "raw") return TraceFormat::Raw;
  throw InputError("unknown format '" + name + "' (expected csv or raw)");
}

std::string format_name(TraceFormat format) { return format == TraceFormat::Csv ? "csv" : "raw"; }

fs::path sidecar_path(const fs::path& trace_path) {
  fs::path side = trace_path;
  side += ".json";
  return side;
}

TraceMetadata parse_sidecar(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InputError("sidecar must be a JSON object");
  TraceMetadata meta;
  const auto rate = doc.find("sample_rate_hz");
  if (rate == doc.end() || !rate->is_number()) throw InputError("sidecar lacks numeric sample_rate_hz");
  meta.sample_rate_hz = rate->get<double>();
  if (!(meta.sample_rate_hz > 0.0)) throw InputError("sidecar sample_rate_hz must be > 0");
  if (auto u = doc.find("unit"); u != doc.end()) {
    if (!u->is_string()) throw InputError("sidecar unit must be a string");
    meta.unit = u->get<std::string>();
  }
  if (auto s = doc.find("scale"); s != doc.end()) {
    if (!s->is_number()) throw InputError("sidecar scale must be a number");
    meta.scale = s->get<double>();
  }
  return meta;
}

IntensityTrace load_trace(const fs::path& path, std::optional<double> sample_rate_hz) {
  if (!fs::exists(path)) throw InputError("trace file not found: " + path.string());
  if (path.extension() == ".csv") return load_csv(path, sample_rate_hz);
  return load_raw(path);
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

void write_trace(const fs::path& path, const IntensityTrace& trace, TraceFormat format,
                 const nlohmann::json& manifest) {
  if (format == TraceFormat::Csv) {
    std::string text = "# manifest: " + manifest.dump() + "\n";
    text += "time_s,value\n";
    const double dt = 1.0 / trace.fs;
    for (Eigen::Index i = 0; i < trace.size(); ++i) {
      text += format_double(dt * static_cast<double>(i));
      text += ',';
      text += format_double(trace.samples[i]);
      text += '\n';
    }
    write_file_atomic(path, text);
    return;
  }

  std::string bytes(static_cast<std::size_t>(trace.size()) * 8, '\0');
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    auto word = std::bit_cast<std::uint64_t>(trace.samples[i]);
    if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap64(word);
    std::memcpy(bytes.data() + 8 * i, &word, 8);
  }
  nlohmann::json side = {{"sample_rate_hz", trace.fs}, {"unit", trace.unit}, {"scale", 1.0},
                         {"manifest", manifest}};
  write_file_atomic(sidecar_path(path), side.dump(2) + "\n");
  write_file_atomic(path, bytes);
}

}  // namespace asetrap::io
