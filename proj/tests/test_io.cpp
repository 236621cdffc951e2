#include "test_support.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "asetrap/error.hpp"
#include "asetrap/io/commands.hpp"
#include "asetrap/io/manifest.hpp"
#include "asetrap/io/trace_io.hpp"

using namespace asetrap;
using namespace asetrap::io;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("asetrap_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "asetrap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

IntensityTrace ramp(Eigen::Index n, double fs) {
  IntensityTrace t;
  t.fs = fs;
  t.unit = "mV";
  t.samples = Eigen::VectorXd::LinSpaced(n, 0.1, 1.7);
  t.samples[3] = 1.0 / 3.0;
  return t;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("SHA-256 of a known message") {
    TempDir dir;
    spit(dir / "abc.txt", "abc");
    CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const InputDigest d = digest_input(dir / "abc.txt");
    CHECK(d.bytes == 3);
  }

  TEST_CASE("manifest carries everything needed to rerun") {
    RunManifest m{"snr", {{"passes", 2}}, 77, {{"trace.csv", "00", 5}}};
    const json j = m.to_json();
    CHECK(j["command"] == "snr");
    CHECK(j["master_seed"] == 77);
    CHECK(j["parameters"]["passes"] == 2);
    CHECK(j["inputs"][0]["sha256"] == "00");
    CHECK(j.contains("version"));
    CHECK(j.contains("rng"));
    CHECK(j.contains("seed_derivation"));
  }

  TEST_CASE("CSV trace round-trips bit-exactly") {
    TempDir dir;
    const IntensityTrace t = ramp(50, 2.5e9);
    write_trace(dir / "t.csv", t, TraceFormat::Csv, {{"command", "synth"}});
    const std::string text = slurp(dir / "t.csv");
    CHECK(text.rfind("# manifest: ", 0) == 0);
    const IntensityTrace back = load_trace(dir / "t.csv");
    CHECK(back.samples == t.samples);
    CHECK(back.fs == approx(2.5e9).epsilon(1e-9));
  }

  TEST_CASE("RAW trace round-trips through its sidecar") {
    TempDir dir;
    const IntensityTrace t = ramp(64, 1e6);
    write_trace(dir / "t.raw", t, TraceFormat::Raw, {{"command", "synth"}});
    CHECK(fs::file_size(dir / "t.raw") == 64 * 8);
    const json side = json::parse(slurp(dir / "t.raw.json"));
    CHECK(side["sample_rate_hz"] == 1e6);
    CHECK(side["manifest"]["command"] == "synth");
    const IntensityTrace back = load_trace(dir / "t.raw");
    CHECK(back.samples == t.samples);
    CHECK(back.unit == "mV");
    CHECK(back.fs == 1e6);

    spit(dir / "t.raw.json", R"({"sample_rate_hz": 1e6, "scale": 2.0})");
    CHECK(load_trace(dir / "t.raw").samples == 2.0 * t.samples);
  }

  TEST_CASE("malformed inputs are rejected") {
    TempDir dir;
    write_trace(dir / "t.raw", ramp(64, 1e6), TraceFormat::Raw, {});
    spit(dir / "t.raw.json", "{not json");
    CHECK_THROWS_AS(load_trace(dir / "t.raw"), InputError);
    spit(dir / "t.raw.json", R"({"sample_rate_hz": -1})");
    CHECK_THROWS_AS(load_trace(dir / "t.raw"), InputError);
    fs::remove(dir / "t.raw.json");
    CHECK_THROWS_AS(load_trace(dir / "t.raw"), InputError);  // sidecar is mandatory

    spit(dir / "odd.raw", std::string(12, '\0'));
    spit(dir / "odd.raw.json", R"({"sample_rate_hz": 1})");
    CHECK_THROWS_AS(load_trace(dir / "odd.raw"), InputError);

    spit(dir / "single.csv", "value\n1\n2\n3\n");
    CHECK_THROWS_AS(load_trace(dir / "single.csv"), InputError);  // no sample rate
    CHECK(load_trace(dir / "single.csv", 5.0).fs == 5.0);

    spit(dir / "jitter.csv", "time_s,value\n0,1\n1,2\n2.5,3\n");
    CHECK_THROWS_AS(load_trace(dir / "jitter.csv"), InputError);
    spit(dir / "cols.csv", "time_s,volts\n0,1\n1,2\n");
    CHECK_THROWS_AS(load_trace(dir / "cols.csv"), InputError);
    spit(dir / "nan.csv", "value\n1\nabc\n");
    CHECK_THROWS_AS(load_trace(dir / "nan.csv", 1.0), InputError);
    CHECK_THROWS_AS(load_trace(dir / "missing.csv"), InputError);
  }

  TEST_CASE("headerless two-column CSV with comments") {
    TempDir dir;
    spit(dir / "h.csv", "# scope export\n0,1.5\n0.5,2.5\n\n1.0,3.5\n");
    const IntensityTrace t = load_trace(dir / "h.csv");
    CHECK(t.size() == 3);
    CHECK(t.fs == approx(2.0));
    CHECK(t.samples[2] == 3.5);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("trap report for the 6 W / 28 um trap") {
    TempDir dir;
    const CliResult r = cli({"trap", "--out", dir.path().string()});
    REQUIRE(r.code == kExitOk);
    const json j = json::parse(slurp(dir / "trap.json"));
    CHECK(json::parse(r.out) == j);
    CHECK(j["depth_uk"].get<double>() == approx(900.0).epsilon(0.02));
    CHECK(j["radial_hz"][0].get<double>() == approx(3.34e3).epsilon(0.005));
    CHECK(j["axial_hz"].get<double>() == approx(41.8).epsilon(0.005));
    CHECK(j["scattering_heating_k_per_s"].get<double>() == approx(30e-9));
    CHECK(j["rate_conversion"]["radial_k_per_s"].get<double>() == approx(0.34e-12).epsilon(0.02));
    CHECK(j["notes"].size() >= 1);
  }

  TEST_CASE("trap report for the single-atom trap") {
    TempDir dir;
    const CliResult r = cli({"trap", "--power", "0.1", "--waist", "3e-6", "--out", dir.path().string()});
    REQUIRE(r.code == kExitOk);
    const json j = json::parse(r.out);
    CHECK(j["radial_hz"][0].get<double>() == approx(37.5e3).epsilon(0.01));
    CHECK(j["axial_hz"].get<double>() == approx(4.4e3).epsilon(0.01));
    CHECK(j["scattering_heating_k_per_s"].get<double>() == approx(43.7e-9).epsilon(0.01));
  }

  TEST_CASE("zero power is a valid query") {
    TempDir dir;
    const CliResult r = cli({"trap", "--power", "0", "--out", dir.path().string()});
    REQUIRE(r.code == kExitOk);
    const json j = json::parse(r.out);
    CHECK(j["depth_j"] == 0.0);
    CHECK(j["radial_hz"][0] == 0.0);
    CHECK(j["axial_hz"] == 0.0);
  }

  TEST_CASE("species table and parameters from a config file") {
    TempDir dir;
    spit(dir / "cfg.json", R"({"species": {"Cs133": {"mass_kg": 2.2069e-25}},
                               "trap": {"species": "Cs133", "power_w": 1.0}})");
    const CliResult r = cli({"trap", "--config", (dir / "cfg.json").string(), "--out", dir.path().string()});
    REQUIRE(r.code == kExitOk);
    const json j = json::parse(r.out);
    CHECK(j["species"]["name"] == "Cs133");
    CHECK(j["beam"]["power_w"] == 1.0);
    // Flags override the config file.
    const CliResult o = cli({"trap", "--config", (dir / "cfg.json").string(), "--power", "2", "--out",
                             dir.path().string()});
    CHECK(json::parse(o.out)["beam"]["power_w"] == 2.0);
  }

  TEST_CASE("input errors exit with code 2") {
    TempDir dir;
    CHECK(cli({"trap", "--species", "Unobtainium", "--out", dir.path().string()}).code == kExitInputError);
    CHECK(cli({"trap", "--no-such-flag"}).code == kExitInputError);
    CHECK(cli({}).code == kExitInputError);
    CHECK(cli({"trap", "--waist", "1e-7", "--out", dir.path().string()}).code == kExitInputError);
    spit(dir / "bad.json", R"({"trap": {"powr_w": 1.0}})");
    CHECK(cli({"trap", "--config", (dir / "bad.json").string()}).code == kExitInputError);
    spit(dir / "broken.json", "{");
    CHECK(cli({"trap", "--config", (dir / "broken.json").string()}).code == kExitInputError);
    CHECK(cli({"synth", "--kind", "pink", "--out", dir.path().string()}).code == kExitInputError);
    CHECK(cli({"snr", (dir / "nothing.csv").string()}).code == kExitInputError);
    CHECK(cli({"--help"}).code == kExitOk);
  }

  TEST_CASE("synth is deterministic in the seed") {
    TempDir dir;
    const std::vector<std::string> base = {"synth", "--n", "4096", "--fs", "1e6", "--bandwidth", "2e5"};
    auto args = base;
    args.insert(args.end(), {"--seed", "5", "--name", "a", "--out", dir.path().string()});
    REQUIRE(cli(args).code == kExitOk);
    args = base;
    args.insert(args.end(), {"--seed", "5", "--name", "b", "--out", dir.path().string()});
    REQUIRE(cli(args).code == kExitOk);
    args = base;
    args.insert(args.end(), {"--seed", "6", "--name", "c", "--out", dir.path().string()});
    REQUIRE(cli(args).code == kExitOk);
    const auto body = [&](const char* name) {
      const std::string text = slurp(dir / name);
      return text.substr(text.find('\n'));
    };
    CHECK(body("a.csv") == body("b.csv"));
    CHECK(body("a.csv") != body("c.csv"));
    const IntensityTrace t = load_trace(dir / "a.csv");
    CHECK(t.size() == 4096);
    CHECK(t.fs == approx(1e6).epsilon(1e-9));
  }

  TEST_CASE("snr on a 2e7-sample 20 GS/s RAW trace starts at 1 GHz") {
    TempDir dir;
    REQUIRE(cli({"synth", "--n", "20000000", "--format", "raw", "--name", "scope", "--out",
                 dir.path().string()})
                .code == kExitOk);
    const fs::path trace = dir / "scope.raw";
    const CliResult r = cli({"snr", trace.string(), "--out", dir.path().string()});
    REQUIRE(r.code == kExitOk);
    const auto rows = csv_rows(dir / "snr.csv");
    REQUIRE(rows.size() >= 4);
    CHECK(rows[0] == std::vector<std::string>{"cutoff_hz", "snr", "samples"});
    CHECK(std::stod(rows[1][0]) == approx(1e9));
    CHECK(std::stod(rows[2][0]) == approx(5e8));
    const json fit = json::parse(slurp(dir / "snr_fit.json"));
    CHECK(std::abs(fit["fit"]["exponent"].get<double>() + 0.5) <= 0.05);
    CHECK(fit["manifest"]["inputs"][0]["sha256"] == sha256_file(trace));
    CHECK(fit["mode"] == "single");

    // Double-pass mode via flag.
    const CliResult d = cli({"snr", trace.string(), "--passes", "2", "--out", (dir / "double").string()});
    CHECK(d.code == kExitOk);
    CHECK(json::parse(slurp(dir / "double" / "snr_fit.json"))["mode"] == "double");
  }

  TEST_CASE("malformed sidecar gives a nonzero exit and no partial CSV") {
    TempDir dir;
    REQUIRE(cli({"synth", "--n", "300000", "--format", "raw", "--name", "t", "--out", dir.path().string()}).code ==
            kExitOk);
    spit(dir / "t.raw.json", R"({"sample_rate_hz": "fast"})");
    const fs::path out = dir / "result";
    const CliResult r = cli({"snr", (dir / "t.raw").string(), "--out", out.string()});
    CHECK(r.code == kExitInputError);
    CHECK_FALSE(fs::exists(out / "snr.csv"));
    CHECK_FALSE(r.err.empty());
  }

  TEST_CASE("snr needs at least three cascade stages") {
    TempDir dir;
    REQUIRE(cli({"synth", "--n", "30000", "--name", "t", "--out", dir.path().string()}).code == kExitOk);
    CHECK(cli({"snr", (dir / "t.csv").string(), "--out", dir.path().string()}).code == kExitInputError);
    CHECK_FALSE(fs::exists(dir / "snr.csv"));
  }

  TEST_CASE("heating sweep: zero noise gives zero rates") {
    TempDir dir;
    const CliResult r = cli({"heating-sweep", "--s0", "0", "--points", "3", "--realizations", "2", "--t-end", "10",
                             "--out", dir.path().string()});
    REQUIRE(r.code == kExitOk);
    const auto rows = csv_rows(dir / "heating_sweep.csv");
    REQUIRE(rows.size() == 4);
    CHECK(rows[0][0] == "tau0");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(std::stod(rows[i][2]) == 0.0);   // e_dot
      CHECK(std::stod(rows[i][9]) == 0.0);   // loss_rate_fit
      CHECK(std::stod(rows[i][10]) == 0.0);  // perturbative_e_dot
      CHECK(rows[i][7] == "1");              // loss below resolution
    }
  }

  TEST_CASE("heating sweep reruns from its manifest byte for byte") {
    TempDir dir;
    const CliResult r = cli({"heating-sweep", "--s0", "0.01", "--tau-min", "0.1", "--tau-max", "0.8", "--points",
                             "3", "--realizations", "6", "--t-end", "30", "--seed", "123", "--out",
                             (dir / "first").string()});
    REQUIRE(r.code == kExitOk);
    const json summary = json::parse(slurp(dir / "first" / "heating_sweep.json"));
    CHECK(summary["manifest"]["master_seed"] == 123);
    const auto rows = csv_rows(dir / "first" / "heating_sweep.csv");
    REQUIRE(rows.size() == 4);
    CHECK(std::stod(rows[3][2]) > std::stod(rows[1][2]));  // faster heating nearer the band edge

    const CliResult again = cli({"heating-sweep", "--config", (dir / "first" / "heating_sweep.json").string(),
                                 "--out", (dir / "second").string()});
    REQUIRE(again.code == kExitOk);
    CHECK(slurp(dir / "first" / "heating_sweep.csv") == slurp(dir / "second" / "heating_sweep.csv"));

    // A manifest is bound to its command.
    CHECK(cli({"trap", "--config", (dir / "first" / "heating_sweep.json").string()}).code == kExitInputError);
  }

  TEST_CASE("saturated loss is flagged with exit code 3 after writing outputs") {
    TempDir dir;
    const CliResult r = cli({"heating-sweep", "--s0", "0.5", "--tau-min", "0.5", "--tau-max", "0.5", "--points",
                             "1", "--realizations", "2", "--t-end", "20", "--n-max", "4", "--loss-threshold",
                             "1e-30", "--out", dir.path().string()});
    CHECK(r.code == kExitNumerical);
    const auto rows = csv_rows(dir / "heating_sweep.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][8] == "saturated_loss");
    CHECK(json::parse(slurp(dir / "heating_sweep.json"))["flagged"] == true);
  }

  TEST_CASE("the installed binary maps errors to exit codes") {
    TempDir dir;
    const std::string exe = ASETRAP_CLI_PATH;
    const auto run = [&](const std::string& args) {
      const int status = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
      return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    CHECK(run("trap --out " + dir.path().string()) == 0);
    CHECK(run("trap --species Nope --out " + dir.path().string()) == 2);
    CHECK(run("bogus") == 2);
  }
}
