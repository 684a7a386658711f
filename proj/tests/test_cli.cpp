#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "concircle/cli/commands.hpp"

using namespace concircle;
using namespace concircle::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("concircle-test-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name, std::ios::binary) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "concircle");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::string config_path(const std::string& name) { return std::string(CONCIRCLE_SOURCE_DIR) + "/configs/" + name; }

std::string error_path(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("config defaults and round trip") {
  const ScenarioConfig d = parse_config("");
  CHECK(d.metric.builtin == "flat");
  CHECK(d.verification.seed == 42);
  CHECK(d.verification.samples == 50);
  CHECK(d.integration.integrator.step == 1e-3);
  CHECK(d.integration.integrator.t_end == 10.0);
  CHECK(d.output.format == "csv");

  for (const char* name : {"flat-circle.toml", "sphere-concircular.toml", "explicit-lorentzian.toml"}) {
    CAPTURE(std::string(name));
    const ScenarioConfig c = load_config(config_path(name));
    const std::string once = to_toml(c);
    CHECK(to_toml(parse_config(once)) == once);
  }

  // Natural initial data resolves to explicit u and w.
  const ScenarioConfig sphere = load_config(config_path("sphere-concircular.toml"));
  REQUIRE(sphere.integration.initial.size() == 2);
  const PointGeometry at = sphere.metric.build().at(sphere.integration.initial[1].x);
  const CurveJet s = sphere.integration.initial[1].jet();
  CHECK(at.dot(s.u, s.u) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(frenet_curvature(s, at) == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("config schema errors name the offending key") {
  CHECK(error_path("colour = 1") == "colour");
  CHECK(error_path("[metric]\nbuiltin = 'flat'\nshape = 2") == "metric.shape");
  CHECK(error_path("[metric]\ng00 = '1'\ng01 = 'x0'\ng10 = 'x1'\ng11 = '1'") == "metric.g10");
  CHECK(error_path("[metric]\ng00 = '1'\ng01 = '0'\ng11 = '1'\ng10 = '0'") == "<no error>");
  CHECK(error_path("[metric]\ng00 = '1'\ng11 = '1'") == "metric.g01");
  CHECK(error_path("[metric]\ng00 = '1'\ng01 = '0'\ng11 = 'y + 1'") == "metric.g00");
  CHECK(error_path("[metric]\nbuiltin = 'torus'") == "metric.builtin");
  CHECK(error_path("[metric]\nbuiltin = 'flat'\norientation = 2") == "metric.orientation");
  CHECK(error_path("[[integration.initial]]\nx = [0, 0]\nw = [0, 1]") == "integration.initial[0].u");
  CHECK(error_path("[[integration.initial]]\nx = [0, 0]\nu = [1, 0, 0]\nw = [0, 1]") == "integration.initial[0].u");
  CHECK(error_path("[[integration.initial]]\nx = [0, 0]\nu = [1, 0]\nw = [0, 1]\nheading = 0.1") ==
        "integration.initial[0].heading");
  CHECK(error_path("[integration]\nmethod = 'euler'") == "integration.method");
  CHECK(error_path("[integration]\nstep = 'small'") == "integration.step");
  CHECK(error_path("[integration]\nstep = -1.0") == "integration");
  CHECK(error_path("[integration]\nformulation = 'euler_poisson'\n[lagrangian]\nm = 0.0") == "integration");
  CHECK(error_path("[lagrangian]\nm = -1.0") == "lagrangian.m");
  CHECK(error_path("[verification]\nsamples = 0") == "verification.samples");
  CHECK(error_path("[convergence]\nsteps = [0.1, 0.2]") == "convergence.steps");
  CHECK(error_path("[output]\nformat = 'json'") == "output.format");
  CHECK(error_path("[metric\nbuiltin = 'flat'") == "config");
}

TEST_CASE("CSV number and field formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  CHECK(format_double(1e-7) == "9.9999999999999995e-08");
  SampleRng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-20, 20));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("report rows sort and serialize") {
  Report r;
  r.add({"b-check", "point 10", 1e-12, 1e-9});
  r.add({"b-check", "point 2", 2e-9, 1e-9});
  r.add({"a-check", "t 0.5", 0.0, 0.0});
  const auto rows = r.sorted();
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].check == "a-check");
  CHECK(rows[1].location == "point 2");
  CHECK(rows[2].location == "point 10");
  CHECK(rows[0].passed());
  CHECK_FALSE(rows[1].passed());
  CHECK(r.failures() == 1);
  std::ostringstream csv;
  r.write_csv(csv);
  CHECK(csv.str().rfind("check,location,residual,tolerance,verdict\r\n", 0) == 0);
  CHECK(csv.str().find("b-check,point 2,2.0000000000000001e-09,1.0000000000000001e-09,fail\r\n") !=
        std::string::npos);
}

TEST_CASE("check-metric") {
  TempDir dir;
  const fs::path cfg = dir.write("sphere.toml", "[metric]\nbuiltin = 'sphere(1)'\n");
  CHECK(run_cli({"check-metric", "--config", cfg.string(), "--out", (dir.path() / "s").string()}) == kExitPass);
  std::istringstream table(read(dir.path() / "s" / "curvature.csv"));
  std::string line;
  std::getline(table, line);
  CHECK(line == "point,x0,x1,K\r");
  int rows = 0;
  while (std::getline(table, line)) {
    CHECK(std::stod(line.substr(line.rfind(',') + 1)) == doctest::Approx(1.0).epsilon(1e-12));
    ++rows;
  }
  CHECK(rows == 50);

  CHECK(run_cli({"check-metric", "--out", (dir.path() / "f").string()}) == kExitPass);
  CHECK(read(dir.path() / "f" / "check-metric-report.csv").find(",fail") == std::string::npos);
}

TEST_CASE("verification commands") {
  TempDir dir;
  CHECK(run_cli({"verify-operators", "--out", dir.path().string()}) == kExitPass);
  CHECK(run_cli({"verify-variational", "--out", dir.path().string()}) == kExitPass);
  const std::string sphere = config_path("sphere-euler-poisson.toml");
  CHECK(run_cli({"verify-operators", "--config", sphere, "--out", dir.path().string()}) == kExitPass);
  const std::string report = read(dir.path() / "verify-operators-report.csv");
  for (const char* check : {"commutator-curvature", "momenta-relation-covariant/geodesic-circle",
                            "curvature-cancellation", "spin-rewrite"})
    CHECK(report.find(std::string(check) + ",") != std::string::npos);
  CHECK(report.find(",fail") == std::string::npos);

  CHECK(run_cli({"verify-variational", "--config", config_path("corrupted-source.toml"), "--out",
                 dir.path().string()}) == kExitCheckFailed);
  const std::string failed = read(dir.path() / "verify-variational-report.csv");
  CHECK(failed.find("variationality/corrupted-source,") != std::string::npos);
  CHECK(failed.find(",fail\r\n") != std::string::npos);
}

TEST_CASE("integrate writes reproducible trajectories") {
  TempDir dir;
  const std::string cfg = config_path("flat-circle.toml");
  const fs::path a = dir.path() / "a";
  const fs::path b = dir.path() / "b";
  const fs::path c = dir.path() / "c";
  REQUIRE(run_cli({"integrate", "--config", cfg, "--out", a.string()}) == kExitPass);
  REQUIRE(run_cli({"integrate", "--config", cfg, "--out", b.string()}) == kExitPass);
  const std::string first = read(a / "trajectory-0.csv");
  CHECK(first.rfind("t,x0,x1,u0,u1,w0,w1,speed,k,H,S01\r\n", 0) == 0);
  CHECK(first == read(b / "trajectory-0.csv"));

  // Re-running from the effective config reproduces the bytes.
  REQUIRE(run_cli({"integrate", "--config", (a / "effective-config.toml").string(), "--out", c.string()}) ==
          kExitPass);
  CHECK(read(c / "trajectory-0.csv") == first);

  const std::string report = read(a / "integrate-report.csv");
  CHECK(report.find("trajectory-0/closure,") != std::string::npos);
  CHECK(report.find(",fail") == std::string::npos);

  REQUIRE(run_cli({"convergence", "--config", cfg, "--out", a.string()}) == kExitPass);
  CHECK(read(a / "convergence.csv").rfind("h,error,difference,order\r\n", 0) == 0);
}

TEST_CASE("exit codes") {
  TempDir dir;
  const std::string out = (dir.path() / "o").string();
  const fs::path asym = dir.write("asym.toml", "[metric]\ng00 = '1'\ng01 = 'x0'\ng10 = 'x1'\ng11 = '1'\n");
  CHECK(run_cli({"check-metric", "--config", asym.string(), "--out", out}) == kExitConfigError);
  const fs::path no_u = dir.write("no-u.toml", "[[integration.initial]]\nx = [0, 0]\nw = [0, 1]\n");
  CHECK(run_cli({"integrate", "--config", no_u.string(), "--out", out}) == kExitConfigError);
  CHECK(run_cli({"integrate", "--out", out}) == kExitConfigError);
  CHECK(run_cli({"check-metric", "--config", (dir.path() / "missing.toml").string()}) == kExitConfigError);
  CHECK(run_cli({"check-metric", "--format", "json"}) == kExitConfigError);
  CHECK(run_cli({}) == kExitConfigError);
  const fs::path domain = dir.write("domain.toml", "[metric]\ng00 = '1'\ng01 = '0'\ng11 = 'sqrt(x0)'\n");
  CHECK(run_cli({"check-metric", "--config", domain.string(), "--out", out}) == kExitComputeError);

  CHECK(run_cli({"check-metric", "--seed", "7", "--out", out}) == kExitPass);
  CHECK(load_config((dir.path() / "o" / "effective-config.toml").string()).verification.seed == 7);
}
