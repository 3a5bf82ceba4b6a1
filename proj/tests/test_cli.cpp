#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "commands.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ngmpn");
  std::ostringstream out, err;
  int code = ngmpn::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string models(const char* f) { return std::string(NGMPN_MODELS_DIR) + "/" + f; }

fs::path scratch(const char* name) {
  auto dir = fs::temp_directory_path() / "ngmpn_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("validate") {
  auto r = cli({"validate", models("sirs.pnet")});
  CHECK(r.code == 0);
  CHECK(r.out.find("A1..A5 satisfied") != std::string::npos);

  auto bad = scratch("source.pnet");
  std::ofstream(bad) << "model s kind=vapn\nparam c = 1\nplace S init=1\nplace I init=1 infected\n"
                        "trans import\narc import -> I weight=\"c\"\ntrans rec\narc I -> rec weight=\"c*I\"\n";
  r = cli({"validate", bad.string()});
  CHECK(r.code == 1);
  CHECK(r.out.find("A4 violated") != std::string::npos);

  r = cli({"validate", "/nonexistent.pnet"});
  CHECK(r.code == 2);
  CHECK(r.err.find("nonexistent") != std::string::npos);
}

TEST_CASE("r0") {
  auto r = cli({"r0", "--builtin", "sirs", "-p", "beta=0.3", "-p", "gamma=0.1", "-p", "delta=0.05"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["r0"] == 3.0);

  r = cli({"r0", "--builtin", "seeir", "-p", "p=0.4", "-p", "nu1=0.2", "-p", "nu2=0.1", "-p", "mu=0.01", "-p",
           "beta=0.5", "-p", "gamma=0.25"});
  REQUIRE(r.code == 0);
  double want = (0.4 * 0.2 / 0.21 + 0.6 * 0.1 / 0.11) * 0.5 / 0.26;
  CHECK(std::abs(nlohmann::json::parse(r.out)["r0"].get<double>() - want) <= 1e-9 * (1 + want));

  auto req = scratch("required.pnet");
  std::ofstream(req) << "model q kind=vapn\nparam gamma\nplace S init=1\nplace I init=1 infected\n"
                        "trans r\narc I -> r weight=\"gamma*I\"\n";
  r = cli({"r0", req.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("'gamma'") != std::string::npos);
  CHECK(cli({"r0", req.string(), "-p", "gamma=0.5"}).code == 0);

  CHECK(cli({"r0", "--builtin", "sirs", "-p", "kappa=1"}).code == 1);
  CHECK(cli({"r0", "--builtin", "sirs", "-p", "beta"}).code == 2);
  CHECK(cli({"r0"}).code == 2);
  CHECK(cli({"r0", "--builtin", "sirs", models("sirs.pnet")}).code == 2);
  CHECK(cli({"r0", "--builtin", "nope"}).code == 2);

  r = cli({"r0", "--builtin", "covid", "--dfe", "R=Rstar", "-p", "Rstar=5000"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["dfe"]["marking"][5] == 5000.0);

  // output is stable
  CHECK(cli({"r0", "--builtin", "patch2"}).out == cli({"r0", "--builtin", "patch2"}).out);
}

TEST_CASE("simulate") {
  auto out = scratch("traj.csv");
  auto r = cli({"simulate", "--builtin", "sirs", "--dt", "0.1", "--t-end", "300", "-o", out.string()});
  REQUIRE(r.code == 0);
  std::string csv = slurp(out);
  CHECK(csv.rfind("t,S,I,R\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3002);

  auto a = cli({"simulate", "--builtin", "sirs_spn", "--seed", "42", "--replicates", "3", "--t-end", "50"});
  auto b = cli({"simulate", "--builtin", "sirs_spn", "--seed", "42", "--replicates", "3", "--t-end", "50"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("replicate,t,S,I,R\n", 0) == 0);
  CHECK(a.out.find("\n2,50,") != std::string::npos);
  CHECK(a.err.find("xoshiro256**") != std::string::npos);

  setenv("NGMPN_SEED", "42", 1);
  auto c = cli({"simulate", "--builtin", "sirs_spn", "--replicates", "3", "--t-end", "50"});
  unsetenv("NGMPN_SEED");
  CHECK(c.out == a.out);
  auto d = cli({"simulate", "--builtin", "sirs_spn", "--seed", "43", "--replicates", "3", "--t-end", "50"});
  CHECK(d.out != a.out);

  auto j = cli({"simulate", "--builtin", "sirs", "--t-end", "1", "--format", "json"});
  REQUIRE(j.code == 0);
  CHECK(nlohmann::json::parse(j.out)["places"].size() == 3);

  CHECK(cli({"simulate", "--builtin", "sirs", "--dt", "0"}).code == 2);
  CHECK(cli({"simulate", "--builtin", "sirs", "--dt", "-1"}).code == 2);
  CHECK(cli({"simulate", "--builtin", "sirs", "--format", "xml"}).code == 2);
  CHECK(cli({"simulate", "--builtin", "sirs", "-o", "/nonexistent/dir/x.csv"}).code == 2);
}

TEST_CASE("sweep") {
  auto csv = scratch("sweep.csv"), sum = scratch("sweep.json");
  auto r = cli({"sweep", "--builtin", "sirs", "--grid", "beta=0.1:0.5:5", "--grid", "gamma=0.05:0.25:5", "-o",
                csv.string(), "--summary", sum.string(), "--jobs", "2"});
  REQUIRE(r.code == 0);
  std::string rows = slurp(csv);
  CHECK(rows.rfind("beta,gamma,r0_alg,r0_hat,rel_err\n", 0) == 0);
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 26);
  auto j = nlohmann::json::parse(slurp(sum));
  CHECK(j["n_points"] == 25);
  CHECK(j["rrmse"].get<double>() < 0.01);

  r = cli({"sweep", "--builtin", "nonlinear", "--grid", "beta=0.2:0.8:3", "sigma=0.1:0.4:2", "gamma=0.1:0.4:2"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.err)["rrmse"].get<double>() < 0.012);

  CHECK(cli({"sweep", "--builtin", "sirs", "--grid", "kappa=1:2:2"}).code == 1);
  CHECK(cli({"sweep", "--builtin", "sirs", "--grid", "beta=1:2"}).code == 2);
  CHECK(cli({"sweep", models("seeir.pnet")}).code == 2);  // no grid
}

TEST_CASE("list-models and usage") {
  auto r = cli({"list-models"});
  CHECK(r.code == 0);
  CHECK(r.out.find("vector_borne") != std::string::npos);
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("installed binary") {
  std::string cmd = std::string(NGMPN_CLI_BIN) + " r0 --builtin sirs > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  cmd = std::string(NGMPN_CLI_BIN) + " validate /nonexistent.pnet 2> /dev/null";
  int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
