#include "commands.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ngmpn/error.hpp"
#include "ngmpn/estimate.hpp"
#include "ngmpn/modelzoo.hpp"
#include "ngmpn/ngm.hpp"
#include "ngmpn/petri.hpp"
#include "ngmpn/rng.hpp"
#include "ngmpn/sim.hpp"

namespace ngmpn::cli {

namespace {

using nlohmann::json;

struct UsageError : Error {
  using Error::Error;
};

// Problems reading or parsing the model map to exit code 2.
struct LoadError : Error {
  using Error::Error;
};

struct Options {
  std::string model_path;
  std::string builtin_id;
  std::vector<std::string> params;
  std::vector<std::string> inits;
  std::vector<std::string> pins;
  std::optional<double> dt;
  double t_end = 100.0;
  double sample = 1.0;
  std::optional<std::uint64_t> seed;
  std::size_t replicates = 1;
  std::string output;
  std::string summary;
  std::string format = "csv";
  std::vector<std::string> grid;
  unsigned jobs = 1;
};

std::pair<std::string, double> key_value(const std::string& text, const char* what) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError(std::string("bad ") + what + " '" + text + "', expected name=value");
  std::string name = text.substr(0, eq), value = text.substr(eq + 1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size())
    throw UsageError(std::string("bad ") + what + " '" + text + "': '" + value + "' is not a number");
  return {name, v};
}

struct Loaded {
  PetriModel model;
  const ZooEntry* entry = nullptr;
};

Loaded load(const Options& o) {
  if (o.model_path.empty() == o.builtin_id.empty()) throw UsageError("give exactly one of a model file or --builtin");
  Loaded l;
  try {
    if (!o.builtin_id.empty()) {
      l.entry = &builtin(o.builtin_id);
      l.model = l.entry->model;
    } else {
      l.model = load_model(o.model_path);
    }
  } catch (const Error& e) {
    throw LoadError(e.what());
  }
  std::map<std::string, double> initial;
  for (const auto& s : o.inits) initial.insert(key_value(s, "--init"));
  if (!initial.empty()) l.model = with_initial(l.model, initial);
  return l;
}

Bindings params_of(const Loaded& l, const Options& o) {
  Bindings overrides;
  for (const auto& s : o.params) {
    auto [k, v] = key_value(s, "-p");
    overrides.set(k, v);
  }
  return merged_params(l.model, overrides);
}

std::vector<DfePin> pins_of(const PetriModel& m, const Options& o) {
  std::vector<DfePin> pins;
  for (const auto& s : o.pins) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("bad --dfe '" + s + "', expected place=expression");
    auto idx = m.place_index(s.substr(0, eq));
    if (!idx) throw ModelError("--dfe names unknown place '" + s.substr(0, eq) + "'");
    pins.push_back({*idx, parse_expr(s.substr(eq + 1))});
  }
  return pins;
}

// Writes to -o when given, else to `out`.
template <class F>
void emit(const std::string& path, std::ostream& out, F&& write) {
  if (path.empty() || path == "-") {
    write(out);
    return;
  }
  std::ofstream f(path);
  if (!f) throw LoadError("cannot open '" + path + "' for writing");
  write(f);
  if (!f) throw LoadError("error writing '" + path + "'");
}

int cmd_validate(const Options& o, std::ostream& out) {
  Loaded l = load(o);
  NgmOptions opts;
  opts.pins = pins_of(l.model, o);
  auto findings = check_assumptions(l.model, params_of(l, o), opts);
  bool ok = true;
  for (const auto& f : findings) {
    out << f.code << ' ' << to_string(f.status) << ": " << f.message << '\n';
    if (f.status == FindingStatus::Violated || f.status == FindingStatus::Fatal) ok = false;
  }
  out << (ok ? "A1..A5 satisfied\n" : "assumptions not satisfied\n");
  return ok ? kOk : kDomain;
}

int cmd_r0(const Options& o, std::ostream& out) {
  Loaded l = load(o);
  NgmOptions opts;
  opts.pins = pins_of(l.model, o);
  auto result = ngm_r0(l.model, params_of(l, o), opts);
  emit(o.output, out, [&](std::ostream& os) { os << to_json(result, l.model).dump(2) << '\n'; });
  return kOk;
}

json trajectory_json(const Trajectory& t) {
  json markings = json::array();
  for (const auto& row : t.markings) {
    json r = json::array();
    for (double v : row) r.push_back(round12(v));
    markings.push_back(std::move(r));
  }
  json times = json::array();
  for (double v : t.times) times.push_back(round12(v));
  json j = {{"places", t.places}, {"times", times}, {"markings", markings}};
  if (t.rng_seed) {
    j["rng_seed"] = *t.rng_seed;
    j["rng_algorithm"] = t.rng_algorithm;
    j["firings"] = t.firings;
  } else {
    j["clipping_events"] = t.clipping_events;
  }
  return j;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.dt && !(*o.dt > 0.0)) throw UsageError("--dt must be positive");
  if (!(o.t_end >= 0.0)) throw UsageError("--t-end must be non-negative");
  if (o.replicates == 0) throw UsageError("--replicates must be at least 1");
  if (o.format != "csv" && o.format != "json") throw UsageError("--format must be csv or json");
  Loaded l = load(o);
  Bindings params = params_of(l, o);

  std::vector<Trajectory> runs;
  if (l.model.kind == NetKind::Vapn) {
    if (o.replicates != 1) throw UsageError("--replicates needs an spn model");
    runs.push_back(run_vapn(l.model, params, o.t_end, o.dt.value_or(0.1)));
    if (runs[0].clipping_events > 0)
      err << "warning: " << runs[0].clipping_events << " clipping events; consider a smaller --dt\n";
  } else {
    std::uint64_t seed = 1;
    if (o.seed) {
      seed = *o.seed;
    } else if (const char* env = std::getenv("NGMPN_SEED")) {
      std::string s(env);
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("NGMPN_SEED is not an integer");
    }
    for (std::size_t r = 0; r < o.replicates; ++r)
      runs.push_back(run_spn(l.model, params, o.t_end, derive_seed(seed, r), o.sample));
    err << "# rng " << kRngAlgorithm << ", seed " << seed << '\n';
  }

  emit(o.output, out, [&](std::ostream& os) {
    if (o.format == "json") {
      json all = json::array();
      for (const auto& t : runs) all.push_back(trajectory_json(t));
      os << (runs.size() == 1 ? all[0] : all).dump(2) << '\n';
      return;
    }
    if (runs.size() == 1) {
      write_csv(os, runs[0]);
      return;
    }
    for (std::size_t r = 0; r < runs.size(); ++r) write_csv(os, runs[r], r, r == 0);
  });
  return kOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.dt && !(*o.dt > 0.0)) throw UsageError("--dt must be positive");
  Loaded l = load(o);
  SweepConfig cfg = l.entry ? sweep_config(*l.entry) : SweepConfig{};
  if (o.dt) cfg.dt = *o.dt;
  cfg.jobs = o.jobs;
  for (const auto& s : o.params) {
    auto [k, v] = key_value(s, "-p");
    cfg.overrides.set(k, v);
  }
  for (const auto& s : o.inits) cfg.initial.insert_or_assign(key_value(s, "--init").first, key_value(s, "--init").second);
  auto extra = pins_of(l.model, o);
  cfg.pins.insert(cfg.pins.end(), extra.begin(), extra.end());

  std::vector<std::string> specs = o.grid;
  if (specs.empty() && l.entry && l.entry->sweep) specs = l.entry->sweep->grid;
  if (specs.empty()) throw UsageError("sweep needs at least one --grid");
  std::vector<GridAxis> grid;
  for (const auto& s : specs) {
    try {
      grid.push_back(parse_grid_axis(s));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }

  // --init was folded into the model by load(); the sweep re-applies cfg.initial.
  auto report = sweep(l.model, grid, cfg);
  emit(o.output, out, [&](std::ostream& os) { write_sweep_csv(os, report); });
  std::string summary = sweep_summary(report, cfg).dump(2) + "\n";
  if (!o.summary.empty())
    emit(o.summary, out, [&](std::ostream& os) { os << summary; });
  else
    (o.output.empty() ? err : out) << summary;
  return report.failures == 0 ? kOk : kDomain;
}

int cmd_list(std::ostream& out) {
  for (const auto& id : builtin_ids()) {
    const auto& e = builtin(id);
    out << id << '\t' << to_string(e.model.kind) << '\t' << e.model.places.size() << " places\t" << e.description
        << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Basic reproduction numbers of Petri net epidemic models", "ngmpn"};
  app.require_subcommand(1);
  Options o;

  auto model_source = [&](CLI::App* sub) {
    sub->add_option("model", o.model_path, "model file (.pnet)");
    sub->add_option("--builtin,-b", o.builtin_id, "bundled model id (see list-models)");
    sub->add_option("-p,--param", o.params, "parameter override name=value")->allow_extra_args(false);
    sub->add_option("--init", o.inits, "initial marking override place=value")->allow_extra_args(false);
  };
  auto* validate = app.add_subcommand("validate", "check the next-generation assumptions");
  model_source(validate);
  validate->add_option("--dfe", o.pins, "pin a disease-free value place=expression")->allow_extra_args(false);

  auto* r0 = app.add_subcommand("r0", "next-generation matrix and R0 as JSON");
  model_source(r0);
  r0->add_option("--dfe", o.pins, "pin a disease-free value place=expression")->allow_extra_args(false);
  r0->add_option("-o,--output", o.output, "output file");

  auto* simulate = app.add_subcommand("simulate", "simulate a trajectory");
  model_source(simulate);
  simulate->add_option("--dt", o.dt, "VAPN step (default 0.1)");
  simulate->add_option("--t-end", o.t_end, "end time")->capture_default_str();
  simulate->add_option("--sample", o.sample, "SPN sampling interval")->capture_default_str();
  simulate->add_option("--seed", o.seed, "SPN seed (default $NGMPN_SEED, else 1)");
  simulate->add_option("--replicates", o.replicates, "SPN replicates")->capture_default_str();
  simulate->add_option("--format", o.format, "csv or json")->capture_default_str();
  simulate->add_option("-o,--output", o.output, "output file");

  auto* sweep_cmd = app.add_subcommand("sweep", "algebraic versus attack-rate R0 over a grid");
  model_source(sweep_cmd);
  sweep_cmd->add_option("--grid", o.grid, "axis name=lo:hi:count, repeatable");
  sweep_cmd->add_option("--dfe", o.pins, "pin a disease-free value place=expression")->allow_extra_args(false);
  sweep_cmd->add_option("--dt", o.dt, "VAPN step (default 0.05)");
  sweep_cmd->add_option("--jobs,-j", o.jobs, "worker threads")->capture_default_str();
  sweep_cmd->add_option("-o,--output", o.output, "CSV output file");
  sweep_cmd->add_option("--summary", o.summary, "JSON summary file");

  auto* list = app.add_subcommand("list-models", "bundled models");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(o, out);
    if (r0->parsed()) return cmd_r0(o, out);
    if (simulate->parsed()) return cmd_simulate(o, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(o, out, err);
    if (list->parsed()) return cmd_list(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDomain;
  }
  return kUsage;
}

}  // namespace ngmpn::cli
