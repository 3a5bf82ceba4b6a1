#include "ngmpn/estimate.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "ngmpn/error.hpp"

namespace ngmpn {

EstimateResult attack_rate_r0(const Trajectory& traj, std::string_view susceptible, double n, double initial_infected,
                              double converge_tol) {
  if (!(n > 0.0)) throw DomainError("population size must be positive");
  auto it = std::find(traj.places.begin(), traj.places.end(), susceptible);
  if (it == traj.places.end()) throw Error("trajectory has no place '" + std::string(susceptible) + "'");
  const auto col = static_cast<std::size_t>(it - traj.places.begin());
  if (traj.markings.size() < 2) throw NumericError("trajectory is too short to estimate a final size");

  const std::size_t last = traj.markings.size() - 1;
  const std::size_t tail = last - std::max<std::size_t>(1, last / 10);
  double drift = std::abs(traj.markings[tail][col] - traj.markings[last][col]);
  if (drift > converge_tol * n)
    throw NumericError("susceptible series has not converged (moved " + std::to_string(drift) +
                       " over the last 10% of samples)");

  EstimateResult out;
  out.s0 = traj.markings.front()[col];
  out.s_inf = traj.markings[last][col];
  out.n = n;
  out.initial_infected = initial_infected;
  if (!(out.s0 > 0.0)) throw DomainError("no initial susceptibles");
  if (out.s_inf > out.s0) throw DomainError("susceptible count grew; the final-size relation does not apply");
  if (!(out.s_inf > 0.0)) throw DomainError("susceptibles exhausted; the final-size relation has no finite root");

  const double drop = out.s0 - out.s_inf;
  out.attack_rate = drop / n;
  if (drop == 0.0 && initial_infected == 0.0) {
    // ln(s0/s)/(s0 - s) -> 1/s0 as s -> s0.
    out.no_outbreak = true;
    out.r0_hat = n / out.s0;
    return out;
  }
  out.no_outbreak = drop == 0.0;
  out.r0_hat = n * -std::log1p(-drop / out.s0) / (drop + initial_infected);
  return out;
}

double rrmse(std::span<const std::pair<double, double>> rows) {
  if (rows.empty()) throw DomainError("rrmse of an empty set");
  double acc = 0.0;
  for (auto [alg, hat] : rows) {
    if (!(alg > 0.0)) throw DomainError("rrmse needs positive reference values");
    double e = (hat - alg) / alg;
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(rows.size()));
}

std::vector<double> GridAxis::values() const {
  std::vector<double> out;
  if (count == 1) return {lo};
  for (std::size_t i = 0; i < count; ++i) {
    double f = static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back(i + 1 == count ? hi : lo + f * (hi - lo));
  }
  return out;
}

GridAxis parse_grid_axis(std::string_view spec) {
  auto bad = [&](const std::string& why) {
    return Error("bad grid '" + std::string(spec) + "': " + why + " (expected name=lo:hi:count)");
  };
  auto eq = spec.find('=');
  if (eq == std::string_view::npos || eq == 0) throw bad("missing name");
  GridAxis axis;
  axis.name = std::string(spec.substr(0, eq));
  std::string_view rest = spec.substr(eq + 1);
  std::vector<std::string_view> parts;
  for (;;) {
    auto colon = rest.find(':');
    parts.push_back(rest.substr(0, colon));
    if (colon == std::string_view::npos) break;
    rest = rest.substr(colon + 1);
  }
  if (parts.size() != 3) throw bad("need three fields");
  auto num = [&](std::string_view s, double& v) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw bad("'" + std::string(s) + "' is not a number");
  };
  num(parts[0], axis.lo);
  num(parts[1], axis.hi);
  double count = 0.0;
  num(parts[2], count);
  if (count < 1 || count != std::floor(count)) throw bad("count must be a positive integer");
  axis.count = static_cast<std::size_t>(count);
  if (axis.count == 1 && axis.hi != axis.lo) throw bad("a single point needs lo == hi");
  return axis;
}

PetriModel with_initial(const PetriModel& m, const std::map<std::string, double>& initial) {
  PetriModel out = m;
  for (const auto& [name, value] : initial) {
    auto idx = out.place_index(name);
    if (!idx) throw ModelError("unknown place '" + name + "'");
    if (!(value >= 0.0)) throw ModelError("initial marking of '" + name + "' must be non-negative");
    out.places[*idx].init = value;
  }
  return out;
}

Trajectory run_to_final_size(const PetriModel& m, const Bindings& params, const SweepConfig& cfg) {
  auto s_idx = m.place_index(cfg.susceptible);
  if (!s_idx) throw ModelError("unknown susceptible place '" + cfg.susceptible + "'");
  const auto infected = m.infected_places();
  VapnStepper stepper(m, params);

  Trajectory traj;
  traj.places = m.place_names();
  std::vector<double> x = m.initial_marking();
  double n = 0.0;
  for (double v : x) n += v;
  traj.times.push_back(0.0);
  traj.markings.push_back(x);

  const auto every = static_cast<std::size_t>(std::max(1.0, std::round(1.0 / cfg.dt)));
  for (std::size_t k = 1;; ++k) {
    traj.clipping_events += stepper.step(x, cfg.dt);
    if (k % every != 0) continue;
    double t = static_cast<double>(k) * cfg.dt;
    traj.times.push_back(t);
    traj.markings.push_back(x);
    if (t >= cfg.t_max) break;

    double sick = 0.0;
    for (std::size_t p : infected) sick += x[p];
    if (sick > cfg.extinction_tol * n) continue;
    const std::size_t last = traj.markings.size() - 1;
    if (last < 10) continue;
    const std::size_t tail = last - last / 10;
    if (std::abs(traj.markings[tail][*s_idx] - x[*s_idx]) <= cfg.converge_tol * n) break;
  }
  return traj;
}

namespace {

SweepRow run_point(const PetriModel& m, const std::vector<std::string>& names, const std::vector<double>& point,
                   const SweepConfig& cfg) {
  SweepRow row;
  row.point = point;
  try {
    Bindings params = m.params;
    for (const auto& [k, v] : cfg.overrides.values()) params.set(k, v);
    for (std::size_t i = 0; i < names.size(); ++i) params.set(names[i], point[i]);

    NgmOptions opts;
    opts.pins = cfg.pins;
    row.r0_alg = ngm_r0(m, params, opts).r0;

    Trajectory traj = run_to_final_size(m, params, cfg);
    row.t_final = traj.times.back();
    double n = 0.0, i0 = 0.0;
    for (double v : traj.markings.front()) n += v;
    for (std::size_t p : m.infected_places()) i0 += traj.markings.front()[p];
    row.r0_hat = attack_rate_r0(traj, cfg.susceptible, n, i0, cfg.converge_tol).r0_hat;
    row.rel_err = (row.r0_hat - row.r0_alg) / row.r0_alg;
  } catch (const std::exception& e) {
    row.error = e.what();
    row.r0_hat = row.rel_err = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

}  // namespace

SweepReport sweep(const PetriModel& m_in, const std::vector<GridAxis>& grid, const SweepConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw Error("dt must be positive");
  const PetriModel m = with_initial(m_in, cfg.initial);
  merged_params(m, cfg.overrides);  // rejects unknown names
  SweepReport report;
  std::vector<std::vector<double>> axes;
  for (const auto& axis : grid) {
    bool declared = m.params.contains(axis.name) ||
                    std::find(m.required_params.begin(), m.required_params.end(), axis.name) != m.required_params.end();
    if (!declared) throw ModelError("unknown parameter '" + axis.name + "' in grid");
    report.params.push_back(axis.name);
    axes.push_back(axis.values());
  }

  std::vector<std::vector<double>> points(1);
  for (const auto& values : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : points)
      for (double v : values) {
        auto p = prefix;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    points = std::move(next);
  }

  report.rows.resize(points.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t i; (i = cursor.fetch_add(1)) < points.size();)
      report.rows[i] = run_point(m, report.params, points[i], cfg);
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(points.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<std::pair<double, double>> ok;
  for (const auto& row : report.rows) {
    if (!row.error.empty()) {
      ++report.failures;
      continue;
    }
    ok.push_back({row.r0_alg, row.r0_hat});
    report.max_rel_err = std::max(report.max_rel_err, std::abs(row.rel_err));
  }
  report.rrmse = ok.empty() ? std::numeric_limits<double>::quiet_NaN() : rrmse(ok);
  return report;
}

void write_sweep_csv(std::ostream& os, const SweepReport& report) {
  for (const auto& p : report.params) os << p << ',';
  os << "r0_alg,r0_hat,rel_err\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    os << buf;
  };
  for (const auto& row : report.rows) {
    for (double v : row.point) {
      put(v);
      os << ',';
    }
    put(row.r0_alg);
    os << ',';
    put(row.r0_hat);
    os << ',';
    put(row.rel_err);
    os << '\n';
  }
}

nlohmann::json sweep_summary(const SweepReport& report, const SweepConfig& cfg) {
  using nlohmann::json;
  json overrides = json::object();
  for (const auto& [k, v] : cfg.overrides.values()) overrides[k] = round12(v);
  json initial = json::object();
  for (const auto& [k, v] : cfg.initial) initial[k] = round12(v);
  json errors = json::array();
  for (const auto& row : report.rows) {
    if (row.error.empty()) continue;
    json point = json::object();
    for (std::size_t i = 0; i < report.params.size(); ++i) point[report.params[i]] = round12(row.point[i]);
    errors.push_back({{"point", std::move(point)}, {"error", row.error}});
  }
  auto num = [](double v) { return std::isfinite(v) ? json(round12(v)) : json(nullptr); };
  return {{"rrmse", num(report.rrmse)},
          {"max_rel_err", num(report.max_rel_err)},
          {"n_points", report.rows.size()},
          {"failures", report.failures},
          {"errors", std::move(errors)},
          {"config",
           {{"dt", round12(cfg.dt)},
            {"susceptible", cfg.susceptible},
            {"extinction_tol", cfg.extinction_tol},
            {"converge_tol", cfg.converge_tol},
            {"overrides", std::move(overrides)},
            {"initial", std::move(initial)}}}};
}

}  // namespace ngmpn
