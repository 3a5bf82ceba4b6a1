#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ngmpn/ngm.hpp"
#include "ngmpn/petri.hpp"
#include "ngmpn/sim.hpp"

namespace ngmpn {

struct EstimateResult {
  double r0_hat = 0.0;
  double attack_rate = 0.0;  // (s0 - s_inf) / n
  double s0 = 0.0;
  double s_inf = 0.0;
  double n = 0.0;
  double initial_infected = 0.0;
  bool no_outbreak = false;  // s_inf == s0; r0_hat is the analytic limit
  std::optional<std::pair<double, double>> ci95;  // never filled by the final-size method
};

/// R0 from the final-size relation
///   ln(s0 / s_inf) = r0 * (s0 - s_inf + i0) / n,
/// where i0 counts the tokens initially in infected places. With i0 = 0
/// this is the textbook attack-rate estimator.
///
/// Throws NumericError when the susceptible series has not settled: the
/// change over the last 10% of samples must be at most `converge_tol * n`.
EstimateResult attack_rate_r0(const Trajectory& traj, std::string_view susceptible, double n,
                              double initial_infected = 0.0, double converge_tol = 1e-6);

/// sqrt(mean(((hat - alg) / alg)^2)) over (alg, hat) pairs.
double rrmse(std::span<const std::pair<double, double>> rows);

/// Inclusive linear axis "name=lo:hi:count".
struct GridAxis {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 1;

  std::vector<double> values() const;
};

GridAxis parse_grid_axis(std::string_view spec);

struct SweepConfig {
  double dt = 0.05;
  double t_max = 1e6;             // hard cap on simulated time
  double extinction_tol = 1e-9;   // stop once infected tokens <= tol * n ...
  double converge_tol = 1e-6;     // ... and S moved <= tol * n over the last 10% of time
  Bindings overrides;             // applied at every grid point, e.g. delta = 0
  std::map<std::string, double> initial;  // initial-marking overrides
  std::vector<DfePin> pins;
  std::string susceptible = "S";
  unsigned jobs = 1;
};

struct SweepRow {
  std::vector<double> point;  // aligned with SweepReport::params
  double r0_alg = 0.0;
  double r0_hat = 0.0;
  double rel_err = 0.0;
  double t_final = 0.0;
  std::string error;  // non-empty when the point failed
};

struct SweepReport {
  std::vector<std::string> params;
  std::vector<SweepRow> rows;  // grid-lexicographic, first axis slowest
  double rrmse = 0.0;
  double max_rel_err = 0.0;
  std::size_t failures = 0;
};

/// Copy of `m` with some initial markings replaced; unknown places throw.
PetriModel with_initial(const PetriModel& m, const std::map<std::string, double>& initial);

/// Deterministic run of a VAPN until the epidemic is over (see SweepConfig),
/// sampled once per unit time.
Trajectory run_to_final_size(const PetriModel& m, const Bindings& params, const SweepConfig& cfg);

/// Algebraic R0 versus attack-rate R0 at every grid point.
SweepReport sweep(const PetriModel& m, const std::vector<GridAxis>& grid, const SweepConfig& cfg);

void write_sweep_csv(std::ostream& os, const SweepReport& report);
nlohmann::json sweep_summary(const SweepReport& report, const SweepConfig& cfg);

}  // namespace ngmpn
