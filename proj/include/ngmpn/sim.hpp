#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngmpn/expr.hpp"
#include "ngmpn/petri.hpp"

namespace ngmpn {

struct Trajectory {
  std::vector<std::string> places;
  std::vector<double> times;
  std::vector<std::vector<double>> markings;  // one per time, aligned with places
  std::size_t clipping_events = 0;            // VAPN
  std::size_t firings = 0;                    // SPN
  std::optional<std::uint64_t> rng_seed;      // SPN
  std::string rng_algorithm;                  // SPN
};

/// Synchronous discrete-time stepping of a VAPN with every arc weight
/// compiled once. x' = x + dt * (inflow - outflow), all transitions firing
/// together from the pre-step marking.
///
/// When a place would go negative, the transitions consuming from it are
/// scaled down just enough to empty it. Scaling can starve other places,
/// so this repeats until the marking is non-negative; each place clipped in
/// a step counts as one clipping event.
class VapnStepper {
 public:
  VapnStepper(const PetriModel& m, const Bindings& params);

  /// Advances `x` in place; returns the number of clipping events.
  std::size_t step(std::vector<double>& x, double dt) const;

 private:
  struct ArcRef {
    std::size_t place;
    std::size_t transition;
    bool input;  // place -> transition
    Program weight;
  };
  std::size_t places_ = 0;
  std::size_t transitions_ = 0;
  std::vector<ArcRef> arcs_;
  std::vector<double> param_values_;
  // scratch, reused between steps
  mutable std::vector<double> slots_, weights_, in_, out_, scale_;
};

/// One synchronous step from `marking`.
std::vector<double> step_vapn(const PetriModel& m, const Bindings& params, std::vector<double> marking, double dt,
                              std::size_t* clipping_events = nullptr);

/// Steps from the initial marking to t_end, recording every
/// `record_every`-th step and the final state. The last step is shortened
/// when t_end is not a multiple of dt.
Trajectory run_vapn(const PetriModel& m, const Bindings& params, double t_end, double dt = 0.1,
                    std::size_t record_every = 1);

/// Gillespie direct method. Propensity of a transition is its rate
/// expression, or 0 while an input place holds fewer tokens than the arc
/// multiplicity. Sampled at multiples of `sample_interval` and at t_end; an
/// absorbed state (zero total propensity) is held to t_end.
Trajectory run_spn(const PetriModel& m, const Bindings& params, double t_end, std::uint64_t seed,
                   double sample_interval = 1.0);

/// "t,place1,...". With `replicate`, a leading replicate column is written
/// and the header is only emitted when `header` is true.
void write_csv(std::ostream& os, const Trajectory& traj, std::optional<std::size_t> replicate = std::nullopt,
               bool header = true);

}  // namespace ngmpn
