#include "ngmpn/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <ostream>

#include "ngmpn/error.hpp"
#include "ngmpn/rng.hpp"

namespace ngmpn {

namespace {

Bindings resolve(const PetriModel& m, const Bindings& params) {
  Bindings b = m.params;
  for (const auto& [k, v] : params.values()) b.set(k, v);
  return b;
}

// Slot layout shared by all compiled programs: places, N, then parameters.
std::vector<std::string> slot_names(const PetriModel& m, const Bindings& params) {
  std::vector<std::string> names = m.place_names();
  names.emplace_back(kPopulationSymbol);
  for (const auto& [k, v] : params.values()) names.push_back(k);
  return names;
}

std::vector<double> param_values(const Bindings& params) {
  std::vector<double> out;
  for (const auto& [k, v] : params.values()) out.push_back(v);
  return out;
}

void fill_slots(std::vector<double>& slots, std::span<const double> x, std::span<const double> params) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    slots[i] = x[i];
    total += x[i];
  }
  slots[x.size()] = total;
  std::copy(params.begin(), params.end(), slots.begin() + static_cast<std::ptrdiff_t>(x.size() + 1));
}

}  // namespace

VapnStepper::VapnStepper(const PetriModel& m, const Bindings& params_in) {
  if (m.kind != NetKind::Vapn) throw ModelError("model '" + m.name + "' is not a vapn model");
  const Bindings params = resolve(m, params_in);
  for (const auto& name : m.required_params)
    if (!params.contains(name)) throw UnboundSymbol(name);
  auto slots = slot_names(m, params);
  places_ = m.places.size();
  transitions_ = m.transitions.size();
  for (const auto& a : m.arcs)
    arcs_.push_back({a.place, a.transition, a.direction == ArcDirection::PlaceToTransition, Program(a.weight, slots)});
  param_values_ = param_values(params);
  slots_.resize(slots.size());
  weights_.resize(arcs_.size());
  in_.resize(places_);
  out_.resize(places_);
  scale_.resize(transitions_);
}

std::size_t VapnStepper::step(std::vector<double>& x, double dt) const {
  if (!(dt > 0.0)) throw Error("step size must be positive");
  fill_slots(slots_, x, param_values_);
  for (std::size_t a = 0; a < arcs_.size(); ++a) {
    double w = arcs_[a].weight(slots_);
    if (!std::isfinite(w)) throw NumericError("arc weight evaluated to a non-finite value");
    if (w < 0.0) throw NumericError("arc weight evaluated to a negative value");
    weights_[a] = w;
  }
  std::fill(scale_.begin(), scale_.end(), 1.0);
  std::vector<bool> clipped(places_, false);
  std::vector<double> limit(transitions_);

  for (std::size_t round = 0;; ++round) {
    std::fill(in_.begin(), in_.end(), 0.0);
    std::fill(out_.begin(), out_.end(), 0.0);
    for (std::size_t a = 0; a < arcs_.size(); ++a) {
      double w = weights_[a] * scale_[arcs_[a].transition];
      (arcs_[a].input ? out_ : in_)[arcs_[a].place] += w;
    }
    std::fill(limit.begin(), limit.end(), 1.0);
    bool any = false;
    for (std::size_t p = 0; p < places_; ++p) {
      double next = x[p] + dt * (in_[p] - out_[p]);
      if (next >= 0.0 || out_[p] <= 0.0) continue;
      double f = std::max(0.0, (x[p] + dt * in_[p]) / (dt * out_[p]));
      for (const auto& a : arcs_)
        if (a.input && a.place == p) limit[a.transition] = std::min(limit[a.transition], f);
      clipped[p] = true;
      any = true;
    }
    if (!any) break;
    if (round > places_ + 1) throw NumericError("flow clipping did not settle");
    for (std::size_t t = 0; t < transitions_; ++t) scale_[t] *= limit[t];
  }

  std::size_t events = 0;
  for (std::size_t p = 0; p < places_; ++p) {
    x[p] += dt * (in_[p] - out_[p]);
    if (clipped[p]) {
      ++events;
      if (x[p] < 0.0) x[p] = 0.0;  // round-off left by the scaling
    }
  }
  return events;
}

std::vector<double> step_vapn(const PetriModel& m, const Bindings& params, std::vector<double> marking, double dt,
                              std::size_t* clipping_events) {
  if (marking.size() != m.places.size()) throw Error("marking has the wrong length");
  VapnStepper stepper(m, params);
  std::size_t events = stepper.step(marking, dt);
  if (clipping_events) *clipping_events = events;
  return marking;
}

Trajectory run_vapn(const PetriModel& m, const Bindings& params, double t_end, double dt, std::size_t record_every) {
  if (!(dt > 0.0)) throw Error("dt must be positive");
  if (!(t_end >= 0.0)) throw Error("t_end must be non-negative");
  if (record_every == 0) record_every = 1;
  VapnStepper stepper(m, params);
  Trajectory traj;
  traj.places = m.place_names();
  std::vector<double> x = m.initial_marking();
  traj.times.push_back(0.0);
  traj.markings.push_back(x);

  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  for (std::size_t k = 1; k <= steps; ++k) {
    double t = k == steps ? t_end : static_cast<double>(k) * dt;
    double h = k == steps ? t_end - static_cast<double>(k - 1) * dt : dt;
    if (std::abs(h - dt) <= 1e-9 * dt) h = dt;
    traj.clipping_events += stepper.step(x, h);
    if (k % record_every == 0 || k == steps) {
      traj.times.push_back(t);
      traj.markings.push_back(x);
    }
  }
  return traj;
}

Trajectory run_spn(const PetriModel& m, const Bindings& params_in, double t_end, std::uint64_t seed,
                   double sample_interval) {
  if (m.kind != NetKind::Spn) throw ModelError("model '" + m.name + "' is not an spn model");
  if (!(t_end >= 0.0)) throw Error("t_end must be non-negative");
  if (!(sample_interval > 0.0)) throw Error("sample interval must be positive");
  const Bindings params = resolve(m, params_in);
  for (const auto& name : m.required_params)
    if (!params.contains(name)) throw UnboundSymbol(name);

  const std::size_t np = m.places.size(), nt = m.transitions.size();
  auto names = slot_names(m, params);
  auto pvals = param_values(params);
  std::vector<Program> rates;
  for (const auto& t : m.transitions) rates.push_back(Program(*t.rate, names));
  std::vector<std::vector<std::pair<std::size_t, int>>> inputs(nt);
  std::vector<std::vector<std::pair<std::size_t, int>>> change(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    std::vector<int> delta(np, 0);
    for (const auto& a : m.arcs) {
      if (a.transition != t) continue;
      if (a.direction == ArcDirection::PlaceToTransition) {
        inputs[t].push_back({a.place, a.mult});
        delta[a.place] -= a.mult;
      } else {
        delta[a.place] += a.mult;
      }
    }
    for (std::size_t p = 0; p < np; ++p)
      if (delta[p] != 0) change[t].push_back({p, delta[p]});
  }

  Trajectory traj;
  traj.places = m.place_names();
  traj.rng_seed = seed;
  traj.rng_algorithm = std::string(kRngAlgorithm);
  Xoshiro256 rng(seed);

  std::vector<double> x = m.initial_marking();
  std::vector<double> slots(names.size()), a(nt);
  double t = 0.0;
  std::size_t next_sample = 0;
  auto record_until = [&](double limit) {
    // Samples at grid times strictly before `limit` see the current state.
    for (;;) {
      double g = static_cast<double>(next_sample) * sample_interval;
      if (g > t_end || g >= limit) break;
      traj.times.push_back(g);
      traj.markings.push_back(x);
      ++next_sample;
    }
  };

  for (;;) {
    fill_slots(slots, x, pvals);
    double a0 = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
      bool enabled = true;
      for (auto [p, mult] : inputs[k])
        if (x[p] < mult) enabled = false;
      double r = rates[k](slots);
      if (!std::isfinite(r)) throw NumericError("rate of '" + m.transitions[k].name + "' is not finite");
      if (r < 0.0) throw ModelError("rate of '" + m.transitions[k].name + "' is negative at a reachable marking");
      a[k] = enabled ? r : 0.0;
      a0 += a[k];
    }
    if (a0 <= 0.0) break;
    double tau = -std::log(rng.uniform_pos()) / a0;
    if (t + tau > t_end) break;
    record_until(t + tau);
    t += tau;
    double target = rng.uniform() * a0;
    std::size_t chosen = nt - 1;
    double acc = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
      acc += a[k];
      if (target < acc && a[k] > 0.0) {
        chosen = k;
        break;
      }
    }
    while (a[chosen] <= 0.0) --chosen;  // only reachable through round-off at the top end
    for (auto [p, d] : change[chosen]) x[p] += d;
    ++traj.firings;
  }
  record_until(std::numeric_limits<double>::infinity());
  if (traj.times.empty() || traj.times.back() < t_end) {
    traj.times.push_back(t_end);
    traj.markings.push_back(x);
  }
  return traj;
}

void write_csv(std::ostream& os, const Trajectory& traj, std::optional<std::size_t> replicate, bool header) {
  if (header) {
    if (replicate) os << "replicate,";
    os << 't';
    for (const auto& p : traj.places) os << ',' << p;
    os << '\n';
  }
  char buf[40];
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (replicate) os << *replicate << ',';
    std::snprintf(buf, sizeof buf, "%.12g", traj.times[i]);
    os << buf;
    for (double v : traj.markings[i]) {
      std::snprintf(buf, sizeof buf, "%.12g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace ngmpn
