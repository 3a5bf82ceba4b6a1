#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ngmpn/estimate.hpp"
#include "ngmpn/expr.hpp"
#include "ngmpn/petri.hpp"

namespace ngmpn {

struct ZooSweep {
  Bindings overrides;
  std::map<std::string, double> initial;
  std::map<std::string, std::string> dfe;  // place -> expression
  double dt = 0.05;
  std::vector<std::string> grid;
};

struct ZooEntry {
  std::string id;
  std::string file;
  std::string description;
  std::string source;  // DSL text
  PetriModel model;
  std::optional<Expr> closed_form;  // absent for patch2, whose oracle is a matrix eigenvalue
  std::map<std::string, std::pair<double, double>> ranges;
  std::string susceptible;
  std::optional<std::string> twin;  // the other encoding of the same ODEs
  std::optional<ZooSweep> sweep;
};

/// Throws Error for an unknown id.
const ZooEntry& builtin(const std::string& id);
std::vector<std::string> builtin_ids();

/// R0 from the model's published closed form, computed without the ngm
/// module. N is the total initial marking. Unbound parameters throw.
double oracle_r0(const ZooEntry& entry, const Bindings& params);

/// Entry parameters with every ranged one redrawn by `u`, a uniform [0,1) source.
template <class Uniform>
Bindings draw_params(const ZooEntry& entry, Uniform&& u) {
  Bindings b = entry.model.params;
  for (const auto& [name, range] : entry.ranges) b.set(name, range.first + u() * (range.second - range.first));
  return b;
}

/// SweepConfig seeded from the entry's sweep defaults.
SweepConfig sweep_config(const ZooEntry& entry);

}  // namespace ngmpn
