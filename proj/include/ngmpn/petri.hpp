#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ngmpn/expr.hpp"

namespace ngmpn {

/// Variable-arc-weight (deterministic, discrete time) or stochastic net.
enum class NetKind { Vapn, Spn };

enum class TransitionClass { Infection, Transfer, Source };

/// Reserved symbol for the total marking.
inline constexpr std::string_view kPopulationSymbol = "N";

struct Place {
  std::string name;
  bool infected = false;
  double init = 0.0;
};

struct Transition {
  std::string name;
  std::optional<Expr> rate;  // SPN only
  std::optional<TransitionClass> class_override;
};

enum class ArcDirection { PlaceToTransition, TransitionToPlace };

struct Arc {
  std::size_t place = 0;
  std::size_t transition = 0;
  ArcDirection direction = ArcDirection::PlaceToTransition;
  Expr weight;   // VAPN weight expression; the multiplicity as a constant for SPN
  int mult = 1;  // SPN multiplicity
};

/// Disease-free equilibrium value pinned for a place, as an expression over
/// the parameters.
struct DfePin {
  std::size_t place = 0;
  Expr value;
};

struct PetriModel {
  std::string name;
  NetKind kind = NetKind::Vapn;
  std::vector<Place> places;
  std::vector<Transition> transitions;
  std::vector<Arc> arcs;
  Bindings params;
  std::vector<std::string> required_params;  // declared without a default value
  std::vector<DfePin> dfe_pins;

  std::optional<std::size_t> place_index(std::string_view name) const;
  std::optional<std::size_t> transition_index(std::string_view name) const;
  std::vector<std::size_t> infected_places() const;
  std::vector<std::string> place_names() const;
  std::vector<double> initial_marking() const;
  /// N -> every place, for differentiating through the population total.
  Aggregates population() const;

  /// Checks the structural invariants; throws ModelError on the first failure.
  void validate() const;
};

/// Model params overlaid with `overrides`; an override naming an undeclared
/// parameter throws ModelError.
Bindings merged_params(const PetriModel& m, const Bindings& overrides);

/// Parameters plus one binding per place and N = sum of the marking.
Bindings state_bindings(const PetriModel& m, const Bindings& params, std::span<const double> marking);

PetriModel parse_model(std::string_view text);
PetriModel load_model(const std::string& path);

/// Signed contribution of transition t to place p before simplification, e.g.
/// "2*beta*S*I - beta*S*I" for an SPN infection. Empty when t and p share no arc.
std::optional<Expr> transition_flow(const PetriModel& m, std::size_t transition, std::size_t place);

/// Net inflow into place p, simplified.
Expr net_flow(const PetriModel& m, std::size_t place);

enum class FlowTag { Infection, TransferOut, TransferIn, Source };

struct FlowEntry {
  std::size_t transition = 0;
  Expr flow;
  FlowTag tag = FlowTag::TransferOut;
};

/// Per infected place, the signed flow of each transition touching it.
struct FlowTable {
  std::vector<std::size_t> infected;                    // place indices, declaration order
  std::vector<std::optional<TransitionClass>> classes;  // per transition; empty if it never touches an infected place
  std::vector<std::vector<FlowEntry>> entries;          // aligned with `infected`
};

FlowTable classify_transitions(const PetriModel& m);

enum class FindingStatus { Satisfied, Violated, Fatal, Info };

struct Finding {
  std::string code;  // "A1".."A5" or "model"
  FindingStatus status = FindingStatus::Satisfied;
  std::string message;
};

/// Structural checks of the next-generation assumptions A1-A4. A5 needs
/// parameter values; see check_assumptions in ngm.hpp.
std::vector<Finding> validate_assumptions(const PetriModel& m);

std::string to_string(NetKind k);
std::string to_string(TransitionClass c);
std::string to_string(FlowTag t);
std::string to_string(FindingStatus s);

}  // namespace ngmpn
