#include "ngmpn/petri.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ngmpn {

std::optional<std::size_t> PetriModel::place_index(std::string_view n) const {
  for (std::size_t i = 0; i < places.size(); ++i)
    if (places[i].name == n) return i;
  return std::nullopt;
}

std::optional<std::size_t> PetriModel::transition_index(std::string_view n) const {
  for (std::size_t i = 0; i < transitions.size(); ++i)
    if (transitions[i].name == n) return i;
  return std::nullopt;
}

std::vector<std::size_t> PetriModel::infected_places() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < places.size(); ++i)
    if (places[i].infected) out.push_back(i);
  return out;
}

std::vector<std::string> PetriModel::place_names() const {
  std::vector<std::string> out;
  for (const auto& p : places) out.push_back(p.name);
  return out;
}

std::vector<double> PetriModel::initial_marking() const {
  std::vector<double> out;
  for (const auto& p : places) out.push_back(p.init);
  return out;
}

Aggregates PetriModel::population() const {
  std::set<std::string> members;
  for (const auto& p : places) members.insert(p.name);
  return {{std::string(kPopulationSymbol), std::move(members)}};
}

void PetriModel::validate() const {
  std::set<std::string> names;
  for (const auto& p : places) {
    if (!names.insert(p.name).second) throw ModelError("duplicate name '" + p.name + "'");
    if (!(p.init >= 0.0)) throw ModelError("place '" + p.name + "' has negative initial marking");
    if (kind == NetKind::Spn && p.init != std::floor(p.init))
      throw ModelError("place '" + p.name + "' needs an integer marking in a stochastic net");
  }
  for (const auto& t : transitions) {
    if (!names.insert(t.name).second) throw ModelError("duplicate name '" + t.name + "'");
    if (kind == NetKind::Spn && !t.rate) throw ModelError("transition '" + t.name + "' needs a rate");
    if (kind == NetKind::Vapn && t.rate) throw ModelError("transition '" + t.name + "' has a rate in a vapn model");
  }
  if (names.count(std::string(kPopulationSymbol))) throw ModelError("'N' is reserved for the total population");
  for (const auto& [param, value] : params.values()) {
    if (param == kPopulationSymbol) throw ModelError("'N' is reserved for the total population");
    if (names.count(param)) throw ModelError("parameter '" + param + "' shadows a place or transition");
  }

  std::set<std::string> allowed;
  for (const auto& p : places) allowed.insert(p.name);
  for (const auto& [param, value] : params.values()) allowed.insert(param);
  allowed.insert(required_params.begin(), required_params.end());
  allowed.insert(std::string(kPopulationSymbol));
  auto check_symbols = [&](const Expr& e, const std::string& where) {
    for (const auto& s : free_symbols(e))
      if (!allowed.count(s)) throw ModelError("unknown symbol '" + s + "' in " + where);
  };

  std::set<std::tuple<std::size_t, std::size_t, ArcDirection>> seen;
  for (const auto& a : arcs) {
    if (a.place >= places.size() || a.transition >= transitions.size()) throw ModelError("arc endpoint out of range");
    const auto& pname = places[a.place].name;
    const auto& tname = transitions[a.transition].name;
    std::string label = a.direction == ArcDirection::PlaceToTransition ? pname + " -> " + tname : tname + " -> " + pname;
    if (!seen.insert({a.place, a.transition, a.direction}).second) throw ModelError("duplicate arc " + label);
    if (kind == NetKind::Spn && a.mult < 1) throw ModelError("arc " + label + " needs a positive multiplicity");
    check_symbols(a.weight, "arc " + label);
  }
  for (const auto& t : transitions)
    if (t.rate) check_symbols(*t.rate, "rate of '" + t.name + "'");

  std::set<std::string> param_names;
  for (const auto& [param, value] : params.values()) param_names.insert(param);
  param_names.insert(required_params.begin(), required_params.end());
  for (const auto& pin : dfe_pins) {
    if (pin.place >= places.size()) throw ModelError("dfe pin names an unknown place");
    if (places[pin.place].infected) throw ModelError("dfe pin on infected place '" + places[pin.place].name + "'");
    for (const auto& s : free_symbols(pin.value))
      if (!param_names.count(s)) throw ModelError("dfe value for '" + places[pin.place].name + "' uses non-parameter '" + s + "'");
  }
}

Bindings merged_params(const PetriModel& m, const Bindings& overrides) {
  Bindings out = m.params;
  for (const auto& [name, value] : overrides.values()) {
    bool declared = m.params.contains(name) ||
                    std::find(m.required_params.begin(), m.required_params.end(), name) != m.required_params.end();
    if (!declared) throw ModelError("unknown parameter '" + name + "'");
    out.set(name, value);
  }
  return out;
}

Bindings state_bindings(const PetriModel& m, const Bindings& params, std::span<const double> marking) {
  Bindings b = params;
  double total = 0.0;
  for (std::size_t i = 0; i < m.places.size(); ++i) {
    b.set(m.places[i].name, marking[i]);
    total += marking[i];
  }
  b.set(std::string(kPopulationSymbol), total);
  return b;
}

// ---------------------------------------------------------------------------
// Model file parser

namespace {

struct Token {
  std::string text;
  bool quoted = false;
};

std::vector<Token> tokenize(std::string_view line, int lineno) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    Token tok;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
      if (line[i] == '"') {
        std::size_t close = line.find('"', i + 1);
        if (close == std::string_view::npos) throw ModelError("unterminated string", lineno);
        tok.text.append(line.substr(i + 1, close - i - 1));
        tok.quoted = true;
        i = close + 1;
      } else {
        tok.text.push_back(line[i++]);
      }
    }
    out.push_back(std::move(tok));
  }
  return out;
}

bool valid_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

double parse_real(std::string_view s, int lineno) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ModelError("expected a number, got '" + std::string(s) + "'", lineno);
  return v;
}

int parse_int(std::string_view s, int lineno) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ModelError("expected an integer, got '" + std::string(s) + "'", lineno);
  return v;
}

Expr parse_quoted_expr(const std::string& text, int lineno) {
  try {
    return parse_expr(text);
  } catch (const ParseError& e) {
    throw ModelError(std::string("bad expression: ") + e.what(), lineno);
  }
}

std::pair<std::string, std::string> split_option(const Token& tok, int lineno) {
  auto eq = tok.text.find('=');
  if (eq == std::string::npos) throw ModelError("expected key=value, got '" + tok.text + "'", lineno);
  return {tok.text.substr(0, eq), tok.text.substr(eq + 1)};
}

// "NAME = VALUE", "NAME= VALUE", "NAME =VALUE" and "NAME=VALUE" all split to (NAME, VALUE).
std::pair<std::string, Token> name_equals_value(std::span<const Token> toks, int lineno) {
  std::string joined;
  bool quoted = false;
  for (const auto& t : toks) {
    joined += t.text;
    quoted = quoted || t.quoted;
  }
  auto eq = joined.find('=');
  if (eq == std::string::npos || toks.empty()) throw ModelError("expected NAME = VALUE", lineno);
  return {joined.substr(0, eq), Token{joined.substr(eq + 1), quoted}};
}

enum class Stage { Start, Params, Places, Body };

struct PendingArc {
  std::string src, dst;
  std::optional<Expr> weight;
  std::optional<int> mult;
  int line = 0;
};

}  // namespace

PetriModel parse_model(std::string_view text) {
  PetriModel m;
  Stage stage = Stage::Start;
  std::vector<PendingArc> pending;
  std::vector<std::pair<std::string, std::pair<Expr, int>>> pins;
  std::map<std::string, int> declared;  // name -> line

  auto declare = [&](const std::string& name, int lineno) {
    if (!valid_identifier(name)) throw ModelError("invalid name '" + name + "'", lineno);
    if (name == kPopulationSymbol) throw ModelError("'N' is reserved for the total population", lineno);
    auto [it, fresh] = declared.emplace(name, lineno);
    if (!fresh) throw ModelError("duplicate name '" + name + "' (first declared on line " + std::to_string(it->second) + ")", lineno);
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    // Strip comments that are not inside a quoted expression.
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quote = !in_quote;
      if (line[i] == '#' && !in_quote) {
        line = line.substr(0, i);
        break;
      }
    }
    auto toks = tokenize(line, lineno);
    if (toks.empty()) continue;
    const std::string& kw = toks[0].text;

    if (kw == "model") {
      if (stage != Stage::Start) throw ModelError("'model' must be the first statement", lineno);
      if (toks.size() < 2) throw ModelError("model needs a name", lineno);
      m.name = toks[1].text;
      bool have_kind = false;
      for (std::size_t i = 2; i < toks.size(); ++i) {
        auto [key, value] = split_option(toks[i], lineno);
        if (key != "kind") throw ModelError("unknown model option '" + key + "'", lineno);
        if (value == "vapn") m.kind = NetKind::Vapn;
        else if (value == "spn") m.kind = NetKind::Spn;
        else throw ModelError("kind must be vapn or spn", lineno);
        have_kind = true;
      }
      if (!have_kind) throw ModelError("model needs kind=vapn|spn", lineno);
      stage = Stage::Params;
      continue;
    }
    if (stage == Stage::Start) throw ModelError("expected 'model' statement first", lineno);

    if (kw == "param") {
      if (stage != Stage::Params) throw ModelError("params must precede places and transitions", lineno);
      if (toks.size() == 2 && toks[1].text.find('=') == std::string::npos) {
        declare(toks[1].text, lineno);
        m.required_params.push_back(toks[1].text);
        continue;
      }
      auto [name, value] = name_equals_value(std::span(toks).subspan(1), lineno);
      declare(name, lineno);
      m.params.set(name, parse_real(value.text, lineno));
    } else if (kw == "place") {
      if (stage == Stage::Body) throw ModelError("places must precede transitions and arcs", lineno);
      stage = Stage::Places;
      if (toks.size() < 2) throw ModelError("place needs a name", lineno);
      Place p;
      p.name = toks[1].text;
      declare(p.name, lineno);
      bool have_init = false;
      for (std::size_t i = 2; i < toks.size(); ++i) {
        if (toks[i].text == "infected" && !toks[i].quoted) {
          p.infected = true;
          continue;
        }
        auto [key, value] = split_option(toks[i], lineno);
        if (key != "init") throw ModelError("unknown place option '" + key + "'", lineno);
        p.init = parse_real(value, lineno);
        have_init = true;
      }
      if (!have_init) throw ModelError("place '" + p.name + "' needs init=", lineno);
      m.places.push_back(std::move(p));
    } else if (kw == "dfe") {
      if (stage == Stage::Params || stage == Stage::Start) throw ModelError("dfe pins must follow the places", lineno);
      auto [name, value] = name_equals_value(std::span(toks).subspan(1), lineno);
      pins.push_back({name, {parse_quoted_expr(value.text, lineno), lineno}});
    } else if (kw == "trans") {
      if (stage == Stage::Params) throw ModelError("places must precede transitions", lineno);
      stage = Stage::Body;
      if (toks.size() < 2) throw ModelError("trans needs a name", lineno);
      Transition t;
      t.name = toks[1].text;
      declare(t.name, lineno);
      for (std::size_t i = 2; i < toks.size(); ++i) {
        auto [key, value] = split_option(toks[i], lineno);
        if (key == "rate") {
          if (m.kind != NetKind::Spn) throw ModelError("rate= is only valid in spn models", lineno);
          t.rate = parse_quoted_expr(value, lineno);
        } else if (key == "class") {
          if (value == "infection") t.class_override = TransitionClass::Infection;
          else if (value == "transfer") t.class_override = TransitionClass::Transfer;
          else throw ModelError("class must be infection or transfer", lineno);
        } else {
          throw ModelError("unknown transition option '" + key + "'", lineno);
        }
      }
      if (m.kind == NetKind::Spn && !t.rate) throw ModelError("transition '" + t.name + "' needs rate= in an spn model", lineno);
      m.transitions.push_back(std::move(t));
    } else if (kw == "arc") {
      if (stage == Stage::Params) throw ModelError("places must precede arcs", lineno);
      stage = Stage::Body;
      if (toks.size() < 4 || toks[2].text != "->") throw ModelError("expected 'arc SRC -> DST'", lineno);
      PendingArc a;
      a.src = toks[1].text;
      a.dst = toks[3].text;
      a.line = lineno;
      for (std::size_t i = 4; i < toks.size(); ++i) {
        auto [key, value] = split_option(toks[i], lineno);
        if (key == "weight") {
          if (m.kind != NetKind::Vapn) throw ModelError("weight= is only valid in vapn models; use mult=", lineno);
          a.weight = parse_quoted_expr(value, lineno);
        } else if (key == "mult") {
          if (m.kind != NetKind::Spn) throw ModelError("mult= is only valid in spn models; use weight=", lineno);
          a.mult = parse_int(value, lineno);
          if (*a.mult < 1) throw ModelError("mult must be a positive integer", lineno);
        } else {
          throw ModelError("unknown arc option '" + key + "'", lineno);
        }
      }
      if (m.kind == NetKind::Vapn && !a.weight) throw ModelError("arc needs weight= in a vapn model", lineno);
      pending.push_back(std::move(a));
    } else {
      throw ModelError("unknown statement '" + kw + "'", lineno);
    }
  }
  if (stage == Stage::Start) throw ModelError("missing 'model' statement");

  for (const auto& a : pending) {
    auto src_place = m.place_index(a.src);
    auto src_trans = m.transition_index(a.src);
    auto dst_place = m.place_index(a.dst);
    auto dst_trans = m.transition_index(a.dst);
    if (!src_place && !src_trans) throw ModelError("arc source '" + a.src + "' is not a declared place or transition", a.line);
    if (!dst_place && !dst_trans) throw ModelError("arc target '" + a.dst + "' is not a declared place or transition", a.line);
    Arc arc;
    if (src_place && dst_trans) {
      arc.place = *src_place;
      arc.transition = *dst_trans;
      arc.direction = ArcDirection::PlaceToTransition;
    } else if (src_trans && dst_place) {
      arc.place = *dst_place;
      arc.transition = *src_trans;
      arc.direction = ArcDirection::TransitionToPlace;
    } else {
      throw ModelError("arc " + a.src + " -> " + a.dst + " must join a place and a transition", a.line);
    }
    arc.mult = a.mult.value_or(1);
    arc.weight = a.weight ? *a.weight : Expr::constant(arc.mult);
    m.arcs.push_back(std::move(arc));
  }
  for (const auto& [name, pin] : pins) {
    auto idx = m.place_index(name);
    if (!idx) throw ModelError("dfe pin names unknown place '" + name + "'", pin.second);
    m.dfe_pins.push_back({*idx, pin.first});
  }
  m.validate();
  return m;
}

PetriModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

// ---------------------------------------------------------------------------
// Flows

std::optional<Expr> transition_flow(const PetriModel& m, std::size_t t, std::size_t p) {
  std::vector<Expr> in, out;
  int in_mult = 0, out_mult = 0;
  for (const auto& a : m.arcs) {
    if (a.transition != t || a.place != p) continue;
    if (a.direction == ArcDirection::TransitionToPlace) {
      out.push_back(a.weight);
      out_mult += a.mult;
    } else {
      in.push_back(a.weight);
      in_mult += a.mult;
    }
  }
  if (in.empty() && out.empty()) return std::nullopt;
  if (m.kind == NetKind::Spn) {
    const Expr& rate = *m.transitions[t].rate;
    auto scaled = [&](int k) { return k == 1 ? rate : Expr::mul({Expr::constant(k), rate}); };
    if (in_mult == 0) return scaled(out_mult);
    if (out_mult == 0) return Expr::neg(scaled(in_mult));
    return Expr::sub(scaled(out_mult), scaled(in_mult));
  }
  Expr gain = Expr::add(out);
  Expr loss = Expr::add(in);
  if (in.empty()) return gain;
  if (out.empty()) return Expr::neg(loss);
  return Expr::sub(gain, loss);
}

Expr net_flow(const PetriModel& m, std::size_t place) {
  std::vector<Expr> terms;
  for (std::size_t t = 0; t < m.transitions.size(); ++t)
    if (auto f = transition_flow(m, t, place)) terms.push_back(*f);
  return simplify(Expr::add(std::move(terms)));
}

namespace {

struct Touch {
  bool input_from_noninfected = false;
  bool input_from_infected = false;
  bool has_input = false;
  bool output_to_infected = false;
  bool touches_infected = false;
};

Touch touch_of(const PetriModel& m, std::size_t t) {
  Touch out;
  for (const auto& a : m.arcs) {
    if (a.transition != t) continue;
    bool inf = m.places[a.place].infected;
    if (a.direction == ArcDirection::PlaceToTransition) {
      out.has_input = true;
      (inf ? out.input_from_infected : out.input_from_noninfected) = true;
    } else if (inf) {
      out.output_to_infected = true;
    }
    out.touches_infected = out.touches_infected || inf;
  }
  return out;
}

}  // namespace

FlowTable classify_transitions(const PetriModel& m) {
  FlowTable table;
  table.infected = m.infected_places();
  table.classes.resize(m.transitions.size());
  for (std::size_t t = 0; t < m.transitions.size(); ++t) {
    Touch touch = touch_of(m, t);
    if (!touch.touches_infected) continue;
    if (m.transitions[t].class_override) {
      table.classes[t] = m.transitions[t].class_override;
    } else if (!touch.has_input && touch.output_to_infected) {
      table.classes[t] = TransitionClass::Source;
    } else if (touch.input_from_noninfected && touch.output_to_infected) {
      table.classes[t] = TransitionClass::Infection;
    } else {
      table.classes[t] = TransitionClass::Transfer;
    }
  }

  Bindings probe;  // used only to orient self-loops for display
  {
    auto marking = m.initial_marking();
    for (std::size_t i : table.infected) marking[i] = std::max(marking[i], 1.0);
    probe = state_bindings(m, m.params, marking);
  }

  table.entries.resize(table.infected.size());
  for (std::size_t k = 0; k < table.infected.size(); ++k) {
    std::size_t p = table.infected[k];
    for (std::size_t t = 0; t < m.transitions.size(); ++t) {
      auto flow = transition_flow(m, t, p);
      if (!flow) continue;
      FlowTag tag = FlowTag::TransferOut;
      switch (*table.classes[t]) {
        case TransitionClass::Infection:
          tag = FlowTag::Infection;
          break;
        case TransitionClass::Source:
          tag = FlowTag::Source;
          break;
        case TransitionClass::Transfer: {
          bool in = false, out = false;
          for (const auto& a : m.arcs) {
            if (a.transition != t || a.place != p) continue;
            (a.direction == ArcDirection::PlaceToTransition ? out : in) = true;
          }
          if (in && out) {
            double v = 0.0;
            try {
              v = eval(*flow, probe);
            } catch (const Error&) {
            }
            tag = v >= 0.0 ? FlowTag::TransferIn : FlowTag::TransferOut;
          } else {
            tag = in ? FlowTag::TransferIn : FlowTag::TransferOut;
          }
          break;
        }
      }
      table.entries[k].push_back({t, *flow, tag});
    }
  }
  return table;
}

std::vector<Finding> validate_assumptions(const PetriModel& m) {
  std::vector<Finding> out;
  auto infected = m.infected_places();
  if (infected.empty()) {
    out.push_back({"model", FindingStatus::Fatal, "no infected places: the next-generation matrix is undefined"});
    return out;
  }
  out.push_back({"A1", FindingStatus::Satisfied, "transitions never drive a marking negative (firing rule)"});
  out.push_back({"A2", FindingStatus::Satisfied, "an empty place cannot enable a transition that consumes from it"});

  FlowTable table = classify_transitions(m);
  Bindings probe = state_bindings(m, m.params, m.initial_marking());

  bool a3 = true;
  for (std::size_t t = 0; t < m.transitions.size(); ++t) {
    if (table.classes[t] != TransitionClass::Infection) continue;
    std::vector<Expr> to_healthy, from_infected;
    for (const auto& a : m.arcs) {
      if (a.transition != t) continue;
      bool inf = m.places[a.place].infected;
      Expr amount = m.kind == NetKind::Spn ? Expr::constant(a.mult) : a.weight;
      if (a.direction == ArcDirection::TransitionToPlace && !inf) to_healthy.push_back(amount);
      if (a.direction == ArcDirection::PlaceToTransition && inf) from_infected.push_back(amount);
    }
    if (to_healthy.empty()) continue;
    Expr excess = simplify(Expr::sub(Expr::add(to_healthy), Expr::add(from_infected)));
    double v = 1.0;
    if (excess.is_constant()) {
      v = excess.number();
    } else {
      try {
        v = eval(excess, probe);
      } catch (const Error&) {
      }
    }
    if (v > 1e-12) {
      a3 = false;
      out.push_back({"A3", FindingStatus::Violated,
                     "infection transition '" + m.transitions[t].name + "' places tokens into non-infected places"});
    }
  }
  if (a3) out.push_back({"A3", FindingStatus::Satisfied, "infection transitions only feed infected places"});

  bool a4 = true;
  for (std::size_t t = 0; t < m.transitions.size(); ++t) {
    if (table.classes[t] != TransitionClass::Source) continue;
    a4 = false;
    out.push_back({"A4", FindingStatus::Violated,
                   "source transition '" + m.transitions[t].name + "' adds tokens to an infected place at the disease-free state"});
  }
  if (a4) out.push_back({"A4", FindingStatus::Satisfied, "no transition creates infected tokens from nothing"});
  return out;
}

std::string to_string(NetKind k) { return k == NetKind::Vapn ? "vapn" : "spn"; }

std::string to_string(TransitionClass c) {
  switch (c) {
    case TransitionClass::Infection:
      return "infection";
    case TransitionClass::Transfer:
      return "transfer";
    case TransitionClass::Source:
      return "source";
  }
  return "?";
}

std::string to_string(FlowTag t) {
  switch (t) {
    case FlowTag::Infection:
      return "infection";
    case FlowTag::TransferOut:
      return "transfer-out";
    case FlowTag::TransferIn:
      return "transfer-in";
    case FlowTag::Source:
      return "source";
  }
  return "?";
}

std::string to_string(FindingStatus s) {
  switch (s) {
    case FindingStatus::Satisfied:
      return "satisfied";
    case FindingStatus::Violated:
      return "violated";
    case FindingStatus::Fatal:
      return "fatal";
    case FindingStatus::Info:
      return "info";
  }
  return "?";
}

}  // namespace ngmpn
