#include <random>

#include "doctest.h"

#include "ngmpn/error.hpp"
#include "ngmpn/modelzoo.hpp"
#include "ngmpn/petri.hpp"

using namespace ngmpn;

namespace {

const char* kTiny = R"(
model tiny kind=vapn
param beta = 0.5
param gamma = 0.25
place S init=9
place I init=1 infected
place R init=0
trans infect
arc S -> infect weight="beta*S*I"
arc infect -> I weight="beta*S*I"
trans recover
arc I -> recover weight="gamma*I"
arc recover -> R weight="gamma*I"
)";

double at(const Expr& e, const PetriModel& m, std::span<const double> x) {
  return eval(e, state_bindings(m, m.params, x));
}

std::string with_line(const std::string& text, const std::string& extra) { return text + extra + "\n"; }

Finding find(const std::vector<Finding>& fs, const std::string& code) {
  for (const auto& f : fs)
    if (f.code == code) return f;
  return {code, FindingStatus::Info, "missing"};
}

}  // namespace

TEST_CASE("parse the SIRS layouts") {
  const auto& v = builtin("sirs").model;
  CHECK(v.kind == NetKind::Vapn);
  CHECK(v.places.size() == 3);
  CHECK(v.transitions.size() == 3);
  CHECK(v.arcs.size() == 6);
  CHECK(v.infected_places() == std::vector<std::size_t>{1});

  const auto& s = builtin("sirs_spn").model;
  CHECK(s.kind == NetKind::Spn);
  CHECK(s.transitions.size() == 3);
  for (const auto& t : s.transitions) CHECK(t.rate.has_value());
  int doubled = 0;
  for (const auto& a : s.arcs) doubled += a.mult == 2;
  CHECK(doubled == 1);
}

TEST_CASE("parse errors") {
  std::string tiny = kTiny;
  try {
    parse_model(with_line(tiny, "arc Q -> infect weight=\"1\""));
    FAIL("expected an error");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("'Q'") != std::string::npos);
    CHECK(e.line() > 0);
  }
  CHECK_THROWS_AS(parse_model(with_line(tiny, "place S init=1")), ModelError);
  CHECK_THROWS_AS(parse_model(with_line(tiny, "arc S -> I weight=\"1\"")), ModelError);          // not bipartite
  CHECK_THROWS_AS(parse_model(with_line(tiny, "trans t rate=\"1\"")), ModelError);                // rate in vapn
  CHECK_THROWS_AS(parse_model(with_line(tiny, "arc S -> recover mult=2")), ModelError);           // mult in vapn
  CHECK_THROWS_AS(parse_model(with_line(tiny, "arc S -> recover weight=\"kappa*S\"")), ModelError);  // unknown symbol
  CHECK_THROWS_AS(parse_model("model x kind=spn\nplace S init=1\ntrans t\narc S -> t\n"), ModelError);  // no rate
  CHECK_THROWS_AS(parse_model("model x kind=spn\nplace S init=1.5\ntrans t rate=\"S\"\narc S -> t\n"), ModelError);
  CHECK_THROWS_AS(parse_model("place S init=1\n"), ModelError);
  CHECK_THROWS_AS(parse_model("model x kind=vapn\nplace N init=1\n"), ModelError);
  CHECK_THROWS_AS(parse_model("model x kind=vapn\nplace S init=-1\n"), ModelError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.pnet"), Error);
}

TEST_CASE("comments, required params and dfe pins") {
  auto m = parse_model(R"(# leading comment
model p kind=vapn   # trailing comment
param a = 1
param b
place X init=2
place Y init=0 infected
dfe X = "a/b"
trans t
arc X -> t weight="a*X*Y"
arc t -> Y weight="a*X*Y"
)");
  CHECK(m.required_params == std::vector<std::string>{"b"});
  REQUIRE(m.dfe_pins.size() == 1);
  CHECK(m.dfe_pins[0].place == 0);
  CHECK_THROWS_AS(merged_params(m, {{"zeta", 1}}), ModelError);
  CHECK(merged_params(m, {{"b", 4}}).get("b") == 4);
}

TEST_CASE("net flow") {
  const auto& v = builtin("sirs").model;
  std::vector<double> x{990, 10, 5};
  // frequency-dependent incidence: -beta S I / N + delta R
  CHECK(at(net_flow(v, 0), v, x) == doctest::Approx(-0.3 * 990 * 10 / 1005 + 0.05 * 5));

  const auto& s = builtin("sirs_spn").model;
  CHECK(at(net_flow(s, 1), s, x) == doctest::Approx(0.3 * 990 * 10 / 1005 - 0.1 * 10));

  auto lone = parse_model("model l kind=vapn\nplace A init=1\nplace B init=0 infected\n");
  CHECK(net_flow(lone, 0).is_constant(0.0));
}

TEST_CASE("classification") {
  const auto& sirs = builtin("sirs").model;
  auto ft = classify_transitions(sirs);
  CHECK(ft.classes[0] == TransitionClass::Infection);
  CHECK(ft.classes[1] == TransitionClass::Transfer);
  CHECK_FALSE(ft.classes[2].has_value());  // wane never touches I
  REQUIRE(ft.entries[0].size() == 2);
  CHECK(ft.entries[0][0].tag == FlowTag::Infection);
  CHECK(ft.entries[0][1].tag == FlowTag::TransferOut);

  const auto& seir = builtin("seir").model;
  ft = classify_transitions(seir);
  auto onset = *seir.transition_index("onset");
  CHECK(ft.classes[onset] == TransitionClass::Transfer);
  bool out_of_E = false, into_I = false;
  for (const auto& e : ft.entries[0]) out_of_E |= e.transition == onset && e.tag == FlowTag::TransferOut;
  for (const auto& e : ft.entries[1]) into_I |= e.transition == onset && e.tag == FlowTag::TransferIn;
  CHECK(out_of_E);
  CHECK(into_I);

  const auto& vb = builtin("vector_borne").model;
  ft = classify_transitions(vb);
  auto immig = *vb.transition_index("immigrate");
  CHECK(ft.classes[immig] == TransitionClass::Transfer);
  bool self_in = false;
  for (const auto& e : ft.entries[0]) self_in |= e.transition == immig && e.tag == FlowTag::TransferIn;
  CHECK(self_in);
}

TEST_CASE("class override wins") {
  auto m = parse_model(R"(
model o kind=vapn
param k = 1
place A init=1
place B init=0 infected
trans move class=infection
arc B -> move weight="k*B"
arc move -> A weight="k*B"
)");
  CHECK(classify_transitions(m).classes[0] == TransitionClass::Infection);
}

TEST_CASE("assumption findings") {
  for (const auto& f : validate_assumptions(builtin("sirs").model)) CHECK(f.status == FindingStatus::Satisfied);

  auto src = parse_model(R"(
model s kind=vapn
param c = 1
place S init=1
place I init=0 infected
trans import
arc import -> I weight="c"
)");
  CHECK(find(validate_assumptions(src), "A4").status == FindingStatus::Violated);

  auto none = parse_model("model n kind=vapn\nplace S init=1\n");
  CHECK(find(validate_assumptions(none), "model").status == FindingStatus::Fatal);
}

TEST_CASE("property: flow table sums to the net flow; net flows of a conservative net cancel") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (const auto& id : builtin_ids()) {
    const auto& m = builtin(id).model;
    auto ft = classify_transitions(m);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> x(m.places.size());
      for (auto& v : x) v = u(rng);
      for (std::size_t i = 0; i < ft.infected.size(); ++i) {
        double sum = 0;
        for (const auto& e : ft.entries[i]) sum += at(e.flow, m, x);
        CHECK(sum == doctest::Approx(at(net_flow(m, ft.infected[i]), m, x)).epsilon(1e-12));
      }
    }
  }
  const auto& sirs = builtin("sirs_spn").model;
  Expr total;
  for (std::size_t p = 0; p < sirs.places.size(); ++p) total = total + net_flow(sirs, p);
  CHECK(simplify(total).is_constant(0.0));
}
