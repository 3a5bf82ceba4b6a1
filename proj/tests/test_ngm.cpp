#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"

#include "ngmpn/error.hpp"
#include "ngmpn/modelzoo.hpp"
#include "ngmpn/ngm.hpp"

using namespace ngmpn;

namespace {

Bindings with(const PetriModel& m, std::initializer_list<std::pair<const std::string, double>> kv) {
  Bindings b = m.params;
  for (const auto& [k, v] : kv) b.set(k, v);
  return b;
}

double at_dfe(const Expr& e, const PetriModel& m, const Bindings& params, const std::vector<double>& dfe) {
  return eval(e, state_bindings(m, params, dfe));
}

// Same model text with the infected place declarations in reverse order.
std::string reverse_infected(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> lines;
  std::vector<std::size_t> slots;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("place ", 0) == 0 && line.find(" infected") != std::string::npos) slots.push_back(lines.size());
    lines.push_back(line);
  }
  std::vector<std::string> moved;
  for (auto i : slots) moved.push_back(lines[i]);
  std::reverse(moved.begin(), moved.end());
  for (std::size_t k = 0; k < slots.size(); ++k) lines[slots[k]] = moved[k];
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

TEST_CASE("disease-free equilibria") {
  const auto& sirs = builtin("sirs").model;
  auto d = compute_dfe(sirs, sirs.params);
  CHECK(d.marking == std::vector<double>{1000, 0, 0});
  CHECK(d.method == DfeMethod::ConservationAugmented);
  CHECK(d.residual <= 1e-10);

  const auto& seir = builtin("seir").model;
  d = compute_dfe(seir, with(seir, {{"Pi", 2}, {"mu", 0.01}}));
  CHECK(d.marking[0] == doctest::Approx(200).epsilon(1e-12));
  CHECK(d.marking[1] == 0.0);
  CHECK(d.marking[3] == doctest::Approx(0).epsilon(1e-12));
  CHECK(d.method == DfeMethod::Newton);

  const auto& vb = builtin("vector_borne").model;
  d = compute_dfe(vb, vb.params);
  CHECK(d.marking[*vb.place_index("Sh")] == doctest::Approx(100));
  CHECK(d.marking[*vb.place_index("Sv")] == doctest::Approx(200));

  const auto& covid = builtin("covid").model;
  d = compute_dfe(covid, with(covid, {{"Rstar", 1500}}));
  CHECK(d.marking[*covid.place_index("R")] == doctest::Approx(1500));
  CHECK(d.marking[0] == doctest::Approx(8500));
  CHECK(d.method == DfeMethod::ConservationAugmented);  // S still needs the total

  const auto& vb2 = builtin("vector_borne").model;
  d = compute_dfe(vb2, vb2.params, {{*vb2.place_index("Sh"), parse_expr("Pi/mu_h")},
                                    {*vb2.place_index("Rh"), Expr::constant(0)},
                                    {*vb2.place_index("Sv"), parse_expr("Lambda/mu_v")}});
  CHECK(d.method == DfeMethod::Annotated);
  CHECK(d.marking[*vb2.place_index("Sv")] == doctest::Approx(200));
}

TEST_CASE("dfe failures are loud") {
  // S and R are both free once delta = 0 and nothing pins them.
  const auto& sirs = builtin("sirs").model;
  CHECK_THROWS_AS(compute_dfe(sirs, with(sirs, {{"delta", 0}})), NumericError);
  CHECK_NOTHROW(compute_dfe(sirs, with(sirs, {{"delta", 0}}), {{2, Expr::constant(0)}}));

  auto neg = parse_model(R"(
model neg kind=vapn
param a = 1
place S init=1
place I init=0 infected
trans drain
arc S -> drain weight="a"
)");
  CHECK_THROWS_AS(compute_dfe(neg, neg.params), NumericError);
}

TEST_CASE("script F") {
  auto sym = [](const PetriModel& m) { return build_script_F(m, classify_transitions(m)); };
  const auto& sv = builtin("sirs").model;
  const auto& ss = builtin("sirs_spn").model;
  std::vector<double> x{990, 10, 5};
  auto fv = sym(sv), fs = sym(ss);
  REQUIRE(fv.size() == 1);
  CHECK(at_dfe(fv[0], sv, sv.params, x) == doctest::Approx(0.3 * 990 * 10 / 1005));
  CHECK(at_dfe(fs[0], ss, ss.params, x) == doctest::Approx(at_dfe(fv[0], sv, sv.params, x)));

  const auto& seir = builtin("seir").model;
  auto f = sym(seir);
  REQUIRE(f.size() == 2);
  CHECK(f[1].is_constant(0.0));
  auto f2 = sym(builtin("seir_spn").model);
  CHECK(f2[1].is_constant(0.0));

  const auto& seeir = builtin("seeir").model;
  f = sym(seeir);
  REQUIRE(f.size() == 3);
  std::vector<double> y{900, 5, 5, 10, 80};
  double inc = 0.5 * 900 * 10 / 1000;
  CHECK(at_dfe(f[0], seeir, seeir.params, y) == doctest::Approx(0.4 * inc));
  CHECK(at_dfe(f[1], seeir, seeir.params, y) == doctest::Approx(0.6 * inc));
  CHECK(f[2].is_constant(0.0));
}

TEST_CASE("script V") {
  const auto& seir = builtin("seir").model;
  auto v = build_script_V(seir, classify_transitions(seir));
  std::vector<double> x{8, 2, 3, 1};
  const auto& p = seir.params;  // eta 0.3, mu 0.1, alpha 0.2
  CHECK(at_dfe(v[0][0], seir, p, x) == doctest::Approx(0.3 * 2 + 0.1 * 2));
  CHECK(at_dfe(v[0][1], seir, p, x) == 0.0);
  CHECK(at_dfe(v[1][0], seir, p, x) == doctest::Approx(-0.3 * 2));
  CHECK(at_dfe(v[1][1], seir, p, x) == doctest::Approx(0.2 * 3 + 0.1 * 3));

  const auto& covid = builtin("covid").model;
  v = build_script_V(covid, classify_transitions(covid));
  std::vector<double> c{9000, 40, 20, 30, 10, 900};
  const auto& q = covid.params;
  CHECK(at_dfe(v[1][0], covid, q, c) == doctest::Approx(-0.4 * 0.2 * 40));  // -r sigma E
  CHECK(at_dfe(v[1][1], covid, q, c) == doctest::Approx(0.2 * 20));         // gamma_a Ia
  CHECK(at_dfe(v[1][2], covid, q, c) == 0.0);
  CHECK(at_dfe(v[1][3], covid, q, c) == 0.0);

  const auto& vb = builtin("vector_borne").model;
  v = build_script_V(vb, classify_transitions(vb));
  std::vector<double> w{90, 4, 3, 180, 6};
  const auto& r = vb.params;
  CHECK(at_dfe(v[0][0], vb, r, w) == doctest::Approx((0.1 + 0.05 + 0.2 - 0.05) * 4));
  CHECK(at_dfe(v[1][1], vb, r, w) == doctest::Approx(0.2 * 6));
  CHECK(at_dfe(v[0][1], vb, r, w) == 0.0);
  CHECK(at_dfe(v[1][0], vb, r, w) == 0.0);
}

TEST_CASE("Jacobians at the DFE") {
  const auto& sirs = builtin("sirs").model;
  auto r = ngm_r0(sirs, with(sirs, {{"beta", 0.3}, {"gamma", 0.1}}));
  CHECK(r.F(0, 0) == doctest::Approx(0.3));
  CHECK(r.V(0, 0) == doctest::Approx(0.1));

  const auto& seir = builtin("seir").model;
  r = ngm_r0(seir, seir.params);
  CHECK(r.F(0, 0) == 0.0);
  CHECK(r.F(0, 1) == doctest::Approx(0.5 * 1 / 0.1));
  CHECK(r.F(1, 0) == 0.0);
  CHECK(r.F(1, 1) == 0.0);

  const auto& nl = builtin("nonlinear").model;
  r = ngm_r0(nl, nl.params);
  CHECK(r.F(0, 1) == doctest::Approx(0.8));
  CHECK(r.F(0, 0) == 0.0);
  CHECK(r.fd_discrepancy < 1e-6);
}

TEST_CASE("spectral radius") {
  CHECK(spectral_radius(Matrix{{3}}).r0 == doctest::Approx(3));
  auto s = spectral_radius(Matrix{{0, 2}, {8, 0}});
  CHECK(s.r0 == doctest::Approx(4));
  CHECK(s.tie);  // +4 and -4
  CHECK(s.dominant.real() == doctest::Approx(4));
  CHECK_THROWS_AS(spectral_radius(Matrix{{std::nan(""), 0}, {0, 1}}), NumericError);

  const auto& seeir = builtin("seeir").model;
  auto p = with(seeir, {{"p", 0.4}, {"nu1", 0.2}, {"nu2", 0.1}, {"mu", 0.01}, {"beta", 0.5}, {"gamma", 0.25}});
  double want = (0.4 * 0.2 / 0.21 + 0.6 * 0.1 / 0.11) * 0.5 / 0.26;
  CHECK(ngm_r0(seeir, p).r0 == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("end-to-end R0 examples") {
  const auto& sirs = builtin("sirs").model;
  CHECK(ngm_r0(sirs, with(sirs, {{"beta", 0.3}, {"gamma", 0.1}, {"delta", 0.05}})).r0 == doctest::Approx(3.0).epsilon(1e-12));
  const auto& seir = builtin("seir").model;
  auto r = ngm_r0(seir, with(seir, {{"beta", 0.5}, {"Pi", 1}, {"mu", 0.1}, {"eta", 0.3}, {"alpha", 0.2}}));
  CHECK(r.r0 == doctest::Approx(12.5).epsilon(1e-12));
  const auto& nl = builtin("nonlinear").model;
  for (double alpha : {0.0, 0.1, 5.0, 100.0})
    CHECK(ngm_r0(nl, with(nl, {{"alpha", alpha}})).r0 == doctest::Approx(0.25 * 0.8 / (0.3 * 0.25)).epsilon(1e-12));
  const auto& vb = builtin("vector_borne").model;
  CHECK(ngm_r0(vb, vb.params).r0 == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("ill-posed models are rejected") {
  auto m = parse_model(R"(
model flat kind=vapn
param beta = 1
place S init=10
place I init=1 infected
trans infect
arc S -> infect weight="beta*S*I"
arc infect -> I weight="beta*S*I"
)");
  CHECK_THROWS_AS(ngm_r0(m, m.params), NumericError);  // V = 0

  auto req = parse_model("model q kind=vapn\nparam g\nplace S init=1\nplace I init=0 infected\ntrans r\narc I -> r weight=\"g*I\"\n");
  try {
    ngm_r0(req, req.params);
    FAIL("expected an unbound symbol");
  } catch (const UnboundSymbol& e) {
    CHECK(e.name() == "g");
  }
}

TEST_CASE("property: DFE invariants on every zoo model") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& id : builtin_ids()) {
    const auto& z = builtin(id);
    for (int k = 0; k < 20; ++k) {
      auto p = draw_params(z, [&] { return u(rng); });
      auto r = ngm_r0(z.model, p);
      const auto T = r.F.rows();
      for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = 0; j < T; ++j) {
          CHECK(r.F(i, j) >= -1e-12);
          if (i != j) CHECK(r.V(i, j) <= 1e-12);
        }
      CHECK(check_a5(r.V).status == FindingStatus::Satisfied);
      CHECK(std::abs(r.spectral.dominant.imag()) <= 1e-9 * (1 + r.r0));
      CHECK(r.fd_discrepancy <= 1e-6);
      for (double v : r.dfe.marking) CHECK(v >= 0.0);
      for (std::size_t i : z.model.infected_places()) CHECK(r.dfe.marking[i] == 0.0);
    }
  }
}

TEST_CASE("property: R0 does not depend on infected-place order") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& id : builtin_ids()) {
    const auto& z = builtin(id);
    auto swapped = parse_model(reverse_infected(z.source));
    for (int k = 0; k < 10; ++k) {
      auto p = draw_params(z, [&] { return u(rng); });
      double a = ngm_r0(z.model, p).r0, b = ngm_r0(swapped, p).r0;
      CHECK(b == doctest::Approx(a).epsilon(1e-9));
    }
  }
}

TEST_CASE("JSON result") {
  const auto& sirs = builtin("sirs").model;
  auto j = to_json(ngm_r0(sirs, sirs.params), sirs);
  CHECK(j["r0"] == 3.0);
  CHECK(j["infected"] == nlohmann::json::array({"I"}));
  CHECK(j["dfe"]["marking"] == nlohmann::json::array({1000.0, 0.0, 0.0}));
  CHECK(j["dfe"]["method"] == "conservation-augmented");
  for (const char* key : {"F", "V", "Vinv", "K", "script_F", "script_V", "diagnostics", "findings"}) CHECK(j.contains(key));
  CHECK(round12(0.1 + 0.2) == 0.3);
}
