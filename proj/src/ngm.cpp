#include "ngmpn/ngm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>

#include "ngmpn/error.hpp"

namespace ngmpn {

namespace {

// Model defaults overlaid with whatever the caller supplies.
Bindings resolve(const PetriModel& m, const Bindings& params) {
  Bindings b = m.params;
  for (const auto& [k, v] : params.values()) b.set(k, v);
  return b;
}

double max_abs(const std::vector<double>& v) {
  double out = 0.0;
  for (double x : v) out = std::max(out, std::abs(x));
  return out;
}

}  // namespace

DfeResult compute_dfe(const PetriModel& m, const Bindings& params_in, const std::vector<DfePin>& extra_pins,
                      const DfeOptions& opts) {
  const Bindings params = resolve(m, params_in);
  const std::size_t np = m.places.size();
  const auto initial = m.initial_marking();
  double total0 = 0.0;
  for (double v : initial) total0 += v;

  std::map<std::size_t, Expr> pins;
  for (const auto& p : m.dfe_pins) pins[p.place] = p.value;
  for (const auto& p : extra_pins) {
    if (p.place >= np) throw ModelError("dfe pin names an unknown place");
    if (m.places[p.place].infected) throw ModelError("dfe pin on infected place '" + m.places[p.place].name + "'");
    pins[p.place] = p.value;
  }

  DfeResult out;
  out.marking = initial;
  std::vector<std::size_t> unknowns;
  for (std::size_t i = 0; i < np; ++i) {
    if (m.places[i].infected) {
      out.marking[i] = 0.0;
    } else if (auto it = pins.find(i); it != pins.end()) {
      double v = eval(it->second, params);
      if (!(v >= 0.0)) throw NumericError("dfe value for '" + m.places[i].name + "' is negative");
      out.marking[i] = v;
    } else {
      unknowns.push_back(i);
    }
  }

  const Aggregates agg = m.population();
  std::vector<Expr> flows;
  for (std::size_t p : unknowns) flows.push_back(net_flow(m, p));

  auto flow_residual = [&](const std::vector<double>& x) {
    Bindings b = state_bindings(m, params, x);
    std::vector<double> r;
    for (const auto& f : flows) r.push_back(eval(f, b));
    return r;
  };
  // Sum of absolute transition contributions, the natural size of a flow.
  auto flow_scale = [&](const std::vector<double>& x) {
    Bindings b = state_bindings(m, params, x);
    double scale = 0.0;
    for (std::size_t p : unknowns) {
      double s = 0.0;
      for (std::size_t t = 0; t < m.transitions.size(); ++t)
        if (auto f = transition_flow(m, t, p)) s += std::abs(eval(*f, b));
      scale = std::max(scale, s);
    }
    return scale;
  };

  if (unknowns.empty()) {
    out.method = DfeMethod::Annotated;
    return out;
  }

  const std::size_t n = unknowns.size();
  std::vector<std::vector<Expr>> jac_all(n, std::vector<Expr>(n));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) jac_all[r][c] = diff(flows[r], m.places[unknowns[c]].name, agg);

  auto eval_jac = [&](const std::vector<std::size_t>& rows, bool conservation, const std::vector<double>& x) {
    Bindings b = state_bindings(m, params, x);
    Matrix J(rows.size() + (conservation ? 1 : 0), n);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < n; ++c) J(r, c) = eval(jac_all[rows[r]][c], b);
    if (conservation)
      for (std::size_t c = 0; c < n; ++c) J(rows.size(), c) = 1.0;
    return J;
  };

  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  bool conservation = false;
  {
    Matrix J0 = eval_jac(rows, false, out.marking);
    if (numerical_rank(J0, opts.rank_tol) < n) {
      rows = independent_rows(J0, opts.rank_tol);
      conservation = true;
      Matrix Ja = eval_jac(rows, true, out.marking);
      if (rows.size() + 1 < n || numerical_rank(Ja, opts.rank_tol) < n) {
        std::string names;
        for (std::size_t p : unknowns) names += (names.empty() ? "" : ", ") + m.places[p].name;
        throw NumericError("disease-free equilibrium is underdetermined for {" + names +
                           "} even with population conservation; pin values with dfe statements");
      }
    }
  }
  out.method = conservation ? DfeMethod::ConservationAugmented : DfeMethod::Newton;

  auto system_residual = [&](const std::vector<double>& x) {
    auto all = flow_residual(x);
    std::vector<double> r;
    for (std::size_t i : rows) r.push_back(all[i]);
    if (conservation) {
      double s = 0.0;
      for (double v : x) s += v;
      r.push_back(s - total0);
    }
    return r;
  };
  auto norm2 = [](const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s);
  };
  auto converged = [&](const std::vector<double>& x) {
    double tol = opts.tol * std::max(1.0, flow_scale(x));
    if (max_abs(flow_residual(x)) > tol) return false;
    if (conservation) {
      double s = 0.0;
      for (double v : x) s += v;
      if (std::abs(s - total0) > opts.tol * std::max(1.0, total0)) return false;
    }
    return true;
  };

  std::vector<double> x = out.marking;
  int it = 0;
  for (; it <= opts.max_iterations; ++it) {
    if (converged(x)) break;
    if (it == opts.max_iterations)
      throw NumericError("disease-free equilibrium did not converge after " + std::to_string(it) + " Newton iterations");
    auto r = system_residual(x);
    Matrix J = eval_jac(rows, conservation, x);
    LuDecomposition lu(J);
    if (lu.singular(1e-14)) throw NumericError("singular Jacobian while solving for the disease-free equilibrium");
    for (double& v : r) v = -v;
    auto dx = lu.solve(r);
    double base = norm2(r);
    double lambda = 1.0;
    std::vector<double> trial = x;
    for (; lambda > 1e-6; lambda *= 0.5) {
      for (std::size_t k = 0; k < n; ++k) trial[unknowns[k]] = x[unknowns[k]] + lambda * dx[k];
      double next = norm2(system_residual(trial));
      if (std::isfinite(next) && next < base) break;
    }
    x = trial;
  }
  out.iterations = it;

  const double xscale = std::max(1.0, max_abs(x));
  for (std::size_t p : unknowns) {
    if (x[p] >= 0.0) continue;
    if (x[p] < -1e-12 * xscale)
      throw NumericError("disease-free equilibrium has negative marking " + std::to_string(x[p]) + " for '" +
                         m.places[p].name + "'");
    x[p] = 0.0;  // round-off below the solve tolerance
  }
  out.marking = x;
  out.residual = max_abs(flow_residual(x));
  double scale = flow_scale(x);
  out.relative_residual = scale > 0.0 ? out.residual / scale : out.residual;
  return out;
}

std::vector<Expr> build_script_F(const PetriModel&, const FlowTable& flows) {
  std::vector<Expr> out;
  for (const auto& entries : flows.entries) {
    std::vector<Expr> terms;
    for (const auto& e : entries)
      if (e.tag == FlowTag::Infection) terms.push_back(e.flow);
    out.push_back(simplify(Expr::add(std::move(terms))));
  }
  return out;
}

std::vector<Expr> script_V_rows(const PetriModel&, const FlowTable& flows) {
  std::vector<Expr> out;
  for (const auto& entries : flows.entries) {
    std::vector<Expr> terms;
    for (const auto& e : entries)
      if (e.tag != FlowTag::Infection) terms.push_back(e.flow);
    out.push_back(simplify(Expr::neg(Expr::add(std::move(terms)))));
  }
  return out;
}

std::vector<std::vector<Expr>> build_script_V(const PetriModel& m, const FlowTable& flows) {
  const std::size_t T = flows.infected.size();
  std::map<std::size_t, std::size_t> column;  // place index -> infected position
  for (std::size_t k = 0; k < T; ++k) column[flows.infected[k]] = k;

  std::vector<std::vector<std::vector<Expr>>> cells(T, std::vector<std::vector<Expr>>(T));
  for (std::size_t k = 0; k < T; ++k) {
    for (const auto& e : flows.entries[k]) {
      if (e.tag == FlowTag::Infection) continue;
      std::size_t col = k;
      if (e.tag == FlowTag::TransferIn) {
        for (const auto& a : m.arcs) {
          if (a.transition != e.transition || a.direction != ArcDirection::PlaceToTransition) continue;
          if (auto it = column.find(a.place); it != column.end()) {
            col = it->second;
            break;
          }
        }
      }
      cells[k][col].push_back(Expr::neg(e.flow));
    }
  }
  std::vector<std::vector<Expr>> out(T, std::vector<Expr>(T));
  for (std::size_t r = 0; r < T; ++r)
    for (std::size_t c = 0; c < T; ++c) out[r][c] = simplify(Expr::add(std::move(cells[r][c])));
  return out;
}

Jacobians jacobians_at_dfe(const PetriModel& m, const std::vector<Expr>& script_F, const std::vector<Expr>& v_rows,
                           const Bindings& params_in, const DfeResult& dfe) {
  const Bindings params = resolve(m, params_in);
  const auto infected = m.infected_places();
  const std::size_t T = infected.size();
  const Aggregates agg = m.population();
  const Bindings at = state_bindings(m, params, dfe.marking);

  Jacobians out{Matrix(T, T), Matrix(T, T), 0.0};
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < T; ++j) {
      const std::string& wrt = m.places[infected[j]].name;
      out.F(i, j) = eval(diff(script_F[i], wrt, agg), at);
      out.V(i, j) = eval(diff(v_rows[i], wrt, agg), at);
    }

  // Central differences in each infected coordinate.
  for (std::size_t j = 0; j < T; ++j) {
    std::size_t p = infected[j];
    double h = 1e-6 * std::max(1.0, std::abs(dfe.marking[p]));
    auto plus = dfe.marking, minus = dfe.marking;
    plus[p] += h;
    minus[p] -= h;
    Bindings bp = state_bindings(m, params, plus), bm = state_bindings(m, params, minus);
    for (std::size_t i = 0; i < T; ++i) {
      double fd_f = (eval(script_F[i], bp) - eval(script_F[i], bm)) / (2 * h);
      double fd_v = (eval(v_rows[i], bp) - eval(v_rows[i], bm)) / (2 * h);
      out.fd_discrepancy = std::max(out.fd_discrepancy, std::abs(fd_f - out.F(i, j)) / std::max(1.0, std::abs(out.F(i, j))));
      out.fd_discrepancy = std::max(out.fd_discrepancy, std::abs(fd_v - out.V(i, j)) / std::max(1.0, std::abs(out.V(i, j))));
    }
  }
  return out;
}

SpectralResult spectral_radius(const Matrix& K) {
  if (!K.square()) throw NumericError("spectral radius of a non-square matrix");
  if (!K.finite()) throw NumericError("next-generation matrix has NaN or infinite entries");
  SpectralResult out;
  if (K.rows() == 0) return out;
  EigenResult e = eigenvalues(K);
  out.converged = e.converged;
  out.iterations = e.iterations;
  out.eigenvalues = e.values;
  if (e.values.empty()) return out;

  for (const auto& v : e.values) out.r0 = std::max(out.r0, std::abs(v));
  const double tie_tol = 1e-12 * std::max(1.0, out.r0);
  bool have = false;
  int at_max = 0;
  for (const auto& v : e.values) {
    if (std::abs(v) < out.r0 - tie_tol) continue;
    ++at_max;
    // Prefer the most nearly real, then the most positive, candidate.
    if (!have || std::abs(v.imag()) < std::abs(out.dominant.imag()) ||
        (std::abs(v.imag()) == std::abs(out.dominant.imag()) && v.real() > out.dominant.real())) {
      out.dominant = v;
      have = true;
    }
  }
  out.tie = at_max > 1;
  out.imag_residue = std::abs(out.dominant.imag());
  return out;
}

Finding check_a5(const Matrix& V) {
  EigenResult e = eigenvalues(-V);
  if (!e.converged) return {"A5", FindingStatus::Violated, "eigenvalues of -V did not converge"};
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& v : e.values) worst = std::max(worst, v.real());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", worst);
  if (worst < 0.0) return {"A5", FindingStatus::Satisfied, std::string("eigenvalues of -V have negative real parts (max ") + buf + ")"};
  return {"A5", FindingStatus::Violated, std::string("an eigenvalue of -V has real part ") + buf + " >= 0"};
}

NgmResult ngm_r0(const PetriModel& m, const Bindings& params_in, const NgmOptions& opts) {
  const auto infected = m.infected_places();
  if (infected.empty()) throw ModelError("model has no infected places");
  const Bindings params = resolve(m, params_in);

  NgmResult out;
  for (std::size_t p : infected) out.infected.push_back(m.places[p].name);
  out.dfe = compute_dfe(m, params, opts.pins, opts.dfe);

  FlowTable table = classify_transitions(m);
  out.script_F = build_script_F(m, table);
  out.script_V = build_script_V(m, table);
  auto rows = script_V_rows(m, table);
  Jacobians jac = jacobians_at_dfe(m, out.script_F, rows, params, out.dfe);
  out.F = jac.F;
  out.V = jac.V;
  out.fd_discrepancy = jac.fd_discrepancy;

  InverseResult inv = invert(out.V, opts.max_condition);
  out.Vinv = inv.inverse;
  out.condition = inv.condition;
  out.K = out.F * out.Vinv;
  out.spectral = spectral_radius(out.K);
  if (!out.spectral.converged)
    throw NumericError("eigenvalue iteration did not converge (" + std::to_string(out.spectral.eigenvalues.size()) +
                       " of " + std::to_string(out.K.rows()) + " eigenvalues found)");
  out.r0 = out.spectral.r0;

  out.findings = validate_assumptions(m);
  out.findings.push_back(check_a5(out.V));
  return out;
}

std::vector<Finding> check_assumptions(const PetriModel& m, const Bindings& params, const NgmOptions& opts) {
  auto out = validate_assumptions(m);
  for (const auto& f : out)
    if (f.status == FindingStatus::Fatal) return out;
  try {
    const Bindings full = resolve(m, params);
    DfeResult dfe = compute_dfe(m, full, opts.pins, opts.dfe);
    FlowTable table = classify_transitions(m);
    Jacobians jac = jacobians_at_dfe(m, build_script_F(m, table), script_V_rows(m, table), full, dfe);
    out.push_back(check_a5(jac.V));
  } catch (const Error& e) {
    out.push_back({"A5", FindingStatus::Fatal, std::string("cannot evaluate at the disease-free equilibrium: ") + e.what()});
  }
  return out;
}

std::string to_string(DfeMethod m) {
  switch (m) {
    case DfeMethod::Annotated:
      return "annotated";
    case DfeMethod::Newton:
      return "newton";
    case DfeMethod::ConservationAugmented:
      return "conservation-augmented";
  }
  return "?";
}

double round12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

nlohmann::json to_json(const Matrix& a) {
  auto out = nlohmann::json::array();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (std::size_t c = 0; c < a.cols(); ++c) row.push_back(round12(a(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

nlohmann::json to_json(const Finding& f) {
  return {{"code", f.code}, {"status", to_string(f.status)}, {"message", f.message}};
}

nlohmann::json to_json(const NgmResult& r, const PetriModel& m) {
  using nlohmann::json;
  json dfe = {{"places", m.place_names()},
              {"method", to_string(r.dfe.method)},
              {"residual", round12(r.dfe.residual)},
              {"iterations", r.dfe.iterations}};
  dfe["marking"] = json::array();
  for (double v : r.dfe.marking) dfe["marking"].push_back(round12(v));

  json script_F = json::array();
  for (const auto& e : r.script_F) script_F.push_back(e.str());
  json script_V = json::array();
  for (const auto& row : r.script_V) {
    json jr = json::array();
    for (const auto& e : row) jr.push_back(e.str());
    script_V.push_back(std::move(jr));
  }

  json eig = json::array();
  for (const auto& v : r.spectral.eigenvalues) eig.push_back({round12(v.real()), round12(v.imag())});
  json diagnostics = {{"dominant", {round12(r.spectral.dominant.real()), round12(r.spectral.dominant.imag())}},
                      {"imag_residue", round12(r.spectral.imag_residue)},
                      {"tie", r.spectral.tie},
                      {"converged", r.spectral.converged},
                      {"iterations", r.spectral.iterations},
                      {"eigenvalues", std::move(eig)},
                      {"condition_V", round12(r.condition)},
                      {"fd_discrepancy", round12(r.fd_discrepancy)}};

  json findings = json::array();
  for (const auto& f : r.findings) findings.push_back(to_json(f));

  return {{"model", m.name},
          {"kind", to_string(m.kind)},
          {"infected", r.infected},
          {"dfe", std::move(dfe)},
          {"script_F", std::move(script_F)},
          {"script_V", std::move(script_V)},
          {"F", to_json(r.F)},
          {"V", to_json(r.V)},
          {"Vinv", to_json(r.Vinv)},
          {"K", to_json(r.K)},
          {"r0", round12(r.r0)},
          {"diagnostics", std::move(diagnostics)},
          {"findings", std::move(findings)}};
}

}  // namespace ngmpn
