#pragma once

// Test-side reference implementations. They share nothing with the library
// beyond reading a model's parameters and initial marking.

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

using State = std::vector<double>;
using Params = std::map<std::string, double>;
using Rhs = std::function<State(const State&, const Params&)>;

/// Right-hand sides of the source ODEs, coded by hand per model id. Place
/// order matches the model files.
inline Rhs ode_rhs(const std::string& id) {
  if (id == "sirs")
    return [](const State& x, const Params& p) {
      double S = x[0], I = x[1], R = x[2], N = S + I + R;
      double inf = p.at("beta") * S * I / N;
      return State{-inf + p.at("delta") * R, inf - p.at("gamma") * I, p.at("gamma") * I - p.at("delta") * R};
    };
  if (id == "seir")
    return [](const State& x, const Params& p) {
      double S = x[0], E = x[1], I = x[2], R = x[3], mu = p.at("mu");
      double inf = p.at("beta") * S * I;
      return State{p.at("Pi") - inf - mu * S, inf - (p.at("eta") + mu) * E, p.at("eta") * E - (p.at("alpha") + mu) * I,
                   p.at("alpha") * I - mu * R};
    };
  if (id == "seeir")
    return [](const State& x, const Params& p) {
      double S = x[0], E1 = x[1], E2 = x[2], I = x[3], R = x[4], N = S + E1 + E2 + I + R, mu = p.at("mu");
      double inf = p.at("beta") * S * I / N, q = p.at("p");
      return State{mu * N - inf - mu * S, q * inf - (p.at("nu1") + mu) * E1, (1 - q) * inf - (p.at("nu2") + mu) * E2,
                   p.at("nu1") * E1 + p.at("nu2") * E2 - (p.at("gamma") + mu) * I, p.at("gamma") * I - mu * R};
    };
  if (id == "covid")
    return [](const State& x, const Params& p) {
      double S = x[0], E = x[1], Ia = x[2], Is = x[3], Ih = x[4], R = x[5], N = S + E + Ia + Is + Ih + R;
      double lam = (p.at("beta_a") * Ia + p.at("beta_s") * Is + p.at("beta_h") * Ih) / N;
      double sg = p.at("sigma"), r = p.at("r");
      return State{-lam * S,
                   lam * S - sg * E,
                   r * sg * E - p.at("gamma_a") * Ia,
                   (1 - r) * sg * E - (p.at("gamma_s") + p.at("phi_s") + p.at("delta_s")) * Is,
                   p.at("phi_s") * Is - (p.at("gamma_h") + p.at("delta_h")) * Ih,
                   p.at("gamma_a") * Ia + p.at("gamma_s") * Is + p.at("gamma_h") * Ih};
    };
  if (id == "nonlinear")
    return [](const State& x, const Params& p) {
      double S = x[0], E = x[1], I = x[2], R = x[3], mu = p.at("mu");
      double inf = p.at("beta") * S * I / (1 + p.at("alpha") * I * I);
      return State{mu - inf - mu * S, inf - (p.at("sigma") + mu) * E, p.at("sigma") * E - (p.at("gamma") + mu) * I,
                   p.at("gamma") * I - mu * R};
    };
  if (id == "patch2")
    return [](const State& x, const Params& p) {
      // x = S1 S2 E1 E2 I1 I2 R1 R2
      auto g = [&](const std::string& k) { return p.at(k); };
      double S[3] = {0, x[0], x[1]}, E[3] = {0, x[2], x[3]}, I[3] = {0, x[4], x[5]}, R[3] = {0, x[6], x[7]};
      auto idx = [](const char* c, int i, int j) { return std::string(c) + std::to_string(i) + std::to_string(j); };
      double inc[3] = {0, 0, 0};
      for (int j = 1; j <= 2; ++j) {
        double den = 0, force = 0;
        for (int k = 1; k <= 2; ++k) {
          den += g(idx("m", k, j)) * S[k] + g(idx("n", k, j)) * E[k] + g(idx("p", k, j)) * I[k] + g(idx("q", k, j)) * R[k];
          force += g(idx("p", k, j)) * I[k];
        }
        for (int i = 1; i <= 2; ++i) inc[i] += g("beta" + std::to_string(j)) * g(idx("m", i, j)) * S[i] * force / den;
      }
      State d(8);
      for (int i = 1; i <= 2; ++i) {
        std::string s = std::to_string(i);
        double mu = g("mu" + s);
        d[i - 1] = g("Pi" + s) - inc[i] - mu * S[i] + g("eta" + s) * R[i];
        d[i + 1] = inc[i] - (g("nu" + s) + mu) * E[i];
        d[i + 3] = g("nu" + s) * E[i] - (g("gamma" + s) + g("delta" + s) + mu) * I[i];
        d[i + 5] = g("gamma" + s) * I[i] - (g("eta" + s) + mu) * R[i];
      }
      return d;
    };
  if (id == "vector_borne")
    return [](const State& x, const Params& p) {
      double Sh = x[0], Ih = x[1], Rh = x[2], Sv = x[3], Iv = x[4];
      double ih = p.at("beta_hv") * Sh * Iv, iv = p.at("beta_vh") * Sv * Ih;
      return State{p.at("Pi") - ih - p.at("mu_h") * Sh,
                   ih + p.at("delta") * Ih - (p.at("alpha") + p.at("sigma") + p.at("mu_h")) * Ih,
                   p.at("sigma") * Ih - p.at("mu_h") * Rh,
                   p.at("Lambda") - iv - p.at("mu_v") * Sv,
                   iv - p.at("mu_v") * Iv};
    };
  throw std::invalid_argument("no ODE oracle for " + id);
}

/// Forward Euler, `steps` steps of size dt; returns every state.
inline std::vector<State> euler(const Rhs& f, State x, const Params& p, double dt, int steps) {
  std::vector<State> out{x};
  for (int k = 0; k < steps; ++k) {
    State d = f(x, p);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * d[i];
    out.push_back(x);
  }
  return out;
}

/// R0 from final-size data by bisection on
///   g(r) = ln(s0 / s_inf) - r (s0 - s_inf + i0)  (fractions of n),
/// which is monotone in r.
inline double final_size_r0(double s0, double s_inf, double i0 = 0.0) {
  double target = std::log(s0 / s_inf), ar = s0 - s_inf + i0;
  double lo = 0.0, hi = 1.0;
  while (hi * ar < target) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (mid * ar < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Final susceptible fraction for SIR with R0 and s0 = 1 - i0, by bisection
/// on s = s0 exp(-r0 (1 - s)).
inline double final_size_s(double r0, double s0 = 1.0) {
  double lo = 1e-300, hi = std::min(s0, 1.0 / r0);
  for (int i = 0; i < 400; ++i) {
    double mid = 0.5 * (lo + hi);
    double g = std::log(mid) - std::log(s0) + r0 * (1 - mid);
    (g < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
