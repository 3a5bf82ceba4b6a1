#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "ngmpn/expr.hpp"
#include "ngmpn/linalg.hpp"
#include "ngmpn/petri.hpp"

namespace ngmpn {

enum class DfeMethod { Annotated, Newton, ConservationAugmented };

struct DfeResult {
  std::vector<double> marking;  // aligned with the model's places
  DfeMethod method = DfeMethod::Newton;
  double residual = 0.0;           // max |net flow| over non-infected places
  double relative_residual = 0.0;  // residual / flow scale
  int iterations = 0;
};

struct DfeOptions {
  double tol = 1e-10;
  int max_iterations = 100;
  double rank_tol = 1e-10;
};

/// Disease-free equilibrium. Infected places are zeroed, pinned places take
/// their pinned values (model pins, then `extra_pins`, later ones winning),
/// and the remaining places solve net_flow = 0 by damped Newton. A
/// rank-deficient flow Jacobian is closed with the conservation constraint
/// sum(marking) = sum(initial marking).
DfeResult compute_dfe(const PetriModel& m, const Bindings& params, const std::vector<DfePin>& extra_pins = {},
                      const DfeOptions& opts = {});

/// Per infected place, the net inflow through infection transitions.
std::vector<Expr> build_script_F(const PetriModel& m, const FlowTable& flows);

/// The transition matrix in display form: row i, column j holds the part of
/// place i's non-infection flow attributed to infected input j, with the
/// sign flipped so outflows are positive. Row sums equal script_V_rows.
std::vector<std::vector<Expr>> build_script_V(const PetriModel& m, const FlowTable& flows);

/// Row sums of the transition matrix: minus the net non-infection flow.
std::vector<Expr> script_V_rows(const PetriModel& m, const FlowTable& flows);

struct Jacobians {
  Matrix F;
  Matrix V;
  double fd_discrepancy = 0.0;  // max relative gap to central differences
};

Jacobians jacobians_at_dfe(const PetriModel& m, const std::vector<Expr>& script_F, const std::vector<Expr>& v_rows,
                           const Bindings& params, const DfeResult& dfe);

struct SpectralResult {
  double r0 = 0.0;
  std::complex<double> dominant;
  double imag_residue = 0.0;
  bool tie = false;  // another eigenvalue shares the maximal modulus
  bool converged = true;
  int iterations = 0;
  std::vector<std::complex<double>> eigenvalues;
};

/// Largest eigenvalue modulus of K. Throws NumericError on NaN/Inf entries;
/// non-convergence is reported through `converged` with partial eigenvalues.
SpectralResult spectral_radius(const Matrix& K);

struct NgmResult {
  std::vector<std::string> infected;  // infected place names, row/column order
  DfeResult dfe;
  std::vector<Expr> script_F;
  std::vector<std::vector<Expr>> script_V;
  Matrix F, V, Vinv, K;
  double condition = 0.0;  // of V, 1-norm
  double r0 = 0.0;
  SpectralResult spectral;
  double fd_discrepancy = 0.0;
  std::vector<Finding> findings;
};

struct NgmOptions {
  std::vector<DfePin> pins;
  DfeOptions dfe;
  double max_condition = 1e14;
};

/// The full pipeline: DFE, classification, symbolic matrices, Jacobians,
/// inversion of V and the spectral radius of F V^-1.
NgmResult ngm_r0(const PetriModel& m, const Bindings& params, const NgmOptions& opts = {});

/// A5 at the DFE: every eigenvalue of -V has negative real part.
Finding check_a5(const Matrix& V);

/// Structural findings plus A5 evaluated at `params`.
std::vector<Finding> check_assumptions(const PetriModel& m, const Bindings& params, const NgmOptions& opts = {});

std::string to_string(DfeMethod m);

/// Rounds to 12 significant digits, the precision used for all output.
double round12(double v);

nlohmann::json to_json(const Matrix& a);
nlohmann::json to_json(const Finding& f);
nlohmann::json to_json(const NgmResult& r, const PetriModel& m);

}  // namespace ngmpn
