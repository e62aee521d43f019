#pragma once

#include <string>
#include <vector>

#include "paracalc/correctors.hpp"
#include "paracalc/reference_data.hpp"

namespace paracalc {

/// One-parameter closure families with exact derivatives up to order 3.
struct ClosureSpec {
    std::string family = "constant";  // constant | affine | sine | tanh
    double a = 1.0, b = 0.0, w = 1.0, phase = 0.0;

    ScalarMap map() const;
};

/// u0 = mean + amplitude cos(2 pi mode x).
struct InitialDataSpec {
    double mean = 0.3;
    double amplitude = 0.1;
    int mode = 1;

    Field field(const SpaceGrid& g) const;
};

struct SolverOptions {
    double tol = 1e-9;
    int max_iter = 40;
};

struct ReferenceOptions {
    int substeps = 8;         // reference steps per coarse step
    double tolerance = 1e-6;  // step-halving agreement required (x 10)
};

/// Quasilinear equation d_t u - d(u) Laplacian u = f(u) zeta on the torus.
struct ProblemSpec {
    int dim = 1;
    int n = 64;
    double T = 0.05;
    int steps = 40;
    double alpha = 0.45;
    int order = 3;
    int chain_cap = 0;
    NoiseSpec noise;
    ClosureSpec d{"sine", 1.0, 0.2, 1.0, 0.0};
    ClosureSpec f{"sine", 0.5, 1.0, 1.0, 0.0};
    InitialDataSpec u0;
    bool quasilinear = true;  // false: drop every eps-branch (semilinear gPAM form)
    double closeness_threshold = 0.5;
    SolverOptions solver;
    ReferenceOptions reference;

    SpaceGrid grid() const { return SpaceGrid::make(dim, n); }
    double dt() const { return T / steps; }
};

void validate(const ProblemSpec& spec);
ProblemSpec problem_from_json(const std::string& text);
std::string problem_to_json(const ProblemSpec& spec);

/// L = d(ubar0)(-Laplacian) and eps(u) = d(u)/d(ubar0) - 1 with derivatives.
struct Reformulation {
    double ubar0 = 0.0;
    double c0 = 1.0;
    OperatorL op;
    ScalarMap d;
    ScalarMap f;
    ScalarMap eps;
    bool quasilinear = true;
    double closeness = 0.0;  // ||u0 - ubar0||_{C^{4 alpha}}
};

Reformulation reformulate(const ProblemSpec& spec);

/// Coefficient functions c F^{(m)}(u) prod u_b (or E^{(m)} for eps) as a symbolic sum.
struct Monomial {
    double c = 1.0;
    char g = 'F';  // 'F' f-derivative, 'E' eps-derivative, '1' none
    int m = 0;
    std::vector<int> factors;  // word indices, sorted
};

using Coefficient = std::vector<Monomial>;

/// h_a per word: h_tau from the letter kind, h_{a sigma} = D_sigma h_a.
std::vector<Coefficient> coefficient_table(const SystemLayout& L);
std::string coefficient_label(const SystemLayout& L, const Coefficient& c);

struct CanonicalTerm {
    std::string label;
    std::string data;           // reference datum the paraproduct acts on
    int letter = -1;            // letter L^{-1} of the datum matches, -1 if unmatched
    double nominal = 0.0;       // regularity of the datum
    SpaceTimeField value;       // P_coefficient datum
};

struct CanonicalPiece {
    std::string label;
    SpaceTimeField value;
};

struct CanonicalRhs {
    std::vector<CanonicalTerm> terms;
    std::vector<CanonicalPiece> pieces;  // the remainder, piece by piece
    SpaceTimeField total() const;
    SpaceTimeField remainder() const;
};

struct SystemState {
    std::vector<SpaceTimeField> coefficients;  // u_a per word, u = coefficients[0]
    std::vector<SpaceTimeField> remainders;    // u_a^sharp per word
};

SystemState evaluate_state(const SystemLayout& L, const ParacontrolledSystem& s, const ReferenceData& refs);

CanonicalRhs rhs_canonical(const SystemState& st, const ReferenceData& refs, const Reformulation& rf);
/// f(u) zeta + eps(u) Lp u evaluated directly.
SpaceTimeField rhs_direct(const SpaceTimeField& u, const ReferenceData& refs, const Reformulation& rf);

struct TruncationEvent {
    std::string term;
    double magnitude = 0.0;  // sup norm of the routed term
};

struct PhiResult {
    ParacontrolledSystem system;
    std::vector<TruncationEvent> truncations;
    SpaceTimeField psi;  // L^{-1}(RHS) with initial value u0
};

PhiResult phi_map(const ParacontrolledSystem& s, const ReferenceData& refs, const Reformulation& rf, const Field& u0,
                  const std::vector<Coefficient>& table);

/// Remainders from initial data: u_0^sharp = e^{-tL} u0, u_a^sharp = h_a(u0) constant in time.
ParacontrolledSystem flat_start(const SystemLayout& L, const Reformulation& rf, const Field& u0, int steps, double dt,
                                const std::vector<Coefficient>& table);

struct SolveDiagnostics {
    std::vector<double> gaps;    // |||Phi(u_k) - u_k|||
    std::vector<double> ratios;  // gaps[k] / gaps[k-1]
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;       // sup of (d_t + L) u - RHS(u) over interior slices
    double mild_residual = 0.0;  // sup of u - L^{-1}(RHS(u)) with initial value u0
    double truncation_tail = 0.0;
    std::vector<TruncationEvent> truncations;
    double eps_sup = 0.0;        // max |eps(u)| over [0, T]
};

struct SolveResult {
    SpaceTimeField u;
    ParacontrolledSystem system;
    SolveDiagnostics diagnostics;
};

SolveResult solve_fixed_point(const ProblemSpec& spec, const ReferenceData& refs);
SolveResult solve_fixed_point(const ProblemSpec& spec);
ReferenceData problem_references(const ProblemSpec& spec);

/// Exponential time differencing (second order) on the constant part c0 (-Laplacian), substeps
/// steps per coarse step; returns the coarse slices.
SpaceTimeField etdrk2(const ProblemSpec& spec, const Reformulation& rf, int substeps);

struct ReferenceRun {
    SpaceTimeField u;
    double halving_error = 0.0;  // error estimate of u: |u_{h/2} - u_{h/4}| / 3, sup over slices
    double disagreement = 0.0;   // |u_{h/2} - u_{h/4}|
    double order = 0.0;          // fitted over h, h/2, h/4
};

ReferenceRun reference_solver(const ProblemSpec& spec);

struct CompareReport {
    std::vector<double> sup;  // per slice
    std::vector<double> l2;
    double max_sup = 0.0;
    double max_l2 = 0.0;
};

CompareReport compare(const SpaceTimeField& a, const SpaceTimeField& b);
std::string compare_json(const CompareReport& r);

struct RunOutput {
    ReferenceData refs;
    SolveResult solve;
    ReferenceRun reference;
    CompareReport comparison;
    double solver_order = 0.0;           // fitted over M, 2M, 4M time steps
    double discretization_budget = 0.0;  // Richardson error (order <= 2) of the solve + reference error
    double tolerance_band = 0.0;         // 10 tol + budget
};

/// Solve, reference solve at the same spec, the M / 2M / 4M budget, and the comparison.
RunOutput run_problem(const ProblemSpec& spec);
bool within_band(const RunOutput& out);
std::string run_manifest_json(const ProblemSpec& spec, const RunOutput& out);
/// manifest.json, solution.pcf, reference.pcf, metadata.json (timestamp only) under dir.
void write_run(const std::string& dir, const ProblemSpec& spec, const RunOutput& out);

}  // namespace paracalc
