#pragma once

#include "laminhom/energy.hpp"
#include "laminhom/fields.hpp"
#include "laminhom/linalg.hpp"

#include <cstdint>
#include <vector>

namespace laminhom {

/// Layers of a laminate: the value of omega on each layer and its volume
/// fraction. A MaterialSample on n grid cells is n layers of fraction 1/n.
struct Laminate {
    std::vector<double> omega;
    std::vector<double> fraction;

    static Laminate from_sample(const MaterialSample& s);
    static Laminate uniform(std::vector<double> omega);
    std::size_t size() const { return omega.size(); }
};

struct SolverOptions {
    double tol_inner = 1e-12;  ///< per-layer flux residual, relative to 1 + |sigma|
    double tol_outer = 1e-10;  ///< |mean of p|
    int max_outer = 50;
    int max_inner = 50;
    int max_halvings = 40;
    double delta_bar = 0.2;       ///< accepted inputs: dist(F, SO(d)) < delta_bar
    double neighborhood = 0.5;    ///< iterates keep dist(F + p (x) e_d, SO(d)) below this
    double lipschitz_c = 10.0;    ///< flag when max|p| > c dist(F, SO(d)) or max|q_G| > c |G|
    double condition_limit = 1e12;
};

struct NewtonStats {
    int outer_iterations = 0;
    int max_inner_iterations = 0;
    long total_inner_iterations = 0;
    double outer_residual = 0.0;    ///< |sum_i f_i p_i|
    double max_flux_residual = 0.0; ///< max_i |DW(omega_i, F + p_i (x) e_d) e_d - sigma|
};

/// Periodic corrector of a laminate: grad phi = p (x) e_d with one p_i per
/// layer and constant flux sigma = DW(omega_i, F + p_i (x) e_d) e_d.
struct CorrectorSolution {
    Mat F;
    std::vector<Vec> p;
    Vec sigma;
    /// Inverses of the acoustic matrices (M_i)_jk = D^2W[e_j (x) e_d, e_k (x) e_d]
    /// at the converged state.
    std::vector<Mat> acoustic_inverse;
    double max_acoustic_condition = 0.0;
    double min_acoustic_eigenvalue = 0.0;
    NewtonStats stats;
    bool lipschitz_exceeded = false;

    int dim() const { return static_cast<int>(F.rows()); }
    double max_abs_p() const;
};

/// Derivative of the corrector in direction G: q_i per layer, flux tau.
struct LinearizedCorrector {
    Mat direction;
    std::vector<Vec> q;
    Vec tau;
    bool lipschitz_exceeded = false;
};

/// Second derivative of the corrector in directions (G, H).
struct SecondLinearizedCorrector {
    std::vector<Vec> r;
    Vec tau;
};

/// RVE energy, stress and tangent moduli (and optionally D^3) at F. Matrix
/// slots are flattened row-major, a = i*d + j.
struct HomogenizedQuantities {
    int dim = 0;
    int order = 0;
    Mat F;
    double W = 0.0;
    Mat DW;
    Mat9 D2W;
    std::vector<double> D3W;  ///< (d*d)^3 entries when order == 3

    double d2(const Mat& g, const Mat& h) const;
    double d3(const Mat& g, const Mat& h, const Mat& k) const;
};

/// Nested Newton for the flux-constancy form of the periodic cell problem.
/// Throws DomainError if dist(F, SO(d)) >= delta_bar or the line search
/// cannot stay admissible, ConvergenceError when an iteration budget runs out.
CorrectorSolution solve_corrector(const EnergyDensity& w, const Laminate& lam, const Mat& f,
                                  const SolverOptions& opts = {});
CorrectorSolution solve_corrector(const EnergyDensity& w, const MaterialSample& s, const Mat& f,
                                  const SolverOptions& opts = {});

/// Closed-form first integral of the linearized cell problem.
/// SingularityError when an acoustic matrix is indefinite or too ill-conditioned.
LinearizedCorrector solve_linearized(const EnergyDensity& w, const Laminate& lam,
                                     const CorrectorSolution& base, const Mat& g,
                                     const SolverOptions& opts = {});

SecondLinearizedCorrector solve_second_linearized(const EnergyDensity& w, const Laminate& lam,
                                                  const CorrectorSolution& base,
                                                  const LinearizedCorrector& qg,
                                                  const LinearizedCorrector& qh);

/// Averages over the layers; order selects how many derivatives are formed
/// (0: W only, 1: + DW, 2: + D^2W, 3: + D^3W).
HomogenizedQuantities assemble(const EnergyDensity& w, const Laminate& lam,
                               const CorrectorSolution& base, int order,
                               const SolverOptions& opts = {});

/// solve_corrector followed by assemble.
HomogenizedQuantities homogenize(const EnergyDensity& w, const Laminate& lam, const Mat& f,
                                 int order, const SolverOptions& opts = {});

/// D^3W_hom,L by differentiating the D^2W representation, which brings in the
/// second linearized correctors. Independent of the symmetric formula used
/// by assemble(); the two must agree.
std::vector<double> third_derivative_via_second_correctors(const EnergyDensity& w,
                                                           const Laminate& lam,
                                                           const CorrectorSolution& base,
                                                           const SolverOptions& opts = {});

/// |sum_i f_i det(F + p_i (x) e_d) - det F|; zero analytically for mean-zero p.
double det_identity_deviation(const Mat& f, const std::vector<Vec>& p,
                              const std::vector<double>& fraction);
double det_identity_deviation(const Mat& f, const CorrectorSolution& c, const Laminate& lam);

/// min over `count` random rank-one directions of D^2W[a (x) b, a (x) b] / |a (x) b|^2.
double rank_one_modulus(const HomogenizedQuantities& q, int count, std::uint64_t seed);

struct QuadraticExpansionRow {
    double h = 0.0;
    double energy = 0.0;     ///< W_hom,L(Id + h G)
    double quadratic = 0.0;  ///< h^2/2 D^2W_hom,L(Id)[G, G]
    double ratio = 0.0;      ///< |energy - quadratic| / h^2, 0 at h = 0
};

std::vector<QuadraticExpansionRow> quadratic_expansion_check(const EnergyDensity& w,
                                                             const Laminate& lam, const Mat& g,
                                                             const std::vector<double>& hs,
                                                             const SolverOptions& opts = {});

}  // namespace laminhom
