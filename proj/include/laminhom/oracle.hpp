#pragma once

// Brute-force reference for the cell module: Newton on the nodal values of
// the periodic displacement with a dense Hessian. Meant for small n only.

#include "laminhom/cell.hpp"
#include "laminhom/energy.hpp"
#include "laminhom/fields.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace laminhom::oracle {

/// E(phi) = (1/L) sum_i h W(omega_i, F + ((phi_{i+1} - phi_i)/h) (x) e_d)
/// over periodic nodal values phi_i in R^d. phi_0 is pinned to zero, the
/// unknowns are phi_1..phi_{n-1}.
class DiscreteEnergyProblem {
public:
    DiscreteEnergyProblem(EnergyDensity w, MaterialSample sample, Mat f);

    int dim() const { return w_.dim(); }
    std::size_t cells() const { return sample_.size(); }
    double spacing() const { return sample_.spacing(); }
    const Mat& F() const { return f_; }
    const EnergyDensity& density() const { return w_; }
    double omega(std::size_t i) const { return sample_.values[i]; }

    std::vector<Vec> cell_gradients(const Eigen::VectorXd& unknowns) const;
    /// Energy per unit length, E / L, so that it compares directly with W_hom,L.
    double energy(const Eigen::VectorXd& unknowns) const;
    /// Gradient of energy() in the unknowns.
    Eigen::VectorXd gradient(const Eigen::VectorXd& unknowns) const;
    /// Gradient of the unnormalized E: the jumps t_{j-1} - t_j of the traction.
    Eigen::VectorXd flux_jumps(const Eigen::VectorXd& unknowns) const;

    /// Hessian of the energy at the configuration with cell gradients p.
    Eigen::MatrixXd hessian(const std::vector<Vec>& p) const;

private:
    EnergyDensity w_;
    MaterialSample sample_;
    Mat f_;
};

struct DirectMinimum {
    std::vector<Vec> nodal;  ///< phi_0..phi_{n-1}, shifted to mean zero
    std::vector<Vec> p;      ///< cell gradients
    double energy = 0.0;        ///< E* / L
    double gradient_inf = 0.0;  ///< sup norm of the gradient of E at the minimizer
    int iterations = 0;
};

/// Damped Newton on E until |grad E|_inf <= 1e-10 (1 + |E*/L|). ConvergenceError
/// when the budget runs out or the line search stalls before that.
DirectMinimum minimize_direct(const DiscreteEnergyProblem& prob, const SolverOptions& opts = {});

/// Cell gradients of the discrete linearized corrector in direction G around
/// the configuration with cell gradients base_p, from the assembled periodic
/// block-tridiagonal system. SingularityError if that system is not positive
/// definite.
std::vector<Vec> linear_solve_direct(const DiscreteEnergyProblem& prob, const std::vector<Vec>& base_p,
                                     const Mat& g);

struct CrossCheckReport {
    int instances = 0;
    double max_energy_diff = 0.0;      ///< |W_hom,L(solver) - E*/L|
    double max_p_diff = 0.0;           ///< sup norm over cells
    double max_linearized_diff = 0.0;  ///< sup norm of q(solver) - q(direct)
    double max_stationarity = 0.0;     ///< oracle gradient at its minimizer
};

/// Solver against oracle on `count` random small instances: d in {2, 3},
/// n <= 64, dist(F, SO(d)) <= 0.1, SVK and (d = 2) Neo-Hookean.
CrossCheckReport cross_check(int count, std::uint64_t seed, const SolverOptions& opts = {});

}  // namespace laminhom::oracle
