#pragma once

#include "laminhom/linalg.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace laminhom {

enum class Family { SaintVenantKirchhoff, CompressibleNeoHookean };

std::string_view to_string(Family f);
Family parse_family(std::string_view name);

/// Dense k-th derivative of W(omega, .) at F, a k-linear form over d x d
/// matrices stored with row-major multi-index (i1 j1 i2 j2 ... ik jk).
struct DerivativeTensor {
    int order = 0;
    int dim = 0;
    std::vector<double> data;

    /// Evaluates the multilinear form on `args.size() == order` matrices.
    double apply(std::span<const Mat> args) const;
};

/**
 * Frame-indifferent stored energy W(omega, F) = m(omega) W0(F) with
 * m(omega) = 1 + a tanh(omega), a in [0,1).
 *
 * W0 is either Saint Venant-Kirchhoff, (lambda/2) tr(E)^2 + mu tr(E^2) with
 * E = (F^T F - I)/2, or compressible Neo-Hookean,
 * (mu/2)(|F|^2 - d) - mu ln J + (lambda/2)(ln J)^2.
 *
 * The class constants alpha and p are declared per family, not derived:
 * alpha = min(1/2, (1-a) mu / 2) for both families; p = 4 for SVK (quartic
 * growth) and p = 2 for Neo-Hookean, which restricts Neo-Hookean to d = 2.
 *
 * Derivatives are exact. The matrix-valued "apply" forms are unchecked hot
 * paths for the solvers; derivative() additionally rejects F outside the
 * certified neighborhood dist(F, SO(d)) < domain_radius().
 */
class EnergyDensity {
public:
    EnergyDensity(Family family, double lambda0, double mu0, double modulation, int dim,
                  double domain_radius = 0.5);

    Family family() const { return family_; }
    int dim() const { return dim_; }
    double lambda0() const { return lambda0_; }
    double mu0() const { return mu0_; }
    double modulation() const { return modulation_; }
    double alpha() const { return alpha_; }
    double growth_p() const { return growth_p_; }
    double domain_radius() const { return domain_radius_; }

    double multiplier(double omega) const;
    double multiplier_derivative(double omega) const;

    /// W(omega, F). Throws DomainError for Neo-Hookean when det F <= 0.
    double evaluate(double omega, const Mat& f) const;

    /// First Piola-Kirchhoff stress DW(omega, F).
    Mat stress(double omega, const Mat& f) const;

    /// The matrix X with X : H = D^2W(omega, F)[G, H].
    Mat tangent_apply(double omega, const Mat& f, const Mat& g) const;

    /// D^2W(omega, F) flattened to (d*d) x (d*d), symmetric.
    Mat9 tangent(double omega, const Mat& f) const;

    /// The matrix X with X : K = D^3W(omega, F)[G, H, K].
    Mat third_apply(double omega, const Mat& f, const Mat& g, const Mat& h) const;

    /// k-th Frechet derivative for k in {1,2,3}; DomainError outside U_r.
    DerivativeTensor derivative(double omega, const Mat& f, int order) const;

    /// d/d omega of W(omega, F) = m'(omega)/m(omega) W(omega, F).
    double omega_derivative(double omega, const Mat& f) const;

private:
    double base_energy(const Mat& f) const;
    Mat base_stress(const Mat& f) const;
    Mat base_tangent_apply(const Mat& f, const Mat& g) const;
    Mat base_third_apply(const Mat& f, const Mat& g, const Mat& h) const;
    void require_positive_det(const Mat& f) const;

    Family family_;
    double lambda0_;
    double mu0_;
    double modulation_;
    int dim_;
    double domain_radius_;
    double alpha_;
    double growth_p_;
};

}  // namespace laminhom
