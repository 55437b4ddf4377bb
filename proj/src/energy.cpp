#include "laminhom/energy.hpp"

#include "laminhom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace laminhom {

std::string_view to_string(Family f) {
    switch (f) {
        case Family::SaintVenantKirchhoff: return "svk";
        case Family::CompressibleNeoHookean: return "neohookean";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    if (name == "svk" || name == "SaintVenantKirchhoff") return Family::SaintVenantKirchhoff;
    if (name == "neohookean" || name == "CompressibleNeoHookean")
        return Family::CompressibleNeoHookean;
    throw std::invalid_argument("unknown material family '" + std::string(name) + "'");
}

double DerivativeTensor::apply(std::span<const Mat> args) const {
    if (static_cast<int>(args.size()) != order)
        throw std::invalid_argument("DerivativeTensor::apply: wrong number of arguments");
    const int dd = dim * dim;
    // Contract one slot at a time, last slot first.
    std::vector<double> cur = data;
    for (int slot = order - 1; slot >= 0; --slot) {
        const Eigen::VectorXd v = flatten(args[static_cast<std::size_t>(slot)]);
        std::vector<double> next(cur.size() / static_cast<std::size_t>(dd), 0.0);
        for (std::size_t outer = 0; outer < next.size(); ++outer)
            for (int a = 0; a < dd; ++a) next[outer] += cur[outer * dd + a] * v(a);
        cur.swap(next);
    }
    return cur.front();
}

namespace {

Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

EnergyDensity::EnergyDensity(Family family, double lambda0, double mu0, double modulation,
                             int dim, double domain_radius)
    : family_(family),
      lambda0_(lambda0),
      mu0_(mu0),
      modulation_(modulation),
      dim_(dim),
      domain_radius_(domain_radius) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
    if (!(lambda0 > 0.0) || !(mu0 > 0.0))
        throw std::invalid_argument("Lame parameters must be positive");
    if (!(modulation >= 0.0 && modulation < 1.0))
        throw std::invalid_argument("modulation amplitude must lie in [0,1)");
    if (!(domain_radius > 0.0)) throw std::invalid_argument("domain radius must be positive");
    alpha_ = std::min(0.5, 0.5 * (1.0 - modulation) * mu0);
    growth_p_ = family == Family::SaintVenantKirchhoff ? 4.0 : 2.0;
    if (growth_p_ < dim)
        throw std::invalid_argument("declared growth exponent p=" + std::to_string(growth_p_) +
                                    " is below the dimension; family not admissible here");
}

double EnergyDensity::multiplier(double omega) const {
    return 1.0 + modulation_ * std::tanh(omega);
}

double EnergyDensity::multiplier_derivative(double omega) const {
    const double t = std::tanh(omega);
    return modulation_ * (1.0 - t * t);
}

void EnergyDensity::require_positive_det(const Mat& f) const {
    if (family_ == Family::CompressibleNeoHookean && !(f.determinant() > 0.0))
        throw DomainError("Neo-Hookean energy requires det F > 0");
}

double EnergyDensity::base_energy(const Mat& f) const {
    const Mat id = Mat::Identity(dim_, dim_);
    if (family_ == Family::SaintVenantKirchhoff) {
        const Mat e = 0.5 * (f.transpose() * f - id);
        const double tr = e.trace();
        return 0.5 * lambda0_ * tr * tr + mu0_ * ddot(e, e);
    }
    require_positive_det(f);
    const double lnj = std::log(f.determinant());
    return 0.5 * mu0_ * (ddot(f, f) - dim_) - mu0_ * lnj + 0.5 * lambda0_ * lnj * lnj;
}

Mat EnergyDensity::base_stress(const Mat& f) const {
    const Mat id = Mat::Identity(dim_, dim_);
    if (family_ == Family::SaintVenantKirchhoff) {
        const Mat e = 0.5 * (f.transpose() * f - id);
        const Mat s = lambda0_ * e.trace() * id + 2.0 * mu0_ * e;
        return f * s;
    }
    require_positive_det(f);
    const Mat a = f.inverse();
    const double c = lambda0_ * std::log(f.determinant()) - mu0_;
    return mu0_ * f + c * a.transpose();
}

Mat EnergyDensity::base_tangent_apply(const Mat& f, const Mat& g) const {
    const Mat id = Mat::Identity(dim_, dim_);
    if (family_ == Family::SaintVenantKirchhoff) {
        const Mat e = 0.5 * (f.transpose() * f - id);
        const Mat s = lambda0_ * e.trace() * id + 2.0 * mu0_ * e;
        const Mat de = sym(f.transpose() * g);
        return lambda0_ * de.trace() * f + 2.0 * mu0_ * f * de + g * s;
    }
    require_positive_det(f);
    const Mat a = f.inverse();
    const double c = lambda0_ * std::log(f.determinant()) - mu0_;
    const Mat aga = a * g * a;
    return mu0_ * g + lambda0_ * (a * g).trace() * a.transpose() - c * aga.transpose();
}

Mat EnergyDensity::base_third_apply(const Mat& f, const Mat& g, const Mat& h) const {
    if (family_ == Family::SaintVenantKirchhoff) {
        // D^3E = 0, so the three terms pair one second variation of E with
        // one first variation.
        const Mat dg = sym(f.transpose() * g);
        const Mat dh = sym(f.transpose() * h);
        const Mat gh = sym(g.transpose() * h);
        return lambda0_ * gh.trace() * f + 2.0 * mu0_ * f * gh + lambda0_ * dh.trace() * g +
               2.0 * mu0_ * g * dh + lambda0_ * dg.trace() * h + 2.0 * mu0_ * h * dg;
    }
    require_positive_det(f);
    const Mat a = f.inverse();
    const double c = lambda0_ * std::log(f.determinant()) - mu0_;
    const Mat ag = a * g;
    const Mat ah = a * h;
    const Mat aga = ag * a;
    const Mat aha = ah * a;
    const Mat agaha = ag * aha;
    const Mat ahaga = ah * aga;
    return -lambda0_ * ah.trace() * aga.transpose() - lambda0_ * ag.trace() * aha.transpose() -
           lambda0_ * (ag * ah).trace() * a.transpose() +
           c * (agaha.transpose() + ahaga.transpose());
}

double EnergyDensity::evaluate(double omega, const Mat& f) const {
    return multiplier(omega) * base_energy(f);
}

Mat EnergyDensity::stress(double omega, const Mat& f) const {
    return multiplier(omega) * base_stress(f);
}

Mat EnergyDensity::tangent_apply(double omega, const Mat& f, const Mat& g) const {
    return multiplier(omega) * base_tangent_apply(f, g);
}

Mat9 EnergyDensity::tangent(double omega, const Mat& f) const {
    const int dd = dim_ * dim_;
    Mat9 t(dd, dd);
    const auto basis = matrix_basis(dim_);
    for (int a = 0; a < dd; ++a) t.row(a) = flatten(tangent_apply(omega, f, basis[a])).transpose();
    return 0.5 * (t + t.transpose());
}

Mat EnergyDensity::third_apply(double omega, const Mat& f, const Mat& g, const Mat& h) const {
    return multiplier(omega) * base_third_apply(f, g, h);
}

DerivativeTensor EnergyDensity::derivative(double omega, const Mat& f, int order) const {
    if (order < 1 || order > 3) throw std::invalid_argument("derivative order must be 1, 2 or 3");
    if (f.rows() != dim_ || f.cols() != dim_) throw std::invalid_argument("F has wrong shape");
    if (!(dist_to_rotations(f) < domain_radius_))
        throw DomainError("F outside the neighborhood of SO(d) where W is certified smooth");
    require_positive_det(f);

    const int dd = dim_ * dim_;
    const auto basis = matrix_basis(dim_);
    DerivativeTensor out;
    out.order = order;
    out.dim = dim_;
    if (order == 1) {
        const Eigen::VectorXd v = flatten(stress(omega, f));
        out.data.assign(v.data(), v.data() + v.size());
    } else if (order == 2) {
        const Mat9 t = tangent(omega, f);
        out.data.resize(static_cast<std::size_t>(dd * dd));
        for (int a = 0; a < dd; ++a)
            for (int b = 0; b < dd; ++b) out.data[static_cast<std::size_t>(a * dd + b)] = t(a, b);
    } else {
        out.data.resize(static_cast<std::size_t>(dd * dd * dd));
        for (int a = 0; a < dd; ++a)
            for (int b = 0; b < dd; ++b) {
                const Eigen::VectorXd v = flatten(third_apply(omega, f, basis[a], basis[b]));
                for (int c = 0; c < dd; ++c)
                    out.data[static_cast<std::size_t>((a * dd + b) * dd + c)] = v(c);
            }
    }
    return out;
}

double EnergyDensity::omega_derivative(double omega, const Mat& f) const {
    return multiplier_derivative(omega) * base_energy(f);
}

}  // namespace laminhom
