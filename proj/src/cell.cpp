#include "laminhom/cell.hpp"

#include "laminhom/errors.hpp"
#include "laminhom/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace laminhom {

Laminate Laminate::from_sample(const MaterialSample& s) { return uniform(s.values); }

Laminate Laminate::uniform(std::vector<double> omega) {
    Laminate lam;
    const double frac = 1.0 / static_cast<double>(omega.size());
    lam.fraction.assign(omega.size(), frac);
    lam.omega = std::move(omega);
    return lam;
}

double CorrectorSolution::max_abs_p() const {
    double m = 0.0;
    for (const auto& v : p) m = std::max(m, v.norm());
    return m;
}

double HomogenizedQuantities::d2(const Mat& g, const Mat& h) const {
    return flatten(g).dot(D2W * flatten(h));
}

double HomogenizedQuantities::d3(const Mat& g, const Mat& h, const Mat& k) const {
    const int dd = dim * dim;
    const Eigen::VectorXd a = flatten(g), b = flatten(h), c = flatten(k);
    double acc = 0.0;
    for (int i = 0; i < dd; ++i)
        for (int j = 0; j < dd; ++j)
            for (int l = 0; l < dd; ++l)
                acc += D3W[static_cast<std::size_t>((i * dd + j) * dd + l)] * a(i) * b(j) * c(l);
    return acc;
}

namespace {

Vec traction(const EnergyDensity& w, double om, const Mat& f) {
    return w.stress(om, f).col(f.cols() - 1);
}

// (M)_jk = D^2W(om, F)[e_j (x) e_d, e_k (x) e_d]
Mat acoustic(const EnergyDensity& w, double om, const Mat& f) {
    const int d = static_cast<int>(f.rows());
    Mat m(d, d);
    for (int j = 0; j < d; ++j) m.row(j) = w.tangent_apply(om, f, unit_matrix(d, j, d - 1)).col(d - 1).transpose();
    return 0.5 * (m + m.transpose());
}

bool admissible(const EnergyDensity& w, const Mat& f, double radius) {
    if (w.family() == Family::CompressibleNeoHookean && !(f.determinant() > 0.0)) return false;
    return dist_to_rotations(f) < radius;
}

struct LayerState {
    Vec p;
    Mat m_inv;
    double residual = 0.0;
    int iterations = 0;
};

// Newton with backtracking for DW(om, F + p (x) e_d) e_d = sigma, warm
// started at p0. Finishes with one polishing step past the tolerance so
// that the layer averages are accurate to roundoff.
LayerState invert_traction(const EnergyDensity& w, double om, const Mat& f, const Vec& sigma,
                           const Vec& p0, const SolverOptions& opts) {
    const int d = static_cast<int>(f.rows());
    const double tol = opts.tol_inner * (1.0 + sigma.norm());
    Vec p = p0;
    Mat fp = f + outer_ed(p, d);
    if (!admissible(w, fp, opts.neighborhood)) {
        p.setZero();
        fp = f;
    }
    Vec r = traction(w, om, fp) - sigma;
    double rn = r.norm();
    bool polished = false;
    int it = 0;
    for (;;) {
        const Mat m = acoustic(w, om, fp);
        const bool within = rn <= tol;
        if (within && (polished || rn == 0.0)) return {p, m.inverse(), rn, it};
        if (!within && it >= opts.max_inner) throw ConvergenceError("layer Newton did not converge");
        const Vec step = -m.ldlt().solve(r);
        double t = 1.0;
        bool accepted = false;
        bool saw_admissible = false;
        for (int k = 0; k <= opts.max_halvings; ++k, t *= 0.5) {
            const Vec pt = p + t * step;
            const Mat ft = f + outer_ed(pt, d);
            if (!admissible(w, ft, opts.neighborhood)) {
                if (within) break;
                continue;
            }
            saw_admissible = true;
            const Vec rt = traction(w, om, ft) - sigma;
            const double rtn = rt.norm();
            if (within ? rtn <= rn : rtn <= (1.0 - 1e-4 * t) * rn) {
                p = pt;
                fp = ft;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            if (within) break;  // the polishing step is only tried at full length
        }
        ++it;
        if (within) {
            polished = true;
            continue;
        }
        if (!accepted) {
            if (!saw_admissible) throw DomainError("layer line search left the admissible neighborhood");
            throw ConvergenceError("layer line search failed to reduce the flux residual (" +
                                   std::to_string(rn) + " at omega " + std::to_string(om) + ")");
        }
    }
}

struct OuterTrial {
    std::vector<LayerState> layers;
    Vec residual;  // sum_i f_i p_i
};

OuterTrial solve_layers(const EnergyDensity& w, const Laminate& lam, const Mat& f, const Vec& sigma,
                        const std::vector<LayerState>& warm, const SolverOptions& opts) {
    const int d = static_cast<int>(f.rows());
    OuterTrial out;
    out.layers.resize(lam.size());
    out.residual = Vec::Zero(d);
    for (std::size_t i = 0; i < lam.size(); ++i) {
        out.layers[i] = invert_traction(w, lam.omega[i], f, sigma, warm[i].p, opts);
        out.residual += lam.fraction[i] * out.layers[i].p;
    }
    return out;
}

Mat averaged_compliance(const Laminate& lam, const std::vector<LayerState>& layers, int d) {
    Mat j = Mat::Zero(d, d);
    for (std::size_t i = 0; i < lam.size(); ++i) j += lam.fraction[i] * layers[i].m_inv;
    return j;
}

}  // namespace

namespace {

struct OuterResult {
    Vec sigma;
    OuterTrial state;
};

// Outer Newton on sum_i f_i p_i(sigma) = 0 from (sigma, warm).
OuterResult outer_newton(const EnergyDensity& w, const Laminate& lam, const Mat& f, Vec sigma,
                         const std::vector<LayerState>& warm, const SolverOptions& opts, NewtonStats& stats) {
    const int d = static_cast<int>(f.rows());
    auto account = [&stats](const OuterTrial& t) {
        for (const auto& l : t.layers) {
            stats.total_inner_iterations += l.iterations;
            stats.max_inner_iterations = std::max(stats.max_inner_iterations, l.iterations);
        }
    };
    OuterTrial cur = solve_layers(w, lam, f, sigma, warm, opts);
    account(cur);

    bool converged = false;
    for (int outer = 0; outer < opts.max_outer && !converged; ++outer) {
        const double rn = cur.residual.norm();
        const Vec step = -averaged_compliance(lam, cur.layers, d).ldlt().solve(cur.residual);
        if (rn <= opts.tol_outer) {
            // A few full steps past the tolerance bring the mean of p to roundoff
            // (or to 1e-6 tol_outer when the tolerance is loose).
            converged = true;
            for (int k = 0; k < 3 && cur.residual.norm() > 1e-6 * opts.tol_outer; ++k) {
                const Vec ps = -averaged_compliance(lam, cur.layers, d).ldlt().solve(cur.residual);
                OuterTrial t;
                try {
                    t = solve_layers(w, lam, f, sigma + ps, cur.layers, opts);
                } catch (const Error&) {
                    break;
                }
                account(t);
                if (!(t.residual.norm() < cur.residual.norm())) break;
                sigma += ps;
                cur = std::move(t);
            }
            break;
        }
        ++stats.outer_iterations;
        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k <= opts.max_halvings; ++k, t *= 0.5) {
            OuterTrial trial;
            try {
                trial = solve_layers(w, lam, f, sigma + t * step, cur.layers, opts);
            } catch (const DomainError&) {
                continue;
            } catch (const ConvergenceError&) {
                continue;
            }
            account(trial);
            if (trial.residual.norm() <= (1.0 - 1e-4 * t) * rn) {
                sigma += t * step;
                cur = std::move(trial);
                accepted = true;
                break;
            }
        }
        if (!accepted) throw ConvergenceError("outer line search failed; F may be too far from SO(d)");
    }
    if (!converged && cur.residual.norm() > opts.tol_outer)
        throw ConvergenceError("outer Newton exhausted its iteration budget");
    return {sigma, std::move(cur)};
}

Vec zero_corrector_flux(const EnergyDensity& w, const Laminate& lam, const Mat& f) {
    Vec sigma = Vec::Zero(f.rows());
    for (std::size_t i = 0; i < lam.size(); ++i) sigma += lam.fraction[i] * traction(w, lam.omega[i], f);
    return sigma;
}

// F = R U with U symmetric positive definite (F is close to SO(d) here).
std::pair<Mat, Mat> polar(const Mat& f) {
    const Eigen::JacobiSVD<Mat> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat u = svd.matrixU();
    Mat v = svd.matrixV();
    Vec s = svd.singularValues();
    if ((u * v.transpose()).determinant() < 0.0) {
        u.col(u.cols() - 1) *= -1.0;
        s(s.size() - 1) *= -1.0;
    }
    return {u * v.transpose(), v * s.asDiagonal() * v.transpose()};
}

}  // namespace

CorrectorSolution solve_corrector(const EnergyDensity& w, const Laminate& lam, const Mat& f,
                                  const SolverOptions& opts) {
    const int d = w.dim();
    if (f.rows() != d || f.cols() != d) throw std::invalid_argument("F has wrong shape");
    if (lam.size() == 0 || lam.fraction.size() != lam.size())
        throw std::invalid_argument("laminate needs at least one layer with a fraction each");
    const double dist = dist_to_rotations(f);
    if (!(dist < opts.delta_bar))
        throw DomainError("dist(F, SO(d)) = " + std::to_string(dist) + " is not below delta_bar");
    if (!admissible(w, f, opts.neighborhood)) throw DomainError("F is not admissible");

    NewtonStats stats;
    const std::vector<LayerState> zero(lam.size(), LayerState{Vec::Zero(d), Mat::Zero(d, d), 0.0, 0});
    std::optional<OuterResult> result;
    try {
        // Flux of the zero corrector; exact for homogeneous layers.
        result = outer_newton(w, lam, f, zero_corrector_flux(w, lam, f), zero, opts, stats);
    } catch (const Error&) {
        if (opts.max_outer <= 0) throw;
    }
    // With strong contrast the zero-corrector flux can lie outside the range of
    // a soft layer's traction map. Then continue from the nearest rotation
    // along F_t = R (I + t (U - I)), refining the steps until each one converges.
    for (int steps = 2; !result; steps *= 2) {
        const auto [r, u] = polar(f);
        const Mat id = Mat::Identity(d, d);
        Vec sigma = Vec::Zero(d);
        std::vector<LayerState> warm = zero;
        try {
            for (int k = 1; k <= steps; ++k) {
                const Mat ft = r * (id + (static_cast<double>(k) / steps) * (u - id));
                auto step = outer_newton(w, lam, ft, sigma, warm, opts, stats);
                sigma = step.sigma;
                warm = step.state.layers;
                if (k == steps) result = std::move(step);
            }
        } catch (const Error&) {
            if (steps >= 64) throw;
        }
    }
    const Vec sigma = result->sigma;
    const OuterTrial& cur = result->state;

    CorrectorSolution sol;
    sol.F = f;
    sol.sigma = sigma;
    sol.p.reserve(lam.size());
    sol.acoustic_inverse.reserve(lam.size());
    double min_eig = std::numeric_limits<double>::infinity();
    double max_cond = 0.0;
    double max_flux = 0.0;
    for (std::size_t i = 0; i < lam.size(); ++i) {
        const auto& layer = cur.layers[i];
        sol.p.push_back(layer.p);
        sol.acoustic_inverse.push_back(layer.m_inv);
        const Mat m = acoustic(w, lam.omega[i], f + outer_ed(layer.p, d));
        const Eigen::SelfAdjointEigenSolver<Mat> eig(m, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
        min_eig = std::min(min_eig, lo);
        max_cond = std::max(max_cond, lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
        max_flux = std::max(max_flux, layer.residual);
    }
    sol.min_acoustic_eigenvalue = min_eig;
    sol.max_acoustic_condition = max_cond;
    stats.outer_residual = cur.residual.norm();
    stats.max_flux_residual = max_flux;
    sol.stats = stats;
    sol.lipschitz_exceeded = sol.max_abs_p() > opts.lipschitz_c * dist;
    return sol;
}

CorrectorSolution solve_corrector(const EnergyDensity& w, const MaterialSample& s, const Mat& f,
                                  const SolverOptions& opts) {
    return solve_corrector(w, Laminate::from_sample(s), f, opts);
}

namespace {

void require_regular(const CorrectorSolution& base, const SolverOptions& opts) {
    if (!(base.min_acoustic_eigenvalue > 0.0) || !(base.max_acoustic_condition <= opts.condition_limit))
        throw SingularityError("acoustic matrix is indefinite or ill-conditioned (condition " +
                               std::to_string(base.max_acoustic_condition) + ")");
}

// Solves M_i x_i + rhs_i = tau with sum_i f_i x_i = 0.
std::pair<std::vector<Vec>, Vec> constant_flux_solve(const Laminate& lam, const CorrectorSolution& base,
                                                     const std::vector<Vec>& rhs) {
    const int d = base.dim();
    Mat compliance = Mat::Zero(d, d);
    Vec weighted = Vec::Zero(d);
    for (std::size_t i = 0; i < lam.size(); ++i) {
        compliance += lam.fraction[i] * base.acoustic_inverse[i];
        weighted += lam.fraction[i] * (base.acoustic_inverse[i] * rhs[i]);
    }
    const Vec tau = compliance.ldlt().solve(weighted);
    std::vector<Vec> x(lam.size());
    for (std::size_t i = 0; i < lam.size(); ++i) x[i] = base.acoustic_inverse[i] * (tau - rhs[i]);
    return {std::move(x), tau};
}

}  // namespace

LinearizedCorrector solve_linearized(const EnergyDensity& w, const Laminate& lam,
                                     const CorrectorSolution& base, const Mat& g,
                                     const SolverOptions& opts) {
    require_regular(base, opts);
    const int d = base.dim();
    std::vector<Vec> b(lam.size());
    for (std::size_t i = 0; i < lam.size(); ++i)
        b[i] = w.tangent_apply(lam.omega[i], base.F + outer_ed(base.p[i], d), g).col(d - 1);
    auto [q, tau] = constant_flux_solve(lam, base, b);
    LinearizedCorrector out{g, std::move(q), tau, false};
    double qmax = 0.0;
    for (const auto& v : out.q) qmax = std::max(qmax, v.norm());
    out.lipschitz_exceeded = qmax > opts.lipschitz_c * g.norm();
    return out;
}

SecondLinearizedCorrector solve_second_linearized(const EnergyDensity& w, const Laminate& lam,
                                                  const CorrectorSolution& base,
                                                  const LinearizedCorrector& qg,
                                                  const LinearizedCorrector& qh) {
    const int d = base.dim();
    std::vector<Vec> c(lam.size());
    for (std::size_t i = 0; i < lam.size(); ++i) {
        const Mat fi = base.F + outer_ed(base.p[i], d);
        const Mat hp = qh.direction + outer_ed(qh.q[i], d);
        const Mat gp = qg.direction + outer_ed(qg.q[i], d);
        c[i] = w.third_apply(lam.omega[i], fi, hp, gp).col(d - 1);
    }
    auto [r, tau] = constant_flux_solve(lam, base, c);
    return {std::move(r), tau};
}

namespace {

std::vector<LinearizedCorrector> basis_correctors(const EnergyDensity& w, const Laminate& lam,
                                                  const CorrectorSolution& base,
                                                  const SolverOptions& opts) {
    std::vector<LinearizedCorrector> out;
    for (const Mat& e : matrix_basis(base.dim())) out.push_back(solve_linearized(w, lam, base, e, opts));
    return out;
}

}  // namespace

HomogenizedQuantities assemble(const EnergyDensity& w, const Laminate& lam,
                               const CorrectorSolution& base, int order, const SolverOptions& opts) {
    if (order < 0 || order > 3) throw std::invalid_argument("order must be in 0..3");
    const int d = base.dim();
    const int dd = d * d;
    HomogenizedQuantities hq;
    hq.dim = d;
    hq.order = order;
    hq.F = base.F;
    hq.DW = Mat::Zero(d, d);
    hq.D2W = Mat9::Zero(dd, dd);

    std::vector<LinearizedCorrector> lin;
    if (order >= 2) lin = basis_correctors(w, lam, base, opts);
    if (order >= 3) hq.D3W.assign(static_cast<std::size_t>(dd * dd * dd), 0.0);

    for (std::size_t i = 0; i < lam.size(); ++i) {
        const double om = lam.omega[i];
        const double fr = lam.fraction[i];
        const Mat fi = base.F + outer_ed(base.p[i], d);
        hq.W += fr * w.evaluate(om, fi);
        if (order < 1) continue;
        hq.DW += fr * w.stress(om, fi);
        if (order < 2) continue;

        // Columns: flattened G_a + q_a (x) e_d for the basis directions.
        std::vector<Mat> shifted(static_cast<std::size_t>(dd));
        Mat9 cols(dd, dd);
        for (int a = 0; a < dd; ++a) {
            shifted[a] = lin[a].direction + outer_ed(lin[a].q[i], d);
            cols.col(a) = flatten(shifted[a]);
        }
        Mat9 tangent_cols(dd, dd);
        for (int a = 0; a < dd; ++a) tangent_cols.col(a) = flatten(w.tangent_apply(om, fi, shifted[a]));
        hq.D2W += fr * (cols.transpose() * tangent_cols);

        if (order < 3) continue;
        for (int a = 0; a < dd; ++a)
            for (int b = a; b < dd; ++b) {
                const Eigen::VectorXd x = flatten(w.third_apply(om, fi, shifted[a], shifted[b]));
                const Eigen::VectorXd row = cols.transpose() * x;
                for (int c = b; c < dd; ++c)
                    hq.D3W[static_cast<std::size_t>((a * dd + b) * dd + c)] += fr * row(c);
            }
    }
    hq.D2W = 0.5 * (hq.D2W + hq.D2W.transpose()).eval();
    if (order >= 3) {
        // fill the remaining index orderings from a <= b <= c
        for (int a = 0; a < dd; ++a)
            for (int b = a; b < dd; ++b)
                for (int c = b; c < dd; ++c) {
                    const double v = hq.D3W[static_cast<std::size_t>((a * dd + b) * dd + c)];
                    const int idx[6][3] = {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}};
                    for (const auto& t : idx)
                        hq.D3W[static_cast<std::size_t>((t[0] * dd + t[1]) * dd + t[2])] = v;
                }
    }
    return hq;
}

HomogenizedQuantities homogenize(const EnergyDensity& w, const Laminate& lam, const Mat& f, int order,
                                 const SolverOptions& opts) {
    return assemble(w, lam, solve_corrector(w, lam, f, opts), order, opts);
}

std::vector<double> third_derivative_via_second_correctors(const EnergyDensity& w, const Laminate& lam,
                                                           const CorrectorSolution& base,
                                                           const SolverOptions& opts) {
    const int d = base.dim();
    const int dd = d * d;
    const auto lin = basis_correctors(w, lam, base, opts);
    const auto basis = matrix_basis(d);

    // r for each unordered pair (H, I); r is symmetric in its two directions.
    std::vector<std::vector<Vec>> second(static_cast<std::size_t>(dd * dd));
    for (int h = 0; h < dd; ++h)
        for (int k = h; k < dd; ++k) {
            auto r = solve_second_linearized(w, lam, base, lin[k], lin[h]).r;
            second[static_cast<std::size_t>(h * dd + k)] = r;
            second[static_cast<std::size_t>(k * dd + h)] = std::move(r);
        }

    // D^3W_hom[I, H, G] = avg D^3W[I', H', G] + avg D^2W[r_HI (x) e_d, G]
    std::vector<double> out(static_cast<std::size_t>(dd * dd * dd), 0.0);
    for (std::size_t i = 0; i < lam.size(); ++i) {
        const double om = lam.omega[i];
        const double fr = lam.fraction[i];
        const Mat fi = base.F + outer_ed(base.p[i], d);
        for (int a = 0; a < dd; ++a) {
            const Mat ip = basis[a] + outer_ed(lin[a].q[i], d);
            for (int b = 0; b < dd; ++b) {
                const Mat hp = basis[b] + outer_ed(lin[b].q[i], d);
                const Mat third = w.third_apply(om, fi, ip, hp);
                const Mat second_term =
                    w.tangent_apply(om, fi, outer_ed(second[static_cast<std::size_t>(b * dd + a)][i], d));
                const Eigen::VectorXd row = flatten(third + second_term);
                for (int c = 0; c < dd; ++c) out[static_cast<std::size_t>((a * dd + b) * dd + c)] += fr * row(c);
            }
        }
    }
    return out;
}

double det_identity_deviation(const Mat& f, const std::vector<Vec>& p, const std::vector<double>& fraction) {
    const int d = static_cast<int>(f.rows());
    const double det = f.determinant();
    double dev = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dev += fraction[i] * ((f + outer_ed(p[i], d)).determinant() - det);
    return std::abs(dev);
}

double det_identity_deviation(const Mat& f, const CorrectorSolution& c, const Laminate& lam) {
    return det_identity_deviation(f, c.p, lam.fraction);
}

double rank_one_modulus(const HomogenizedQuantities& q, int count, std::uint64_t seed) {
    CounterRng rng(seed, 0x52414e4bu, 0);
    const int d = q.dim;
    double kappa = std::numeric_limits<double>::infinity();
    for (int k = 0; k < count; ++k) {
        Vec a(d), b(d);
        for (int j = 0; j < d; ++j) a(j) = rng.normal();
        for (int j = 0; j < d; ++j) b(j) = rng.normal();
        const Mat ab = a * b.transpose();
        kappa = std::min(kappa, q.d2(ab, ab) / ab.squaredNorm());
    }
    return kappa;
}

std::vector<QuadraticExpansionRow> quadratic_expansion_check(const EnergyDensity& w, const Laminate& lam,
                                                             const Mat& g, const std::vector<double>& hs,
                                                             const SolverOptions& opts) {
    const int d = w.dim();
    const Mat id = Mat::Identity(d, d);
    const auto at_identity = homogenize(w, lam, id, 2, opts);
    const double quad_form = at_identity.d2(g, g);
    std::vector<QuadraticExpansionRow> rows;
    for (double h : hs) {
        QuadraticExpansionRow row;
        row.h = h;
        row.quadratic = 0.5 * h * h * quad_form;
        row.energy = h == 0.0 ? at_identity.W : homogenize(w, lam, id + h * g, 0, opts).W;
        row.ratio = h == 0.0 ? 0.0 : std::abs(row.energy - row.quadratic) / (h * h);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace laminhom
