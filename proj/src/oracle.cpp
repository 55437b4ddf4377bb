#include "laminhom/oracle.hpp"

#include "laminhom/errors.hpp"
#include "laminhom/random.hpp"

#include <cmath>
#include <numbers>

namespace laminhom::oracle {

DiscreteEnergyProblem::DiscreteEnergyProblem(EnergyDensity w, MaterialSample sample, Mat f)
    : w_(std::move(w)), sample_(std::move(sample)), f_(std::move(f)) {
    if (sample_.size() < 2) throw std::invalid_argument("oracle needs at least two cells");
}

std::vector<Vec> DiscreteEnergyProblem::cell_gradients(const Eigen::VectorXd& x) const {
    const int d = dim();
    const std::size_t n = cells();
    const double h = spacing();
    auto node = [&](std::size_t i) -> Vec {
        if (i % n == 0) return Vec::Zero(d);
        return x.segment(static_cast<Eigen::Index>((i - 1) * d), d);
    };
    std::vector<Vec> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = (node(i + 1) - node(i)) / h;
    return p;
}

double DiscreteEnergyProblem::energy(const Eigen::VectorXd& x) const {
    const auto p = cell_gradients(x);
    double e = 0.0;
    for (std::size_t i = 0; i < cells(); ++i) e += w_.evaluate(sample_.values[i], f_ + outer_ed(p[i], dim()));
    return e / static_cast<double>(cells());
}

Eigen::VectorXd DiscreteEnergyProblem::flux_jumps(const Eigen::VectorXd& x) const {
    const int d = dim();
    const std::size_t n = cells();
    const auto p = cell_gradients(x);
    std::vector<Vec> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = w_.stress(sample_.values[i], f_ + outer_ed(p[i], d)).col(d - 1);
    Eigen::VectorXd g(static_cast<Eigen::Index>((n - 1) * d));
    for (std::size_t j = 1; j < n; ++j) g.segment(static_cast<Eigen::Index>((j - 1) * d), d) = t[j - 1] - t[j];
    return g;
}

Eigen::VectorXd DiscreteEnergyProblem::gradient(const Eigen::VectorXd& x) const {
    return flux_jumps(x) / (static_cast<double>(cells()) * spacing());
}

Eigen::MatrixXd DiscreteEnergyProblem::hessian(const std::vector<Vec>& p) const {
    const int d = dim();
    const std::size_t n = cells();
    const double h = spacing();
    const double scale = 1.0 / (static_cast<double>(n) * h * h);
    const auto m = static_cast<Eigen::Index>((n - 1) * d);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t i = 0; i < n; ++i) {
        const Mat fi = f_ + outer_ed(p[i], d);
        Eigen::MatrixXd k(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                const Mat ga = unit_matrix(d, a, d - 1);
                const Mat gb = unit_matrix(d, b, d - 1);
                k(a, b) = scale * ddot(w_.tangent_apply(sample_.values[i], fi, ga), gb);
            }
        // cell i couples nodes i and i+1; node 0 is pinned
        const std::size_t lo = i, hi = (i + 1) % n;
        const bool lo_free = lo != 0, hi_free = hi != 0;
        const auto li = static_cast<Eigen::Index>((lo - 1) * d);
        const auto hi_idx = static_cast<Eigen::Index>((hi - 1) * d);
        if (lo_free) hess.block(li, li, d, d) += k;
        if (hi_free) hess.block(hi_idx, hi_idx, d, d) += k;
        if (lo_free && hi_free) {
            hess.block(li, hi_idx, d, d) -= k;
            hess.block(hi_idx, li, d, d) -= k;
        }
    }
    return hess;
}

namespace {

bool admissible(const EnergyDensity& w, const Mat& f, double radius) {
    if (w.family() == Family::CompressibleNeoHookean && !(f.determinant() > 0.0)) return false;
    return dist_to_rotations(f) < radius;
}

bool all_admissible(const DiscreteEnergyProblem& prob, const std::vector<Vec>& p, double radius) {
    for (const auto& v : p)
        if (!admissible(prob.density(), prob.F() + outer_ed(v, prob.dim()), radius)) return false;
    return true;
}

std::vector<Vec> nodal_mean_zero(const Eigen::VectorXd& x, int d, std::size_t n) {
    std::vector<Vec> nodes(n, Vec::Zero(d));
    Vec mean = Vec::Zero(d);
    for (std::size_t i = 1; i < n; ++i) {
        nodes[i] = x.segment(static_cast<Eigen::Index>((i - 1) * d), d);
        mean += nodes[i];
    }
    mean /= static_cast<double>(n);
    for (auto& v : nodes) v -= mean;
    return nodes;
}

}  // namespace

DirectMinimum minimize_direct(const DiscreteEnergyProblem& prob, const SolverOptions& opts) {
    const double dist = dist_to_rotations(prob.F());
    if (!(dist < opts.delta_bar)) throw DomainError("dist(F, SO(d)) is not below delta_bar");
    const int d = prob.dim();
    const std::size_t n = prob.cells();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>((n - 1) * d));
    double e = prob.energy(x);
    Eigen::VectorXd jumps = prob.flux_jumps(x);
    constexpr int kMaxIterations = 100;
    for (int it = 0; it <= kMaxIterations; ++it) {
        const double ginf = jumps.lpNorm<Eigen::Infinity>();
        if (ginf <= 1e-10 * (1.0 + std::abs(e))) {
            DirectMinimum out;
            out.p = prob.cell_gradients(x);
            out.nodal = nodal_mean_zero(x, d, n);
            out.energy = e;
            out.gradient_inf = ginf;
            out.iterations = it;
            return out;
        }
        if (it == kMaxIterations) break;
        const Eigen::VectorXd g = jumps / (static_cast<double>(n) * prob.spacing());
        const Eigen::VectorXd step = -prob.hessian(prob.cell_gradients(x)).ldlt().solve(g);
        const double slope = g.dot(step);
        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k <= opts.max_halvings; ++k, t *= 0.5) {
            const Eigen::VectorXd xt = x + t * step;
            if (!all_admissible(prob, prob.cell_gradients(xt), opts.neighborhood)) continue;
            const double et = prob.energy(xt);
            const Eigen::VectorXd jt = prob.flux_jumps(xt);
            // Near the minimum the energy decrease drowns in roundoff; accept a
            // step that still shrinks the gradient.
            const bool armijo = et <= e + 1e-4 * t * slope;
            const bool flat = std::abs(et - e) <= 1e-13 * (1.0 + std::abs(e));
            if (armijo || (flat && jt.lpNorm<Eigen::Infinity>() < ginf)) {
                x = xt;
                e = et;
                jumps = jt;
                accepted = true;
                break;
            }
        }
        if (!accepted) throw ConvergenceError("oracle line search stalled");
    }
    throw ConvergenceError("oracle Newton exhausted its iteration budget");
}

std::vector<Vec> linear_solve_direct(const DiscreteEnergyProblem& prob, const std::vector<Vec>& base_p,
                                     const Mat& g) {
    const int d = prob.dim();
    const std::size_t n = prob.cells();
    const double h = prob.spacing();
    if (base_p.size() != n) throw std::invalid_argument("base configuration has the wrong size");

    // Minimize (1/n) sum_i 1/2 D^2W_i[G + q_i (x) e_d, G + q_i (x) e_d] over nodal psi,
    // q_i = (psi_{i+1} - psi_i)/h. The linear term has gradient (b_{j-1} - b_j)/(n h)
    // with b_i = D^2W_i[G] e_d.
    std::vector<Vec> b(n);
    for (std::size_t i = 0; i < n; ++i)
        b[i] = prob.density().tangent_apply(prob.omega(i), prob.F() + outer_ed(base_p[i], d), g).col(d - 1);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>((n - 1) * d));
    for (std::size_t j = 1; j < n; ++j)
        rhs.segment(static_cast<Eigen::Index>((j - 1) * d), d) = (b[j - 1] - b[j]) / (static_cast<double>(n) * h);

    const Eigen::LLT<Eigen::MatrixXd> llt(prob.hessian(base_p));
    if (llt.info() != Eigen::Success) throw SingularityError("linearized system is not positive definite");
    const Eigen::VectorXd psi = llt.solve(-rhs);
    return prob.cell_gradients(psi);
}

namespace {

Mat random_instance_gradient(CounterRng& rng, int d, double radius) {
    // R (I + S) with S symmetric, |S| = radius * u, so dist(F, SO(d)) = |S|.
    Mat s(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) s(i, j) = rng.normal();
    s = 0.5 * (s + s.transpose()).eval();
    s *= radius * rng.uniform() / s.norm();
    Mat r;
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    if (d == 2) {
        r = rotation2(angle);
    } else {
        const Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        r = rotation3(axis, angle);
    }
    return r * (Mat::Identity(d, d) + s);
}

}  // namespace

CrossCheckReport cross_check(int count, std::uint64_t seed, const SolverOptions& opts) {
    CrossCheckReport rep;
    for (int k = 0; k < count; ++k) {
        CounterRng rng(seed, 0x4f524331u, static_cast<std::uint64_t>(k));
        const int d = k % 2 == 0 ? 2 : 3;
        const Family fam = d == 2 && k % 4 == 2 ? Family::CompressibleNeoHookean : Family::SaintVenantKirchhoff;
        const EnergyDensity w(fam, 0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.6 * rng.uniform(), d);
        const auto n = static_cast<std::size_t>(2 + std::floor(63.0 * rng.uniform()));
        MaterialSample s;
        s.values.resize(n);
        for (auto& v : s.values) v = rng.normal();
        s.period = 0.5 * static_cast<double>(n);
        const Mat f = random_instance_gradient(rng, d, 0.1);
        Mat g(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) g(i, j) = rng.normal();

        const auto lam = Laminate::from_sample(s);
        const auto sol = solve_corrector(w, lam, f, opts);
        const double w_hom = assemble(w, lam, sol, 0, opts).W;
        const DiscreteEnergyProblem prob(w, s, f);
        const auto direct = minimize_direct(prob, opts);
        const auto q = solve_linearized(w, lam, sol, g, opts).q;
        const auto q_direct = linear_solve_direct(prob, sol.p, g);

        rep.max_energy_diff = std::max(rep.max_energy_diff, std::abs(w_hom - direct.energy));
        rep.max_stationarity = std::max(rep.max_stationarity, direct.gradient_inf);
        for (std::size_t i = 0; i < n; ++i) {
            rep.max_p_diff = std::max(rep.max_p_diff, (sol.p[i] - direct.p[i]).lpNorm<Eigen::Infinity>());
            rep.max_linearized_diff =
                std::max(rep.max_linearized_diff, (q[i] - q_direct[i]).lpNorm<Eigen::Infinity>());
        }
        ++rep.instances;
    }
    return rep;
}

}  // namespace laminhom::oracle
