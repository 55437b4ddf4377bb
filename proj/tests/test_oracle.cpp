#include "laminhom/cell.hpp"
#include "laminhom/errors.hpp"
#include "laminhom/oracle.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace laminhom;
using namespace laminhom::oracle;
using namespace laminhom::testing;

namespace {

MaterialSample make_sample(std::vector<double> values, double spacing = 0.25) {
    MaterialSample s;
    s.period = spacing * static_cast<double>(values.size());
    s.values = std::move(values);
    return s;
}

MaterialSample alternating(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i % 2 == 0 ? 1.0 : -1.0;
    return make_sample(std::move(v));
}

double sup_diff(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).lpNorm<Eigen::Infinity>());
    return m;
}

}  // namespace

TEST_CASE("gradient and Hessian of the discrete energy against finite differences") {
    std::mt19937_64 rng(1);
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 2);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> om(7);
    for (auto& v : om) v = n01(rng);
    const DiscreteEnergyProblem prob(w, make_sample(om), random_near_rotation(rng, 2, 0.1));
    Eigen::VectorXd x(12);
    for (auto& v : x) v = 0.01 * n01(rng);
    const Eigen::VectorXd g = prob.gradient(x);
    const Eigen::MatrixXd hess = prob.hessian(prob.cell_gradients(x));
    const double step = 1e-6;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += step;
        xm(k) -= step;
        CHECK(std::abs((prob.energy(xp) - prob.energy(xm)) / (2 * step) - g(k)) <= 1e-7);
        const Eigen::VectorXd col = (prob.gradient(xp) - prob.gradient(xm)) / (2 * step);
        CHECK((col - hess.col(k)).norm() <= 1e-6 * (1.0 + hess.col(k).norm()));
    }
}

TEST_CASE("trivial minimizers") {
    std::mt19937_64 rng(2);
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 3);
    const Mat f = random_near_rotation(rng, 3, 0.1);
    const auto flat = minimize_direct(DiscreteEnergyProblem(w, make_sample(std::vector<double>(9, 0.7)), f));
    for (const auto& v : flat.nodal) CHECK(v.norm() <= 1e-15);
    CHECK(rel_err(flat.energy, w.evaluate(0.7, f)) <= 1e-14);

    const auto rot = minimize_direct(DiscreteEnergyProblem(w, alternating(10), random_rotation(rng, 3)));
    CHECK(std::abs(rot.energy) <= 1e-15);
}

TEST_CASE("two-phase laminates: oracle equals the flux-constancy solver") {
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 2);

    Mat f64 = Mat::Identity(2, 2);
    f64(0, 0) += 0.05;
    const auto s64 = alternating(64);
    const double w64 = homogenize(w, Laminate::from_sample(s64), f64, 0).W;
    const auto m64 = minimize_direct(DiscreteEnergyProblem(w, s64, f64));
    CHECK(std::abs(w64 - m64.energy) <= 1e-8);
    CHECK(m64.gradient_inf <= 1e-10 * (1.0 + std::abs(m64.energy)));

    Mat f16 = Mat::Identity(2, 2);
    f16(0, 1) += 0.015;
    f16(1, 0) += 0.015;
    const auto s16 = alternating(16);
    const auto lam16 = Laminate::from_sample(s16);
    const auto sol16 = solve_corrector(w, lam16, f16);
    const auto m16 = minimize_direct(DiscreteEnergyProblem(w, s16, f16));
    CHECK(std::abs(assemble(w, lam16, sol16, 0).W - m16.energy) <= 1e-8);
    CHECK(sup_diff(sol16.p, m16.p) <= 1e-7);
    // a shear along the layers is not homogeneous, so the corrector is nontrivial
    CHECK(m16.p.front().norm() > 1e-3);
}

TEST_CASE("direct linear solve: trivial cases and the closed-form layered solution") {
    std::mt19937_64 rng(3);
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.3, 0.8, 0.5, 2);
    const Mat f = random_near_rotation(rng, 2, 0.08);
    const Mat g = random_unit_matrix(rng, 2);

    const auto flat = make_sample(std::vector<double>(6, -0.2));
    const DiscreteEnergyProblem pf(w, flat, f);
    for (const auto& q : linear_solve_direct(pf, std::vector<Vec>(6, Vec::Zero(2)), g)) CHECK(q.norm() <= 1e-13);

    std::vector<double> om(16);
    std::bernoulli_distribution coin(0.5);
    for (auto& v : om) v = coin(rng) ? 0.9 : -0.9;
    om[0] = 0.9;
    om[1] = -0.9;
    const auto s = make_sample(om);
    const DiscreteEnergyProblem prob(w, s, f);
    const auto base = minimize_direct(prob);
    for (const auto& q : linear_solve_direct(prob, base.p, Mat::Zero(2, 2))) CHECK(q.norm() == 0.0);

    // Piecewise-constant coefficients: q_i = M_i^{-1}(tau - b_i) with tau fixed
    // by the zero mean, written out here from the acoustic matrices.
    std::vector<Mat> m_inv(16);
    std::vector<Vec> b(16);
    Mat avg_inv = Mat::Zero(2, 2);
    Vec avg_b = Vec::Zero(2);
    for (std::size_t i = 0; i < 16; ++i) {
        const Mat fi = f + outer_ed(base.p[i], 2);
        const Mat9 t = w.tangent(om[i], fi);
        Mat m(2, 2);
        // flattened index of e_j (x) e_2 is 2 j + 1
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) m(j, k) = t(2 * j + 1, 2 * k + 1);
        m_inv[i] = m.inverse();
        const Eigen::VectorXd tg = t * flatten(g);
        b[i] = Vec(2);
        b[i] << tg(1), tg(3);
        avg_inv += m_inv[i] / 16.0;
        avg_b += m_inv[i] * b[i] / 16.0;
    }
    const Vec tau = avg_inv.inverse() * avg_b;
    const auto q = linear_solve_direct(prob, base.p, g);
    for (std::size_t i = 0; i < 16; ++i) CHECK((q[i] - m_inv[i] * (tau - b[i])).norm() <= 1e-10);

    const auto lam = Laminate::from_sample(s);
    const auto sol = solve_corrector(w, lam, f);
    CHECK(sup_diff(solve_linearized(w, lam, sol, g).q, linear_solve_direct(prob, sol.p, g)) <= 1e-10);
}

TEST_CASE("oracle preconditions") {
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 2);
    Mat far = Mat::Identity(2, 2);
    far(1, 1) = 0.75;
    CHECK_THROWS_AS(minimize_direct(DiscreteEnergyProblem(w, alternating(4), far)), DomainError);
    CHECK_THROWS_AS(DiscreteEnergyProblem(w, make_sample({0.1}), Mat::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("solver and oracle agree on random small instances") {
    const auto rep = cross_check(50, 20261015);
    CHECK(rep.instances == 50);
    CHECK(rep.max_energy_diff <= 1e-8);
    CHECK(rep.max_p_diff <= 1e-7);
    CHECK(rep.max_linearized_diff <= 1e-10);
    MESSAGE("max |dW| = " << rep.max_energy_diff << ", max |dp| = " << rep.max_p_diff
                          << ", max |dq| = " << rep.max_linearized_diff);
}
