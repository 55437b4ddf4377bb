#include "laminhom/cell.hpp"
#include "laminhom/errors.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace laminhom;
using namespace laminhom::testing;

namespace {

Laminate random_laminate(std::mt19937_64& rng, std::size_t n, double spread = 1.0) {
    std::normal_distribution<double> n01(0.0, spread);
    std::vector<double> om(n);
    for (auto& v : om) v = n01(rng);
    return Laminate::uniform(std::move(om));
}

Laminate two_phase(std::size_t n) {
    std::vector<double> om(n);
    for (std::size_t i = 0; i < n; ++i) om[i] = i % 2 == 0 ? 1.0 : -1.0;
    return Laminate::uniform(std::move(om));
}

double averaged_energy(const EnergyDensity& w, const Laminate& lam, const Mat& f, const std::vector<Vec>& p) {
    double e = 0.0;
    for (std::size_t i = 0; i < lam.size(); ++i)
        e += lam.fraction[i] * w.evaluate(lam.omega[i], f + outer_ed(p[i], w.dim()));
    return e;
}

Vec mean_of(const Laminate& lam, const std::vector<Vec>& v) {
    Vec m = Vec::Zero(v.front().size());
    for (std::size_t i = 0; i < v.size(); ++i) m += lam.fraction[i] * v[i];
    return m;
}

double sup_norm(const std::vector<Vec>& v) {
    double m = 0.0;
    for (const auto& x : v) m = std::max(m, x.lpNorm<Eigen::Infinity>());
    return m;
}

struct Case {
    EnergyDensity w;
    Mat f;
    Laminate lam;
};

std::vector<Case> random_cases(std::mt19937_64& rng, int count) {
    const EnergyDensity densities[] = {
        EnergyDensity(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 2),
        EnergyDensity(Family::SaintVenantKirchhoff, 2.0, 0.7, 0.3, 3),
        EnergyDensity(Family::CompressibleNeoHookean, 1.5, 1.0, 0.5, 2),
    };
    std::uniform_int_distribution<std::size_t> sizes(2, 40);
    std::vector<Case> out;
    for (int k = 0; k < count; ++k) {
        const auto& w = densities[k % 3];
        out.push_back({w, random_near_rotation(rng, w.dim(), 0.15), random_laminate(rng, sizes(rng))});
    }
    return out;
}

}  // namespace

TEST_CASE("homogeneous laminate has zero corrector") {
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 2);
    std::mt19937_64 rng(1);
    const Mat f = random_near_rotation(rng, 2, 0.15);
    const auto lam = Laminate::uniform(std::vector<double>(17, 0.4));
    const auto sol = solve_corrector(w, lam, f);
    CHECK(sup_norm(sol.p) <= 1e-15);
    CHECK((sol.sigma - w.stress(0.4, f).col(1)).norm() <= 1e-14);

    const auto hq = assemble(w, lam, sol, 2);
    CHECK(rel_err(hq.W, w.evaluate(0.4, f)) <= 1e-14);
    CHECK((hq.DW - w.stress(0.4, f)).norm() <= 1e-13);
    CHECK((hq.D2W - w.tangent(0.4, f)).norm() <= 1e-12 * w.tangent(0.4, f).norm());
}

TEST_CASE("rotations are stress free for every laminate") {
    std::mt19937_64 rng(2);
    for (int d : {2, 3}) {
        const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, d);
        const Mat r = random_rotation(rng, d);
        const auto sol = solve_corrector(w, random_laminate(rng, 25), r);
        CHECK(sup_norm(sol.p) <= 1e-14);
        CHECK(sol.sigma.norm() <= 1e-14);
    }
}

TEST_CASE("corrector invariants on random instances") {
    std::mt19937_64 rng(3);
    const SolverOptions opts;
    for (const auto& c : random_cases(rng, 30)) {
        const auto sol = solve_corrector(c.w, c.lam, c.f, opts);
        const double n = static_cast<double>(c.lam.size());
        CHECK(mean_of(c.lam, sol.p).norm() <= 1e-13 * n * std::max(sol.max_abs_p(), 1e-300));
        for (std::size_t i = 0; i < c.lam.size(); ++i) {
            const Vec t = c.w.stress(c.lam.omega[i], c.f + outer_ed(sol.p[i], c.w.dim())).col(c.w.dim() - 1);
            CHECK((t - sol.sigma).norm() <= 1e-10 * (1.0 + sol.sigma.norm()));
        }
        CHECK(sol.stats.outer_residual <= opts.tol_outer);
        CHECK(det_identity_deviation(c.f, sol, c.lam) <= 1e-12 * std::abs(c.f.determinant()) * n);
        CHECK_FALSE(sol.lipschitz_exceeded);
    }
}

TEST_CASE("determinant identity for arbitrary mean-zero profiles") {
    std::mt19937_64 rng(4);
    for (int d : {2, 3}) {
        const Mat f = random_near_rotation(rng, d, 0.2);
        std::vector<Vec> p(33);
        Vec mean = Vec::Zero(d);
        for (auto& v : p) {
            v = random_matrix(rng, d).col(0) * 0.1;
            mean += v;
        }
        mean /= 33.0;
        for (auto& v : p) v -= mean;
        const std::vector<double> frac(33, 1.0 / 33.0);
        CHECK(det_identity_deviation(f, p, frac) <= 1e-14);
        CHECK(det_identity_deviation(f, std::vector<Vec>(33, Vec::Zero(d)), frac) == 0.0);
    }
}

TEST_CASE("frame indifference of the corrector and the energy") {
    std::mt19937_64 rng(5);
    for (const auto& c : random_cases(rng, 12)) {
        const auto sol = solve_corrector(c.w, c.lam, c.f);
        const double w0 = assemble(c.w, c.lam, sol, 0).W;
        for (int k = 0; k < 3; ++k) {
            const Mat r = random_rotation(rng, c.w.dim());
            const auto rot = solve_corrector(c.w, c.lam, r * c.f);
            CHECK(std::abs(assemble(c.w, c.lam, rot, 0).W - w0) <= 1e-10);
            for (std::size_t i = 0; i < c.lam.size(); ++i) CHECK((rot.p[i] - r * sol.p[i]).norm() <= 1e-10);
        }
    }
}

TEST_CASE("corrector minimizes the averaged energy") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (const auto& c : random_cases(rng, 6)) {
        const auto sol = solve_corrector(c.w, c.lam, c.f);
        const double w_hom = assemble(c.w, c.lam, sol, 0).W;
        CHECK(std::abs(averaged_energy(c.w, c.lam, c.f, sol.p) - w_hom) <= 1e-15);
        for (int k = 0; k < 20; ++k) {
            const double scale = std::pow(10.0, -1.0 - 3.0 * k / 20.0);
            std::vector<Vec> pt = sol.p;
            Vec shift = Vec::Zero(c.w.dim());
            for (auto& v : pt) {
                Vec e(c.w.dim());
                for (int j = 0; j < c.w.dim(); ++j) e(j) = scale * n01(rng);
                v += e;
            }
            const Vec m = mean_of(c.lam, pt) - mean_of(c.lam, sol.p);
            for (auto& v : pt) v -= m;
            CHECK(averaged_energy(c.w, c.lam, c.f, pt) >= w_hom - 1e-15);
        }
    }
}

TEST_CASE("solver errors") {
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 2);
    const auto lam = two_phase(8);
    Mat far = Mat::Identity(2, 2);
    far(0, 0) = 1.25;
    CHECK_THROWS_AS(solve_corrector(w, lam, far), DomainError);

    Mat f = Mat::Identity(2, 2);
    f(0, 0) = 1.05;
    SolverOptions none;
    none.max_outer = 0;
    f(0, 1) = 0.04;
    CHECK_THROWS_AS(solve_corrector(w, lam, f, none), ConvergenceError);

    SolverOptions strict;
    strict.condition_limit = 1.0;
    const auto sol = solve_corrector(w, lam, f, strict);
    CHECK_THROWS_AS(solve_linearized(w, lam, sol, Mat::Identity(2, 2), strict), SingularityError);
    CHECK_THROWS_AS(assemble(w, lam, sol, 4), std::invalid_argument);
}

TEST_CASE("linearized corrector: trivial cases and linearity") {
    std::mt19937_64 rng(7);
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 3);
    const Mat f = random_near_rotation(rng, 3, 0.1);

    const auto flat = Laminate::uniform(std::vector<double>(9, -0.3));
    const auto base_flat = solve_corrector(w, flat, f);
    const Mat g = random_unit_matrix(rng, 3);
    const auto q_flat = solve_linearized(w, flat, base_flat, g);
    CHECK(sup_norm(q_flat.q) <= 1e-14);
    CHECK((q_flat.tau - w.tangent_apply(-0.3, f, g).col(2)).norm() <= 1e-13);

    const auto lam = random_laminate(rng, 21);
    const auto base = solve_corrector(w, lam, f);
    const auto q0 = solve_linearized(w, lam, base, Mat::Zero(3, 3));
    CHECK(sup_norm(q0.q) == 0.0);
    CHECK(q0.tau.norm() == 0.0);

    const Mat h = random_unit_matrix(rng, 3);
    const auto qg = solve_linearized(w, lam, base, g);
    const auto qh = solve_linearized(w, lam, base, h);
    const auto qc = solve_linearized(w, lam, base, 2.0 * g - 0.5 * h);
    CHECK(mean_of(lam, qg.q).norm() <= 1e-13 * 21 * sup_norm(qg.q));
    for (std::size_t i = 0; i < lam.size(); ++i) {
        CHECK((qc.q[i] - (2.0 * qg.q[i] - 0.5 * qh.q[i])).norm() <= 1e-12);
        const Mat fi = f + outer_ed(base.p[i], 3);
        const Vec flux = w.tangent_apply(lam.omega[i], fi, g + outer_ed(qg.q[i], 3)).col(2);
        CHECK((flux - qg.tau).norm() <= 1e-12);
    }
}

TEST_CASE("two-phase linear laminate at the identity: harmonic means") {
    // At F = Id the SVK tangent is m (lambda tr G tr H + 2 mu sym G : sym H), so
    // the acoustic matrix is m (mu I + (lambda + mu) e_d e_d^T). Axial and
    // transverse shear moduli of a laminate are the harmonic means of
    // m (lambda + 2 mu) and m mu over the layers.
    const double lambda = 1.3, mu = 0.8, a = 0.6;
    for (int d : {2, 3}) {
        const EnergyDensity w(Family::SaintVenantKirchhoff, lambda, mu, a, d);
        std::vector<double> om = {1.0, 1.0, 1.0, -1.0, -1.0, 0.3, 1.0, -1.0};
        const auto lam = Laminate::uniform(om);
        double inv_axial = 0.0, inv_shear = 0.0;
        for (double o : om) {
            const double m = 1.0 + a * std::tanh(o);
            inv_axial += 1.0 / (m * (lambda + 2.0 * mu)) / om.size();
            inv_shear += 1.0 / (m * mu) / om.size();
        }
        const auto hq = homogenize(w, lam, Mat::Identity(d, d), 2);
        const Mat axial = unit_matrix(d, d - 1, d - 1);
        const Mat shear = unit_matrix(d, 0, d - 1);
        CHECK(rel_err(hq.d2(axial, axial), 1.0 / inv_axial) <= 1e-12);
        CHECK(rel_err(hq.d2(shear, shear), 1.0 / inv_shear) <= 1e-12);
    }
}

TEST_CASE("second linearized corrector") {
    std::mt19937_64 rng(8);
    for (const auto& c : random_cases(rng, 6)) {
        const int d = c.w.dim();
        const auto base = solve_corrector(c.w, c.lam, c.f);
        const Mat g = random_unit_matrix(rng, d), h = random_unit_matrix(rng, d);
        const auto qg = solve_linearized(c.w, c.lam, base, g);
        const auto qh = solve_linearized(c.w, c.lam, base, h);
        const auto q0 = solve_linearized(c.w, c.lam, base, Mat::Zero(d, d));
        const auto rgh = solve_second_linearized(c.w, c.lam, base, qg, qh);
        const auto rhg = solve_second_linearized(c.w, c.lam, base, qh, qg);
        for (std::size_t i = 0; i < c.lam.size(); ++i) CHECK((rgh.r[i] - rhg.r[i]).norm() <= 1e-10);
        CHECK(mean_of(c.lam, rgh.r).norm() <= 1e-13 * c.lam.size() * std::max(sup_norm(rgh.r), 1e-300));
        CHECK(sup_norm(solve_second_linearized(c.w, c.lam, base, qg, q0).r) == 0.0);

        const auto flat = Laminate::uniform(std::vector<double>(5, 0.2));
        const auto bf = solve_corrector(c.w, flat, c.f);
        const auto r_flat = solve_second_linearized(c.w, flat, bf, solve_linearized(c.w, flat, bf, g),
                                                    solve_linearized(c.w, flat, bf, h));
        CHECK(sup_norm(r_flat.r) <= 1e-13);
    }
}

TEST_CASE("assembled derivatives against finite differences") {
    std::mt19937_64 rng(9);
    const double step = 1e-4;
    for (const auto& c : random_cases(rng, 6)) {
        const int d = c.w.dim();
        const auto hq = homogenize(c.w, c.lam, c.f, 3);
        for (int k = 0; k < 5; ++k) {
            const Mat g = random_unit_matrix(rng, d);
            const auto plus = homogenize(c.w, c.lam, c.f + step * g, 2);
            const auto minus = homogenize(c.w, c.lam, c.f - step * g, 2);
            const double fd1 = (plus.W - minus.W) / (2.0 * step);
            CHECK(rel_err(ddot(hq.DW, g), fd1, 1e-8) <= 1e-5);

            const Mat fd2 = (plus.DW - minus.DW) / (2.0 * step);
            for (const Mat& e : matrix_basis(d)) CHECK(std::abs(hq.d2(g, e) - ddot(fd2, e)) <= 1e-4 * hq.D2W.norm());

            const Mat9 fd3 = (plus.D2W - minus.D2W) / (2.0 * step);
            const Mat h = random_unit_matrix(rng, d), i3 = random_unit_matrix(rng, d);
            const double fd = flatten(h).dot(fd3 * flatten(i3));
            CHECK(std::abs(hq.d3(g, h, i3) - fd) <= 1e-4 * (1.0 + std::abs(fd)));
        }
    }
}

TEST_CASE("third derivative: symmetric formula and second-corrector route agree") {
    std::mt19937_64 rng(10);
    for (const auto& c : random_cases(rng, 6)) {
        const auto base = solve_corrector(c.w, c.lam, c.f);
        const auto hq = assemble(c.w, c.lam, base, 3);
        const auto alt = third_derivative_via_second_correctors(c.w, c.lam, base);
        double scale = 0.0, diff = 0.0;
        for (std::size_t k = 0; k < alt.size(); ++k) {
            scale = std::max(scale, std::abs(hq.D3W[k]));
            diff = std::max(diff, std::abs(hq.D3W[k] - alt[k]));
        }
        CHECK(diff <= 1e-10 * scale);
    }
}

TEST_CASE("tangent moduli are symmetric and rank-one positive") {
    std::mt19937_64 rng(11);
    for (const auto& c : random_cases(rng, 9)) {
        const auto hq = homogenize(c.w, c.lam, c.f, 2);
        CHECK((hq.D2W - hq.D2W.transpose()).norm() == 0.0);
        CHECK(rank_one_modulus(hq, 200, 17) > 0.0);
    }
}

TEST_CASE("quadratic expansion at the identity") {
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 2);
    std::mt19937_64 rng(12);
    const Mat g = random_unit_matrix(rng, 2);
    const std::vector<double> hs = {0.0, 1e-1, 5e-2, 2.5e-2, 1.25e-2, 1e-2};

    const auto flat = quadratic_expansion_check(w, Laminate::uniform({0.3, 0.3, 0.3}), g, hs);
    CHECK(flat[0].ratio == 0.0);
    CHECK(flat[0].energy == 0.0);
    // log-log slope of the remainder ratio over the halving steps
    const double slope = std::log(flat[1].ratio / flat[4].ratio) / std::log(flat[1].h / flat[4].h);
    CHECK(slope == doctest::Approx(1.0).epsilon(0.2));

    for (int k = 0; k < 4; ++k) {
        const auto rows = quadratic_expansion_check(w, random_laminate(rng, 16), g, hs);
        CHECK(rows.back().ratio <= rows[1].ratio);
    }
}
