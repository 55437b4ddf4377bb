#include "laminhom/commands.hpp"

#include "laminhom/cell.hpp"
#include "laminhom/csv.hpp"
#include "laminhom/errors.hpp"
#include "laminhom/oracle.hpp"
#include "laminhom/stats.hpp"

#include <fmt/format.h>

#include <unistd.h>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace laminhom {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t cells_for(double L, double h) { return static_cast<std::size_t>(std::llround(L / h)); }

RunMetadata metadata(const ExperimentConfig& cfg, std::string command) {
    return {std::move(command), cfg.hash(), cfg.seed, cfg.canonical(), {}};
}

struct Check {
    std::string suite;
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    enum Kind { AtMost, AtLeast, Above, Flag } kind = AtMost;

    bool exceeded() const {
        switch (kind) {
            case AtMost: return !(value <= tolerance);
            case AtLeast: return !(value >= tolerance);
            case Above: return !(value > tolerance);
            case Flag: return value > tolerance;
        }
        return true;
    }
    bool failed() const { return kind != Flag && exceeded(); }
    std::string status() const {
        if (kind == Flag) return exceeded() ? "flag" : "pass";
        return failed() ? "fail" : "pass";
    }
};

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-6);
}

Mat frame_rotation(int d) {
    return d == 2 ? rotation2(0.7) : rotation3(Eigen::Vector3d(1.0, 2.0, 3.0).normalized(), 0.7);
}

// Consistency checks of one solved sample: derivative representations against
// finite differences, the null-Lagrangian identity, frame indifference,
// rank-one positivity and the residual of the flux-constancy system.
std::vector<Check> sample_checks(const EnergyDensity& w, const Laminate& lam, const Mat& f,
                                 const CorrectorSolution& sol, const HomogenizedQuantities& q,
                                 const SolverOptions& opts, const std::string& suite) {
    const int d = w.dim();
    const double n = static_cast<double>(lam.size());
    const auto basis = matrix_basis(d);
    std::vector<Check> out;

    const double fd1 = 1e-5, fd2 = 1e-4;
    Eigen::MatrixXd dw_fd(d, d), d2w_fd(d * d, d * d);
    for (int a = 0; a < d * d; ++a) {
        const Mat& e = basis[static_cast<std::size_t>(a)];
        const double wp = homogenize(w, lam, f + fd1 * e, 0, opts).W;
        const double wm = homogenize(w, lam, f - fd1 * e, 0, opts).W;
        dw_fd(a / d, a % d) = (wp - wm) / (2.0 * fd1);
        const auto sp = homogenize(w, lam, f + fd2 * e, 1, opts).DW;
        const auto sm = homogenize(w, lam, f - fd2 * e, 1, opts).DW;
        d2w_fd.col(a) = flatten((sp - sm) / (2.0 * fd2));
    }
    out.push_back({suite, "fd_dw", rel_err(dw_fd, Eigen::MatrixXd(q.DW)), 1e-5});
    out.push_back({suite, "fd_d2w", rel_err(d2w_fd, Eigen::MatrixXd(q.D2W)), 1e-4});

    out.push_back({suite, "det_identity", det_identity_deviation(f, sol, lam),
                   1e-12 * n * std::abs(f.determinant())});

    const double w_rot = homogenize(w, lam, frame_rotation(d) * f, 0, opts).W;
    out.push_back({suite, "frame_indifference", std::abs(w_rot - q.W), 1e-10});

    out.push_back({suite, "rank_one_positivity", rank_one_modulus(q, 100, 7), 0.0, Check::Above});

    Vec mean = Vec::Zero(d);
    for (std::size_t i = 0; i < lam.size(); ++i) mean += lam.fraction[i] * sol.p[i];
    const double flux = std::max(sol.stats.outer_residual, sol.stats.max_flux_residual / (1.0 + sol.sigma.norm()));
    out.push_back({suite, "flux_residual", flux, 1e-12});
    // Floor for profiles that are themselves roundoff (homogeneous layers).
    out.push_back({suite, "mean_zero", mean.norm(), std::max(1e-13 * n * sol.max_abs_p(), 1e-15)});
    out.push_back({suite, "lipschitz", sol.max_abs_p() / std::max(dist_to_rotations(f), 1e-300), opts.lipschitz_c,
                   Check::Flag});
    return out;
}

void write_checks(const fs::path& path, const std::vector<Check>& checks, const RunMetadata& meta) {
    CsvWriter csv(path, schema("checks"), meta);
    for (const auto& c : checks) csv.row({c.name, csv_number(c.value), csv_number(c.tolerance), c.status()});
    csv.close();
}

void report_checks(std::ostream& report, const std::vector<Check>& checks) {
    for (const auto& c : checks)
        report << fmt::format("{:<5} {:<14} {:<22} {:.3e} (tol {:.3e})\n", c.status(), c.suite, c.name, c.value,
                              c.tolerance);
}

// Keeps the levels that still have two successful samples after an interrupt.
EnsembleRun usable_levels(EnsembleRun run) {
    std::vector<LevelRun> kept;
    for (auto& lv : run.levels) {
        std::size_t ok = 0;
        for (const auto& s : lv.samples) ok += s.ok ? 1 : 0;
        if (ok >= 2) kept.push_back(std::move(lv));
    }
    run.levels = std::move(kept);
    return run;
}

struct FitOutcome {
    std::optional<RateFit> fit;
    std::string status;
    std::size_t points = 0;
};

FitOutcome try_fit(const std::vector<double>& xs, const std::vector<double>& ys, std::uint64_t seed) {
    FitOutcome o;
    o.points = xs.size();
    try {
        o.fit = fit_rate(xs, ys, kBootstrapResamples, seed);
        o.status = "ok";
    } catch (const DegenerateFitError& e) {
        o.status = "degenerate";
    }
    return o;
}

std::vector<std::string> rate_row(int order, std::string_view kind, const FitOutcome& o) {
    if (!o.fit)
        return {std::to_string(order), std::string(kind), "nan", "nan", "nan", "nan", std::to_string(o.points), o.status};
    return {std::to_string(order),        std::string(kind),       csv_number(o.fit->slope),
            csv_number(o.fit->intercept), csv_number(o.fit->ci_half_width), csv_number(o.fit->r_squared),
            std::to_string(o.points),     o.status};
}

}  // namespace

double parse_synthetic_spec(std::string_view spec) {
    constexpr std::string_view prefix = "powerlaw:";
    if (!spec.starts_with(prefix)) throw ConfigError(fmt::format("unknown synthetic spec '{}'", spec));
    const std::string num(spec.substr(prefix.size()));
    try {
        std::size_t used = 0;
        const double e = std::stod(num, &used);
        if (used != num.size() || !std::isfinite(e)) throw std::invalid_argument("trailing");
        return e;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("bad exponent in synthetic spec '{}'", spec));
    }
}

int cmd_single(const ExperimentConfig& cfg, const fs::path& out, std::ostream& report) {
    cfg.validate();
    const auto w = cfg.density();
    const int d = cfg.dim;
    const auto sample =
        sample_periodic_field(cfg.covariance, cfg.length, cells_for(cfg.length, cfg.spacing), cfg.seed, cfg.index);
    const auto lam = Laminate::from_sample(sample);
    const auto sol = solve_corrector(w, lam, cfg.F, cfg.solver);
    const auto q = assemble(w, lam, sol, 2, cfg.solver);
    const auto meta = metadata(cfg, "single");

    {
        CsvWriter csv(out / "quantities.csv", schema("quantities"), meta);
        csv.row({"W", "", "", "", "", csv_number(q.W)});
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                csv.row({"DW", std::to_string(i + 1), std::to_string(j + 1), "", "", csv_number(q.DW(i, j))});
        for (int a = 0; a < d * d; ++a)
            for (int b = 0; b < d * d; ++b)
                csv.row({"D2W", std::to_string(a / d + 1), std::to_string(a % d + 1), std::to_string(b / d + 1),
                         std::to_string(b % d + 1), csv_number(q.D2W(a, b))});
        csv.close();
    }
    {
        CsvWriter csv(out / "corrector.csv", schema("corrector"), meta);
        const double h = sample.spacing();
        for (std::size_t i = 0; i < lam.size(); ++i)
            for (int c = 0; c < d; ++c)
                csv.row({std::to_string(i), csv_number(static_cast<double>(i) * h), csv_number(lam.omega[i]),
                         std::to_string(c + 1), csv_number(sol.p[i](c))});
        csv.close();
    }
    const auto checks = sample_checks(w, lam, cfg.F, sol, q, cfg.solver, "single");
    write_checks(out / "checks.csv", checks, meta);

    report << fmt::format("L = {}, index {}, {} cells: W_hom,L = {:.12e}, {} outer iterations\n", cfg.length,
                          cfg.index, lam.size(), q.W, sol.stats.outer_iterations);
    report_checks(report, checks);
    for (const auto& c : checks)
        if (c.failed()) return kExitInvariant;
    return kExitOk;
}

int cmd_rates(const ExperimentConfig& cfg, const fs::path& out, std::optional<double> synthetic_exponent,
              std::ostream& report) {
    cfg.validate();
    if (cfg.lengths.size() < 4) throw ConfigError("rates needs at least four lengths in run.lengths");
    auto meta = metadata(cfg, "rates");
    EnsembleRun run;
    if (synthetic_exponent) {
        meta.extra.emplace_back("synthetic", fmt::format("powerlaw:{}", *synthetic_exponent));
        run = synthetic_power_law(cfg.lengths, cfg.samples, *synthetic_exponent, cfg.dim, cfg.seed);
        run.order = cfg.order;
    } else {
        run = run_ensemble(cfg.ensemble());
    }
    const bool interrupted = run.interrupted;
    run = usable_levels(std::move(run));
    if (interrupted) meta.extra.emplace_back("interrupted", "true");

    CsvWriter fcsv(out / "fluctuations.csv", schema("fluctuations"), meta);
    CsvWriter scsv(out / "systematic.csv", schema("systematic"), meta);
    CsvWriter rcsv(out / "rates.csv", schema("rates"), meta);
    const auto w = cfg.density();
    for (int order = 0; order <= cfg.order && !run.levels.empty(); ++order) {
        std::vector<double> xs, ys;
        for (const auto& r : fluctuation_estimate(run, order)) {
            fcsv.row({std::to_string(order), csv_number(r.L), std::to_string(r.samples), csv_number(r.sd),
                      csv_number(r.ci.lo), csv_number(r.ci.hi)});
            xs.push_back(r.L);
            ys.push_back(r.sd);
        }
        const auto ffit = try_fit(xs, ys, cfg.seed);
        rcsv.row(rate_row(order, "fluctuation", ffit));

        SystematicResult sys;
        std::string label;
        if (synthetic_exponent) {
            HomogenizedQuantities zero;
            zero.dim = cfg.dim;
            zero.order = 2;
            zero.DW = Mat::Zero(cfg.dim, cfg.dim);
            zero.D2W = Mat9::Zero(cfg.dim * cfg.dim, cfg.dim * cfg.dim);
            sys = systematic_estimate(run, order, ReferenceStrategy::MarginalQuadrature, observation(zero, order));
            label = "synthetic_limit";
        } else {
            std::optional<Eigen::VectorXd> limit;
            if (cfg.reference == ReferenceStrategy::MarginalQuadrature && run.levels.size() >= 1)
                limit = observation(marginal_limit(w, cfg.covariance.variance, cfg.F, order, 256, cfg.solver), order);
            if (run.levels.size() >= 2 || limit) sys = systematic_estimate(run, order, cfg.reference, limit);
            label = std::string(to_string(cfg.reference));
        }
        xs.clear();
        ys.clear();
        for (const auto& r : sys.rows) {
            scsv.row({std::to_string(order), csv_number(r.L), label, csv_number(r.bias), csv_number(r.se),
                      r.underpowered ? "1" : "0"});
            xs.push_back(r.L);
            ys.push_back(r.bias);
        }
        const auto sfit = try_fit(xs, ys, cfg.seed);
        rcsv.row(rate_row(order, "systematic", sfit));

        auto show = [](const FitOutcome& o) {
            return o.fit ? fmt::format("{:+.4f} +- {:.4f}", o.fit->slope, o.fit->ci_half_width) : o.status;
        };
        report << fmt::format("order {}: fluctuation slope {}, systematic slope {}{}\n", order, show(ffit),
                              show(sfit), sys.any_underpowered() ? " (underpowered)" : "");
    }
    fcsv.close();
    scsv.close();
    rcsv.close();
    if (run.failures > 0) report << fmt::format("{} failed samples were left out\n", run.failures);
    if (interrupted) {
        report << "interrupted: partial results written\n";
        return kExitInterrupted;
    }
    return kExitOk;
}

int cmd_mc(const ExperimentConfig& cfg, const fs::path& out, std::ostream& report) {
    cfg.validate();
    const auto schedule = balanced_schedule(cfg.lengths, cfg.schedule_scale);
    EnsembleRun merged;
    merged.F = cfg.F;
    merged.order = 0;
    merged.seed = cfg.seed;
    std::vector<ScheduleEntry> done;
    for (const auto& e : schedule) {
        auto ec = cfg.ensemble();
        ec.lengths = {e.L};
        ec.samples = cfg.batches * e.N;
        ec.order = 0;
        auto r = run_ensemble(ec);
        merged.failures += r.failures;
        merged.interrupted = merged.interrupted || r.interrupted;
        std::size_t ok = 0;
        for (const auto& s : r.levels.front().samples) ok += s.ok ? 1 : 0;
        if (ok >= static_cast<std::size_t>(2 * e.N)) {
            merged.levels.push_back(std::move(r.levels.front()));
            done.push_back(e);
        }
        if (r.interrupted) break;
    }
    const double reference = marginal_limit(cfg.density(), cfg.covariance.variance, cfg.F, 0, 256, cfg.solver).W;
    auto meta = metadata(cfg, "mc");
    meta.extra.emplace_back("reference", "marginal_quadrature");
    if (merged.interrupted) meta.extra.emplace_back("interrupted", "true");

    CsvWriter csv(out / "mc.csv", schema("mc"), meta);
    CsvWriter sum(out / "mc_summary.csv", schema("mc_summary"), meta);
    sum.row({"reference", csv_number(reference)});
    if (!done.empty()) {
        const auto table = mc_total_error(merged, done, reference);
        for (const auto& r : table.rows) {
            csv.row({csv_number(r.L), std::to_string(r.N), std::to_string(r.batches), csv_number(r.rmse),
                     csv_number(r.ci.lo), csv_number(r.ci.hi), csv_number(r.bias), csv_number(r.random),
                     csv_number(r.envelope), csv_number(r.ratio)});
            report << fmt::format("L = {:>6} N = {:>4}: rmse {:.4e}, envelope {:.4e}, ratio {:.3f}\n", r.L, r.N,
                                  r.rmse, r.envelope, r.ratio);
        }
        sum.row({"c1", csv_number(table.c1)});
        sum.row({"c2", csv_number(table.c2)});
        sum.row({"monotone", table.monotone() ? "1" : "0"});
        sum.row({"max_ratio_spread", csv_number(table.max_ratio_spread())});
        report << fmt::format("c1 = {:.4e}, c2 = {:.4e}, monotone = {}, max ratio spread = {:.3f}\n", table.c1,
                              table.c2, table.monotone(), table.max_ratio_spread());
    }
    csv.close();
    sum.close();
    if (merged.interrupted) {
        report << "interrupted: partial results written\n";
        return kExitInterrupted;
    }
    return kExitOk;
}

int cmd_dump_field(const ExperimentConfig& cfg, const fs::path& out, std::ostream& report) {
    cfg.validate();
    const auto s =
        sample_periodic_field(cfg.covariance, cfg.length, cells_for(cfg.length, cfg.spacing), cfg.seed, cfg.index);
    CsvWriter csv(out / "field.csv", schema("field"), metadata(cfg, "dump-field"));
    for (std::size_t i = 0; i < s.size(); ++i)
        csv.row({csv_number(static_cast<double>(i) * s.spacing()), csv_number(s.values[i])});
    csv.close();
    report << fmt::format("{} cells on [0, {}) written\n", s.size(), cfg.length);
    return kExitOk;
}

namespace {

ExperimentConfig builtin_config(int d) {
    ExperimentConfig c;
    c.dim = d;
    c.lengths = {16, 32, 64, 128};
    c.length = 8;
    c.samples = 8;
    c.batches = 2;
    c.seed = 20261015;
    Mat s = Mat::Zero(d, d);
    s(0, 1) = s(1, 0) = 1.0;
    if (d == 3) s(1, 2) = s(2, 1) = 1.0;
    c.F = (d == 2 ? rotation2(0.3) : rotation3(Eigen::Vector3d(0, 0, 1), 0.3)) *
          (Mat::Identity(d, d) + 0.05 * s / s.norm());
    return c;
}

std::vector<Check> energy_suite(int d) {
    const std::string suite = fmt::format("energy_d{}", d);
    const EnergyDensity w(Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, d);
    const double omega = 0.3;
    Mat f = Mat::Identity(d, d);
    f(0, 1) = 0.06;
    f(d - 1, 0) = -0.04;
    f(1, 1) = 1.03;
    const auto basis = matrix_basis(d);
    const double h = 1e-6;
    Eigen::MatrixXd s_fd(d, d), t_fd(d * d, d * d);
    for (int a = 0; a < d * d; ++a) {
        const Mat& e = basis[static_cast<std::size_t>(a)];
        s_fd(a / d, a % d) = (w.evaluate(omega, f + h * e) - w.evaluate(omega, f - h * e)) / (2 * h);
        t_fd.col(a) = flatten((w.stress(omega, f + h * e) - w.stress(omega, f - h * e)) / (2 * h));
    }
    const Mat g = basis[1] + 0.5 * basis[static_cast<std::size_t>(d)];
    const Mat k = basis[0] - basis[static_cast<std::size_t>(d * d - 1)];
    const Mat third = w.third_apply(omega, f, g, k);
    const Mat third_fd = (w.tangent_apply(omega, f + h * g, k) - w.tangent_apply(omega, f - h * g, k)) / (2 * h);
    const Mat id = Mat::Identity(d, d);
    return {
        {suite, "fd_stress", rel_err(s_fd, Eigen::MatrixXd(w.stress(omega, f))), 1e-7},
        {suite, "fd_tangent", rel_err(t_fd, Eigen::MatrixXd(w.tangent(omega, f))), 1e-7},
        {suite, "fd_third", rel_err(third_fd, third), 1e-6},
        {suite, "natural_state", std::abs(w.evaluate(omega, id)) + w.stress(omega, id).norm(), 1e-15},
        {suite, "frame_indifference", std::abs(w.evaluate(omega, frame_rotation(d) * f) - w.evaluate(omega, f)),
         1e-14},
    };
}

std::vector<Check> fields_suite() {
    const std::string suite = "fields";
    CovarianceSpec c;
    const auto pc = periodize_covariance(c, 8.0, 64);
    double min_spec = 0.0;
    for (double v : pc.spectrum) min_spec = std::min(min_spec, v);
    const auto a = sample_periodic_field(c, 8.0, 64, 11, 3);
    const auto b = sample_periodic_field(c, 8.0, 64, 11, 3);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
    CovarianceSpec z = c;
    z.variance = 0.0;
    double zmax = 0.0;
    for (double v : sample_periodic_field(z, 8.0, 64, 11, 3).values) zmax = std::max(zmax, std::abs(v));
    return {
        {suite, "spectrum_nonnegative", min_spec, -kSpectrumTolerance, Check::AtLeast},
        {suite, "sample_reproducible", diff, 0.0},
        {suite, "zero_variance", zmax, 0.0},
    };
}

std::vector<Check> cell_suite(int d, const SolverOptions& opts) {
    const std::string suite = fmt::format("cell_d{}", d);
    const auto cfg = builtin_config(d);
    const auto w = cfg.density();
    const auto sample = sample_periodic_field(cfg.covariance, cfg.length, cells_for(cfg.length, cfg.spacing),
                                              cfg.seed, 0);
    const auto lam = Laminate::from_sample(sample);
    const auto sol = solve_corrector(w, lam, cfg.F, opts);
    const auto q = assemble(w, lam, sol, 2, opts);
    auto checks = sample_checks(w, lam, cfg.F, sol, q, opts, suite);

    const auto q3 = assemble(w, lam, sol, 3, opts);
    const auto alt = third_derivative_via_second_correctors(w, lam, sol, opts);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < alt.size(); ++i) {
        diff = std::max(diff, std::abs(alt[i] - q3.D3W[i]));
        scale = std::max(scale, std::abs(alt[i]));
    }
    checks.push_back({suite, "d3_routes", diff / std::max(scale, 1e-300), 1e-10});

    const auto homog = Laminate::uniform(std::vector<double>(16, 0.4));
    const auto hsol = solve_corrector(w, homog, cfg.F, opts);
    const auto hq = assemble(w, homog, hsol, 0, opts);
    checks.push_back({suite, "homogeneous_laminate",
                      std::abs(hq.W - w.evaluate(0.4, cfg.F)) + hsol.max_abs_p(), 1e-14});

    Mat g = Mat::Zero(d, d);
    g(0, d - 1) = 1.0;
    g(d - 1, 0) = 0.5;
    g(0, 0) = 0.3;
    g /= g.norm();
    const auto rows = quadratic_expansion_check(w, lam, g, {0.1, 0.01}, opts);
    checks.push_back({suite, "quadratic_expansion", rows[0].ratio / rows[1].ratio, 5.0, Check::AtLeast});
    return checks;
}

std::vector<Check> oracle_suite(const SolverOptions& opts) {
    const std::string suite = "oracle";
    const auto r = oracle::cross_check(50, 20261015, opts);
    return {
        {suite, "oracle_energy", r.max_energy_diff, 1e-8},
        {suite, "oracle_p", r.max_p_diff, 1e-7},
        {suite, "oracle_linearized", r.max_linearized_diff, 1e-7},
        {suite, "oracle_stationarity", r.max_stationarity, 1e-9},
    };
}

std::vector<Check> stats_suite() {
    const std::string suite = "stats";
    const std::vector<double> xs{16, 32, 64, 128, 256};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(3.0 * std::pow(x, -0.5));
    const auto fit = fit_rate(xs, ys, 200, 1);
    const auto run = synthetic_power_law(xs, 16, -0.5, 2, 5);
    std::vector<double> sds;
    for (const auto& r : fluctuation_estimate(run, 0, 200)) sds.push_back(r.sd);
    const auto sfit = fit_rate(xs, sds, 200, 1);
    const auto [nodes, weights] = gauss_hermite(64);
    double m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        m2 += weights[i] * nodes[i] * nodes[i];
        m4 += weights[i] * std::pow(nodes[i], 4);
    }
    return {
        {suite, "fit_exact_power_law", std::abs(fit.slope + 0.5), 1e-12},
        {suite, "synthetic_fluctuation_slope", std::abs(sfit.slope + 0.5), 1e-12},
        {suite, "gauss_hermite_moments", std::abs(m2 - 1.0) + std::abs(m4 - 3.0), 1e-12},
    };
}

// Column headers as released; a change here is a schema version bump.
const std::map<std::string, std::string> kGoldenHeaders = {
    {"quantities.csv", "quantity,i,j,k,l,value"},
    {"corrector.csv", "cell,x,omega,component,p"},
    {"checks.csv", "check,value,tolerance,status"},
    {"fluctuations.csv", "order,L,samples,sd,ci_lo,ci_hi"},
    {"systematic.csv", "order,L,reference,bias,se,underpowered"},
    {"rates.csv", "order,kind,slope,intercept,ci_half_width,r_squared,points,status"},
    {"mc.csv", "L,N,batches,rmse,ci_lo,ci_hi,bias,random,envelope,ratio"},
    {"mc_summary.csv", "quantity,value"},
    {"field.csv", "x,omega"},
};

std::vector<Check> golden_suite() {
    const fs::path dir = fs::temp_directory_path() / fmt::format("laminhom-validate-{}", ::getpid());
    fs::remove_all(dir);
    auto cfg = builtin_config(2);
    cfg.length = 16;
    cfg.lengths = {16, 32, 48, 64};
    std::ostringstream sink;
    cmd_single(cfg, dir, sink);
    cmd_rates(cfg, dir, -0.5, sink);
    cfg.lengths = {16, 32};
    cmd_mc(cfg, dir, sink);
    cmd_dump_field(cfg, dir, sink);
    std::vector<Check> out;
    for (const auto& [file, golden] : kGoldenHeaders)
        out.push_back({"golden", "header_" + file.substr(0, file.find('.')),
                       read_header_line(dir / file) == golden ? 0.0 : 1.0, 0.0});
    fs::remove_all(dir);
    return out;
}

}  // namespace

int cmd_validate(const SolverOptions& solver, const std::optional<fs::path>& out, std::ostream& report,
                 std::ostream& err) {
    std::vector<Check> checks;
    auto run_suite = [&](const std::string& name, const std::function<std::vector<Check>()>& suite) {
        try {
            for (auto& c : suite()) checks.push_back(std::move(c));
        } catch (const Error& e) {
            checks.push_back({name, fmt::format("solve ({}: {})", e.kind(), e.what()), kNaN, 0.0});
        }
    };
    run_suite("oracle", [&] { return oracle_suite(solver); });
    for (int d : {2, 3}) {
        run_suite(fmt::format("energy_d{}", d), [d] { return energy_suite(d); });
        run_suite(fmt::format("cell_d{}", d), [&, d] { return cell_suite(d, solver); });
    }
    run_suite("fields", fields_suite);
    run_suite("stats", stats_suite);
    run_suite("golden", golden_suite);

    report_checks(report, checks);
    if (out) {
        ExperimentConfig cfg = builtin_config(2);
        cfg.solver = solver;
        CsvWriter csv(*out / "validate.csv", schema("validate"), metadata(cfg, "validate"));
        for (const auto& c : checks)
            csv.row({c.suite, c.name, csv_number(c.value), csv_number(c.tolerance), c.status()});
        csv.close();
    }
    int failed = 0;
    for (const auto& c : checks) {
        if (!c.failed()) continue;
        ++failed;
        err << fmt::format("error: kind=InvariantFailure invariant={} suite={} value={} tolerance={}\n", c.name,
                           c.suite, csv_number(c.value), csv_number(c.tolerance));
    }
    report << fmt::format("{} checks, {} failed\n", checks.size(), failed);
    return failed ? kExitInvariant : kExitOk;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
    auto line = [&err](std::string_view kind, int code, std::string_view msg) {
        std::string q;
        for (char c : msg) {
            if (c == '"' || c == '\\') q += '\\';
            q += c == '\n' ? ' ' : c;
        }
        err << fmt::format("error: kind={} exit={} message=\"{}\"\n", kind, code, q);
        return code;
    };
    try {
        return body();
    } catch (const ConfigError& e) {
        return line(e.kind(), kExitConfig, e.what());
    } catch (const PeriodizationError& e) {
        return line(e.kind(), kExitConfig, e.what());
    } catch (const Error& e) {
        return line(e.kind(), kExitSolver, e.what());
    } catch (const std::invalid_argument& e) {
        return line("InvalidArgument", kExitConfig, e.what());
    } catch (const std::exception& e) {
        return line("InternalError", kExitSolver, e.what());
    }
}

}  // namespace laminhom
