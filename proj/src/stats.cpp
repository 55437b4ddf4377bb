#include "laminhom/stats.hpp"

#include "laminhom/errors.hpp"
#include "laminhom/random.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace laminhom {

namespace {

constexpr std::uint32_t kBootstrapStream = 0x424f4f54u;  // "BOOT"
constexpr std::uint32_t kFitStream = 0x46495452u;        // "FITR"

std::size_t cells_for(double L, double h) {
    const double ratio = L / h;
    const auto n = static_cast<std::size_t>(std::llround(ratio));
    if (n == 0 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio)
        throw ConfigError(fmt::format("L = {} is not a multiple of the grid spacing {}", L, h));
    return n;
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Sums are taken relative to the first sample, so identical samples give
// exactly zero spread.
Eigen::VectorXd mean_of(const std::vector<Eigen::VectorXd>& xs) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(xs.front().size());
    for (const auto& x : xs) m += x - xs.front();
    return xs.front() + m / static_cast<double>(xs.size());
}

// sqrt(sum_k |x_k - mean|^2 / (N - 1)) over the selected indices
double frobenius_sd(const std::vector<Eigen::VectorXd>& xs, const std::vector<std::size_t>& idx) {
    const Eigen::VectorXd& shift = xs[idx.front()];
    Eigen::VectorXd m = Eigen::VectorXd::Zero(shift.size());
    for (auto i : idx) m += xs[i] - shift;
    m /= static_cast<double>(idx.size());
    double ss = 0.0;
    for (auto i : idx) ss += (xs[i] - shift - m).squaredNorm();
    return std::sqrt(ss / static_cast<double>(idx.size() - 1));
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

std::size_t draw_index(CounterRng& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

}  // namespace

const LevelRun& EnsembleRun::level(double L) const {
    for (const auto& lv : levels)
        if (std::abs(lv.L - L) <= 1e-9 * L) return lv;
    throw std::out_of_range(fmt::format("no level with L = {}", L));
}

std::atomic<bool>& interrupt_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

EnsembleRun run_ensemble(const EnsembleConfig& cfg, const ProgressCallback& progress) {
    if (cfg.samples < 1) throw ConfigError("N must be at least 1");
    if (cfg.order < 0 || cfg.order > 2) throw ConfigError("derivative order must be 0, 1 or 2");
    if (cfg.lengths.empty()) throw ConfigError("no lengths L given");

    EnsembleRun run;
    run.F = cfg.F;
    run.order = cfg.order;
    run.seed = cfg.seed;
    for (double L : cfg.lengths) {
        LevelRun lv;
        lv.L = L;
        lv.cells = cells_for(L, cfg.spacing);
        periodize_covariance(cfg.covariance, L, lv.cells);  // checks L >= 4 l and the spectrum up front
        lv.samples.resize(static_cast<std::size_t>(cfg.samples));
        run.levels.push_back(std::move(lv));
    }

    const std::size_t per_level = static_cast<std::size_t>(cfg.samples);
    const std::size_t total = per_level * run.levels.size();
    std::vector<char> done(total, 0);
    std::atomic<std::size_t> next{0};
    std::size_t finished = 0;
    std::mutex progress_mutex;
    const auto start = std::chrono::steady_clock::now();

    auto worker = [&] {
        for (;;) {
            if (interrupt_flag().load()) return;
            const std::size_t t = next.fetch_add(1);
            if (t >= total) return;
            LevelRun& lv = run.levels[t / per_level];
            SampleResult& out = lv.samples[t % per_level];
            out.index = cfg.first_index + t % per_level;
            try {
                const auto s = sample_periodic_field(cfg.covariance, lv.L, lv.cells, cfg.seed, out.index);
                out.q = homogenize(cfg.density, Laminate::from_sample(s), cfg.F, cfg.order, cfg.solver);
                out.ok = true;
            } catch (const Error& e) {
                out.ok = false;
                out.error = fmt::format("{}: {}", e.kind(), e.what());
            }
            done[t] = 1;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(++finished, total);
            }
        }
    };
    const int nworkers = std::max(1, cfg.workers);
    if (nworkers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < nworkers; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::size_t attempted = 0;
    for (std::size_t li = 0; li < run.levels.size(); ++li) {
        auto& samples = run.levels[li].samples;
        std::vector<SampleResult> kept;
        for (std::size_t k = 0; k < per_level; ++k) {
            if (!done[li * per_level + k]) {
                run.interrupted = true;
                continue;
            }
            ++attempted;
            if (!samples[k].ok) ++run.failures;
            kept.push_back(std::move(samples[k]));
        }
        samples = std::move(kept);
    }
    if (attempted > 0 && 100 * static_cast<std::size_t>(run.failures) >= attempted) {
        std::string first;
        for (const auto& lv : run.levels)
            for (const auto& s : lv.samples)
                if (!s.ok && first.empty()) first = fmt::format(" (L = {}, index {}: {})", lv.L, s.index, s.error);
        throw EnsembleError(fmt::format("{} of {} samples failed{}", run.failures, attempted, first));
    }
    return run;
}

Eigen::VectorXd observation(const HomogenizedQuantities& q, int order) {
    if (order < 0 || order > 2 || order > q.order)
        throw std::invalid_argument(fmt::format("order {} not available (computed up to {})", order, q.order));
    if (order == 0) return Eigen::VectorXd::Constant(1, q.W);
    if (order == 1) return flatten(q.DW);
    return Eigen::Map<const Eigen::VectorXd>(q.D2W.data(), q.D2W.size());
}

std::vector<Eigen::VectorXd> observations(const LevelRun& level, int order) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& s : level.samples)
        if (s.ok) out.push_back(observation(s.q, order));
    return out;
}

std::vector<FluctuationRow> fluctuation_estimate(const EnsembleRun& run, int order, int resamples) {
    std::vector<FluctuationRow> rows;
    for (std::size_t li = 0; li < run.levels.size(); ++li) {
        const auto xs = observations(run.levels[li], order);
        if (xs.size() < 2) throw std::invalid_argument("fluctuation estimate needs at least two samples per L");
        FluctuationRow row;
        row.L = run.levels[li].L;
        row.samples = static_cast<int>(xs.size());
        row.sd = frobenius_sd(xs, iota_indices(xs.size()));
        CounterRng rng(run.seed, kBootstrapStream ^ static_cast<std::uint32_t>(li),
                       static_cast<std::uint64_t>(order));
        std::vector<double> boot(static_cast<std::size_t>(resamples));
        std::vector<std::size_t> idx(xs.size());
        for (auto& b : boot) {
            for (auto& i : idx) i = draw_index(rng, xs.size());
            b = frobenius_sd(xs, idx);
        }
        row.ci = {percentile(boot, 0.025), percentile(boot, 0.975)};
        rows.push_back(row);
    }
    return rows;
}

std::string_view to_string(ReferenceStrategy s) {
    switch (s) {
        case ReferenceStrategy::LargestLMean: return "largest_L_mean";
        case ReferenceStrategy::Extrapolated: return "extrapolated";
        case ReferenceStrategy::MarginalQuadrature: return "marginal_quadrature";
    }
    return "unknown";
}

ReferenceStrategy parse_reference_strategy(std::string_view name) {
    if (name == "largest_L_mean") return ReferenceStrategy::LargestLMean;
    if (name == "extrapolated") return ReferenceStrategy::Extrapolated;
    if (name == "marginal_quadrature") return ReferenceStrategy::MarginalQuadrature;
    throw std::invalid_argument(fmt::format("unknown reference strategy '{}'", name));
}

bool SystematicResult::any_underpowered() const {
    return std::any_of(rows.begin(), rows.end(), [](const SystematicRow& r) { return r.underpowered; });
}

SystematicResult systematic_estimate(const EnsembleRun& run, int order, ReferenceStrategy strategy,
                                     const std::optional<Eigen::VectorXd>& limit) {
    struct LevelMean {
        double L;
        Eigen::VectorXd mean;
        double se;
    };
    std::vector<LevelMean> means;
    for (const auto& lv : run.levels) {
        const auto xs = observations(lv, order);
        if (xs.size() < 2) throw std::invalid_argument("systematic estimate needs at least two samples per L");
        means.push_back({lv.L, mean_of(xs), frobenius_sd(xs, iota_indices(xs.size())) / std::sqrt(double(xs.size()))});
    }
    std::sort(means.begin(), means.end(), [](const auto& a, const auto& b) { return a.L < b.L; });

    SystematicResult res;
    res.strategy = strategy;
    std::size_t rows_end = means.size();
    switch (strategy) {
        case ReferenceStrategy::LargestLMean:
            if (means.size() < 2) throw std::invalid_argument("largest_L_mean needs at least two lengths");
            res.reference = means.back().mean;
            res.reference_se = means.back().se;
            rows_end = means.size() - 1;
            break;
        case ReferenceStrategy::Extrapolated: {
            if (means.size() < 2) throw std::invalid_argument("extrapolation needs at least two lengths");
            const auto& a = means[means.size() - 2];
            const auto& b = means.back();
            res.reference = (b.L * b.mean - a.L * a.mean) / (b.L - a.L);
            res.reference_se = std::hypot(b.L * b.se, a.L * a.se) / (b.L - a.L);
            break;
        }
        case ReferenceStrategy::MarginalQuadrature:
            if (!limit) throw std::invalid_argument("marginal_quadrature needs the limit quantities");
            res.reference = *limit;
            res.reference_se = 0.0;
            break;
    }
    for (std::size_t i = 0; i < rows_end; ++i) {
        SystematicRow row;
        row.L = means[i].L;
        row.bias = (means[i].mean - res.reference).norm();
        row.se = std::hypot(means[i].se, res.reference_se);
        row.underpowered = row.bias < 3.0 * row.se;
        res.rows.push_back(row);
    }
    return res;
}

std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int nodes) {
    if (nodes < 1) throw std::invalid_argument("need at least one node");
    // Jacobi matrix of the probabilists' Hermite polynomials
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int k = 1; k < nodes; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    std::vector<double> x(static_cast<std::size_t>(nodes)), w(static_cast<std::size_t>(nodes));
    for (int k = 0; k < nodes; ++k) {
        x[static_cast<std::size_t>(k)] = es.eigenvalues()(k);
        w[static_cast<std::size_t>(k)] = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
    }
    return {x, w};
}

HomogenizedQuantities marginal_limit(const EnergyDensity& w, double variance, const Mat& f, int order, int nodes,
                                     const SolverOptions& opts) {
    auto [x, wt] = gauss_hermite(nodes);
    Laminate lam;
    const double s = std::sqrt(variance);
    for (std::size_t k = 0; k < x.size(); ++k) {
        // nodes far in the tails carry weights below roundoff
        if (wt[k] < 1e-300) continue;
        lam.omega.push_back(s * x[k]);
        lam.fraction.push_back(wt[k]);
    }
    const double total = std::accumulate(lam.fraction.begin(), lam.fraction.end(), 0.0);
    for (auto& fr : lam.fraction) fr /= total;
    return homogenize(w, lam, f, order, opts);
}

namespace {

std::pair<double, double> ols(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

}  // namespace

RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& ys, int resamples, std::uint64_t seed) {
    if (xs.size() != ys.size()) throw std::invalid_argument("fit_rate: size mismatch");
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i]))
            throw DegenerateFitError(fmt::format("non-positive value at point {} ({}, {})", i, xs[i], ys[i]));
    std::vector<double> distinct = xs;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 4) throw DegenerateFitError("need at least four distinct abscissae");

    RateFit fit;
    fit.x = xs;
    fit.y = ys;
    std::vector<double> lx(xs.size()), ly(ys.size());
    std::transform(xs.begin(), xs.end(), lx.begin(), [](double v) { return std::log(v); });
    std::transform(ys.begin(), ys.end(), ly.begin(), [](double v) { return std::log(v); });
    std::tie(fit.slope, fit.intercept) = ols(lx, ly);

    double ss_res = 0.0, ss_tot = 0.0;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    std::vector<double> fitted(lx.size());
    for (std::size_t i = 0; i < lx.size(); ++i) {
        fitted[i] = fit.intercept + fit.slope * lx[i];
        fit.residuals.push_back(ly[i] - fitted[i]);
        ss_res += fit.residuals.back() * fit.residuals.back();
        ss_tot += (ly[i] - my) * (ly[i] - my);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

    CounterRng rng(seed, kFitStream, 0);
    std::vector<double> slopes(static_cast<std::size_t>(resamples));
    std::vector<double> yb(lx.size());
    for (auto& s : slopes) {
        for (std::size_t i = 0; i < lx.size(); ++i) yb[i] = fitted[i] + fit.residuals[draw_index(rng, lx.size())];
        s = ols(lx, yb).first;
    }
    fit.ci_half_width = resamples > 0 ? 0.5 * (percentile(slopes, 0.975) - percentile(slopes, 0.025)) : 0.0;
    return fit;
}

std::vector<ScheduleEntry> balanced_schedule(const std::vector<double>& lengths, double scale) {
    std::vector<ScheduleEntry> out;
    for (double L : lengths) {
        const double lg = std::log(L);
        out.push_back({L, std::max(1, static_cast<int>(std::lround(scale * L / (lg * lg))))});
    }
    return out;
}

bool TotalErrorTable::monotone() const {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i].rmse < rows[i - 1].rmse)) return false;
    return !rows.empty();
}

double TotalErrorTable::max_ratio_spread() const {
    double m = 1.0;
    for (const auto& r : rows) m = std::max({m, r.ratio, 1.0 / r.ratio});
    return m;
}

TotalErrorTable mc_total_error(const EnsembleRun& run, const std::vector<ScheduleEntry>& schedule, double reference,
                               int resamples) {
    TotalErrorTable table;
    // Envelope constants from the whole sample pool at each scheduled L: the
    // fluctuation constant from sd_L sqrt(L), the systematic one by least
    // squares of the signed bias against ln L / L.
    double log_c1 = 0.0, num = 0.0, den = 0.0;
    for (const auto& e : schedule) {
        const auto xs = observations(run.level(e.L), 0);
        if (xs.size() < 2) throw std::invalid_argument("mc_total_error needs at least two samples per L");
        log_c1 += std::log(frobenius_sd(xs, iota_indices(xs.size())) * std::sqrt(e.L));
        const double g = std::log(e.L) / e.L;
        num += (mean_of(xs)(0) - reference) * g;
        den += g * g;
    }
    table.c1 = std::exp(log_c1 / static_cast<double>(schedule.size()));
    table.c2 = std::max(0.0, num / den);

    for (std::size_t si = 0; si < schedule.size(); ++si) {
        const auto& e = schedule[si];
        const auto xs = observations(run.level(e.L), 0);
        TotalErrorRow row;
        row.L = e.L;
        row.N = e.N;
        row.batches = static_cast<int>(xs.size()) / e.N;
        if (row.batches < 2) throw std::invalid_argument(fmt::format("fewer than two batches of {} at L = {}", e.N, e.L));
        std::vector<double> err(static_cast<std::size_t>(row.batches));
        for (int b = 0; b < row.batches; ++b) {
            double s = 0.0;
            for (int k = 0; k < e.N; ++k) s += xs[static_cast<std::size_t>(b * e.N + k)](0);
            err[static_cast<std::size_t>(b)] = s / e.N - reference;
        }
        auto rms = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x * x;
            return std::sqrt(s / static_cast<double>(v.size()));
        };
        row.rmse = rms(err);
        row.bias = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
        row.random = std::sqrt(std::max(row.rmse * row.rmse - row.bias * row.bias, 0.0));
        CounterRng rng(run.seed, kBootstrapStream ^ 0x7fu, si);
        std::vector<double> boot(static_cast<std::size_t>(resamples)), pick(err.size());
        for (auto& b : boot) {
            for (auto& p : pick) p = err[draw_index(rng, err.size())];
            b = rms(pick);
        }
        row.ci = {percentile(boot, 0.025), percentile(boot, 0.975)};
        row.envelope = table.c1 / std::sqrt(e.N * e.L) + table.c2 * std::log(e.L) / e.L;
        row.ratio = row.rmse / row.envelope;
        table.rows.push_back(row);
    }
    return table;
}

EnsembleRun synthetic_power_law(const std::vector<double>& lengths, int samples, double exponent, int dim,
                                std::uint64_t seed) {
    if (samples < 2) throw ConfigError("synthetic ensemble needs N >= 2");
    EnsembleRun run;
    run.F = Mat::Identity(dim, dim);
    run.order = 2;
    run.seed = seed;
    const int dd = dim * dim;
    for (std::size_t li = 0; li < lengths.size(); ++li) {
        LevelRun lv;
        lv.L = lengths[li];
        CounterRng rng(seed, 0x53594e54u ^ static_cast<std::uint32_t>(li), 0);  // "SYNT"
        std::vector<double> z(static_cast<std::size_t>(samples));
        for (auto& v : z) v = rng.normal();
        const double m = std::accumulate(z.begin(), z.end(), 0.0) / samples;
        double ss = 0.0;
        for (auto& v : z) {
            v -= m;
            ss += v * v;
        }
        const double sd = std::sqrt(ss / (samples - 1));
        const double scale = std::pow(lv.L, exponent);
        for (int k = 0; k < samples; ++k) {
            SampleResult s;
            s.index = static_cast<std::uint64_t>(k);
            s.ok = true;
            s.q.dim = dim;
            s.q.order = 2;
            s.q.F = run.F;
            s.q.W = scale * (1.0 + z[static_cast<std::size_t>(k)] / sd);
            s.q.DW = s.q.W * Mat::Identity(dim, dim);
            s.q.D2W = s.q.W * Mat9::Identity(dd, dd);
            lv.samples.push_back(std::move(s));
        }
        run.levels.push_back(std::move(lv));
    }
    return run;
}

double tail_fraction(const LevelRun& level, int order, double k) {
    const auto xs = observations(level, order);
    if (xs.size() < 2) return 0.0;
    const double sd = frobenius_sd(xs, iota_indices(xs.size()));
    if (sd == 0.0) return 0.0;
    const Eigen::VectorXd m = mean_of(xs);
    std::size_t beyond = 0;
    for (const auto& x : xs)
        if ((x - m).norm() > k * sd) ++beyond;
    return static_cast<double>(beyond) / static_cast<double>(xs.size());
}

}  // namespace laminhom
