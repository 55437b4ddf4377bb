#pragma once

#include "laminhom/cell.hpp"
#include "laminhom/energy.hpp"
#include "laminhom/fields.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace laminhom {

struct EnsembleConfig {
    EnergyDensity density{Family::SaintVenantKirchhoff, 1.0, 1.0, 0.5, 2};
    CovarianceSpec covariance;
    double spacing = 0.125;     ///< grid spacing h; every L must be a multiple of it
    Mat F;
    std::vector<double> lengths;
    int samples = 0;            ///< N per L
    int order = 0;              ///< derivatives of W_hom,L to form, 0..2
    std::uint64_t seed = 0;
    std::uint64_t first_index = 0;  ///< sample indices first_index .. first_index + N - 1
    SolverOptions solver;
    int workers = 1;
};

struct SampleResult {
    std::uint64_t index = 0;
    bool ok = false;
    std::string error;
    HomogenizedQuantities q;
};

struct LevelRun {
    double L = 0.0;
    std::size_t cells = 0;
    std::vector<SampleResult> samples;  ///< ordered by index
};

struct EnsembleRun {
    Mat F;
    int order = 0;
    std::uint64_t seed = 0;
    std::vector<LevelRun> levels;  ///< in the order of EnsembleConfig::lengths
    int failures = 0;
    bool interrupted = false;
    double seconds = 0.0;

    const LevelRun& level(double L) const;
};

/// Set from a signal handler to stop claiming new samples; run_ensemble then
/// returns what it has with interrupted = true.
std::atomic<bool>& interrupt_flag();

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

/// Solves N samples per L on a pool of worker threads. Sample (L, index) is
/// drawn from (seed, index) on the grid of L / h cells, so results do not
/// depend on the worker count. Failed solves are recorded; EnsembleError if
/// 1% or more of the samples fail.
EnsembleRun run_ensemble(const EnsembleConfig& cfg, const ProgressCallback& progress = {});

/// Per-sample observation of order 0..2: W, DW or D^2W flattened.
Eigen::VectorXd observation(const HomogenizedQuantities& q, int order);
std::vector<Eigen::VectorXd> observations(const LevelRun& level, int order);

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct FluctuationRow {
    double L = 0.0;
    int samples = 0;
    double sd = 0.0;  ///< sqrt(sum_k |X_k - mean|^2 / (N - 1)), Frobenius norm for tensors
    ConfidenceInterval ci;  ///< 95% percentile bootstrap
};

inline constexpr int kBootstrapResamples = 1000;

std::vector<FluctuationRow> fluctuation_estimate(const EnsembleRun& run, int order,
                                                 int resamples = kBootstrapResamples);

enum class ReferenceStrategy {
    LargestLMean,        ///< mean at the largest L, which is then left out of the rows
    Extrapolated,        ///< Richardson from the two largest L assuming a 1/L bias
    MarginalQuadrature,  ///< exact infinite-volume limit of a laminate (see marginal_limit)
};

std::string_view to_string(ReferenceStrategy s);
ReferenceStrategy parse_reference_strategy(std::string_view name);

struct SystematicRow {
    double L = 0.0;
    double bias = 0.0;  ///< |mean_L - reference|
    double se = 0.0;    ///< MC standard error of that difference
    bool underpowered = false;  ///< bias < 3 se
};

struct SystematicResult {
    ReferenceStrategy strategy = ReferenceStrategy::LargestLMean;
    Eigen::VectorXd reference;
    double reference_se = 0.0;
    std::vector<SystematicRow> rows;
    bool any_underpowered() const;
};

/// `limit` is required for MarginalQuadrature and ignored otherwise.
SystematicResult systematic_estimate(const EnsembleRun& run, int order, ReferenceStrategy strategy,
                                     const std::optional<Eigen::VectorXd>& limit = std::nullopt);

/// Nodes and weights of the Gauss-Hermite rule for the standard normal law
/// (Golub-Welsch); the weights sum to one.
std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int nodes);

/// W_hom,L depends on the sample only through the empirical law of the layer
/// values, and for a stationary ergodic field that law tends to the one-point
/// marginal N(0, variance). The infinite-volume limit is therefore the
/// laminate with Gauss-Hermite nodes as layers and weights as fractions.
HomogenizedQuantities marginal_limit(const EnergyDensity& w, double variance, const Mat& f, int order,
                                     int nodes = 256, const SolverOptions& opts = {});

struct RateFit {
    std::vector<double> x, y;
    double slope = 0.0;
    double intercept = 0.0;
    double ci_half_width = 0.0;  ///< 95% residual bootstrap
    std::vector<double> residuals;
    double r_squared = 0.0;
};

/// OLS of log y on log x. DegenerateFitError for fewer than four distinct x
/// or any y <= 0.
RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& ys,
                 int resamples = kBootstrapResamples, std::uint64_t seed = 0);

struct ScheduleEntry {
    double L = 0.0;
    int N = 1;
};

/// N = max(1, round(scale L / ln^2 L)), the balance between the two terms of
/// the error envelope.
std::vector<ScheduleEntry> balanced_schedule(const std::vector<double>& lengths, double scale);

struct TotalErrorRow {
    double L = 0.0;
    int N = 1;
    int batches = 0;
    double rmse = 0.0;       ///< sqrt(mean over batches of (batch mean - reference)^2)
    ConfidenceInterval ci;   ///< bootstrap over batches
    double bias = 0.0;       ///< mean over batches of (batch mean - reference)
    double random = 0.0;     ///< sqrt(max(rmse^2 - bias^2, 0))
    double envelope = 0.0;   ///< c1 / sqrt(N L) + c2 ln L / L
    double ratio = 0.0;      ///< rmse / envelope
};

struct TotalErrorTable {
    double c1 = 0.0;  ///< fluctuation constant, geometric mean of sd_L sqrt(L)
    double c2 = 0.0;  ///< systematic constant, least squares of mean_L - reference against ln L / L
    std::vector<TotalErrorRow> rows;
    bool monotone() const;
    double max_ratio_spread() const;  ///< max over rows of max(ratio, 1 / ratio)
};

/// Splits the samples at each L into disjoint batches of the scheduled N and
/// measures the L^2 error of the batch means of W_hom,L against `reference`.
TotalErrorTable mc_total_error(const EnsembleRun& run, const std::vector<ScheduleEntry>& schedule,
                               double reference, int resamples = kBootstrapResamples);

/// Stand-in ensemble without solves: at each L the N values of W_hom,L are
/// L^exponent (1 + z_k) with z standardized to sample mean 0 and sample SD 1,
/// so mean and fluctuation are exactly L^exponent. DW = W Id and
/// D^2W = W Id (x) Id follow the same law.
EnsembleRun synthetic_power_law(const std::vector<double>& lengths, int samples, double exponent, int dim,
                                std::uint64_t seed);

/// Fraction of samples whose standardized observation exceeds k in magnitude
/// (k = 3 by default).
double tail_fraction(const LevelRun& level, int order, double k = 3.0);

}  // namespace laminhom
