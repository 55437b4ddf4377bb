#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace laminhom {

enum class CovarianceKind { Triangle, TruncatedCosineBump };

std::string_view to_string(CovarianceKind k);
CovarianceKind parse_covariance_kind(std::string_view name);

/// Spectral values below -kSpectrumTolerance * variance are an error; values
/// in [-tol * variance, 0) are roundoff and clamped to zero.
inline constexpr double kSpectrumTolerance = 1e-10;

/**
 * Stationary covariance with support radius correlation_length / 2.
 *
 * Triangle: variance * (1 - 2|s|/l)_+, the autocorrelation of an indicator
 * of width l/2. TruncatedCosineBump: the Bohman function
 * variance * ((1 - r) cos(pi r) + sin(pi r)/pi), r = 2|s|/l < 1, which is the
 * autocorrelation of a cosine bump. Both are positive semidefinite on R.
 */
struct CovarianceSpec {
    CovarianceKind kind = CovarianceKind::Triangle;
    double variance = 1.0;
    double correlation_length = 1.0;

    double operator()(double s) const;
    double support_radius() const { return 0.5 * correlation_length; }
};

/// A realization on the grid x_i = i h, i = 0..n-1, of an L-periodic field,
/// read as piecewise constant: omega(x) = values[i] on [x_i, x_i + h).
struct MaterialSample {
    std::vector<double> values;
    double period = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t index = 0;

    std::size_t size() const { return values.size(); }
    double spacing() const { return period / static_cast<double>(values.size()); }
};

/// First row of the circulant covariance C({j h}_L) and its DFT.
struct PeriodizedCovariance {
    std::vector<double> entries;
    std::vector<double> spectrum;
};

/// Periodized covariance on n points over [0, L). Requires L >= 4 l and at
/// least two grid points per correlation length (h <= l/2); otherwise
/// PeriodizationError. SpectrumError if the spectrum is indefinite.
PeriodizedCovariance periodize_covariance(const CovarianceSpec& c, double period, std::size_t n);

/// Spectral synthesis of the L-periodic Gaussian field with covariance
/// C_L. Deterministic in (seed, index); n also selects the random stream.
MaterialSample sample_periodic_field(const CovarianceSpec& c, double period, std::size_t n,
                                     std::uint64_t seed, std::uint64_t index);

/// n samples on [0, window) of the non-periodized field, by exact
/// embedding into a period long enough that no pair in the window wraps.
std::vector<double> sample_unperiodized_restriction(const CovarianceSpec& c, double window,
                                                    std::size_t n, std::uint64_t seed,
                                                    std::uint64_t index);

/// C(j h) for j = 0..count-1: the covariance of the non-periodized field.
std::vector<double> lattice_covariance(const CovarianceSpec& c, double spacing, std::size_t count);

}  // namespace laminhom
