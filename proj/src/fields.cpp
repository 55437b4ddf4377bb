#include "laminhom/fields.hpp"

#include "laminhom/errors.hpp"
#include "laminhom/random.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace laminhom {

std::string_view to_string(CovarianceKind k) {
    switch (k) {
        case CovarianceKind::Triangle: return "triangle";
        case CovarianceKind::TruncatedCosineBump: return "cosine_bump";
    }
    return "unknown";
}

CovarianceKind parse_covariance_kind(std::string_view name) {
    if (name == "triangle" || name == "Triangle") return CovarianceKind::Triangle;
    if (name == "cosine_bump" || name == "TruncatedCosineBump")
        return CovarianceKind::TruncatedCosineBump;
    throw std::invalid_argument("unknown covariance kind '" + std::string(name) + "'");
}

double CovarianceSpec::operator()(double s) const {
    const double r = std::abs(s) / support_radius();
    if (r >= 1.0) return 0.0;
    switch (kind) {
        case CovarianceKind::Triangle: return variance * (1.0 - r);
        case CovarianceKind::TruncatedCosineBump: {
            const double pr = std::numbers::pi * r;
            return variance * ((1.0 - r) * std::cos(pr) + std::sin(pr) / std::numbers::pi);
        }
    }
    return 0.0;
}

namespace {

// In-place forward complex DFT with the sign convention exp(-2 pi i j k / n).
// FFTW planning is not thread-safe, so plans are created once per size
// under a lock; execution with the new-array interface is.
class ForwardDft {
public:
    static void execute(std::vector<std::complex<double>>& data) {
        fftw_plan plan = instance().plan_for(data.size());
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(plan, p, p);
    }

private:
    static ForwardDft& instance() {
        static ForwardDft dft;
        return dft;
    }

    fftw_plan plan_for(std::size_t n) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;
        std::vector<std::complex<double>> scratch(n);
        auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_FORWARD,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(n, plan);
        return plan;
    }

    ~ForwardDft() {
        for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<std::size_t, fftw_plan> plans_;
};

// Circulant covariance of period n * h without the L >= 4 l requirement;
// used directly by the restriction sampler.
PeriodizedCovariance circulant(const CovarianceSpec& c, double spacing, std::size_t n) {
    PeriodizedCovariance out;
    out.entries.resize(n);
    const double period = spacing * static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        double x = spacing * static_cast<double>(j);
        // {x}_L in [-L/2, L/2)
        if (x >= 0.5 * period) x -= period;
        out.entries[j] = c(x);
    }
    std::vector<std::complex<double>> buf(out.entries.begin(), out.entries.end());
    ForwardDft::execute(buf);
    out.spectrum.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double v = buf[k].real();
        if (v < -kSpectrumTolerance * c.variance)
            throw SpectrumError("periodized covariance has negative spectral value " +
                                std::to_string(v) + " at mode " + std::to_string(k));
        out.spectrum[k] = v;
    }
    return out;
}

std::vector<double> synthesize(const PeriodizedCovariance& cov, std::uint64_t seed,
                               std::uint32_t stream, std::uint64_t index) {
    const std::size_t n = cov.spectrum.size();
    CounterRng rng(seed, stream, index);
    std::vector<std::complex<double>> buf(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double amp = std::sqrt(std::max(cov.spectrum[k], 0.0) / static_cast<double>(n));
        const double re = rng.normal();
        const double im = rng.normal();
        buf[k] = {amp * re, amp * im};
    }
    ForwardDft::execute(buf);
    std::vector<double> values(n);
    for (std::size_t j = 0; j < n; ++j) values[j] = buf[j].real();
    return values;
}

constexpr std::uint32_t kRestrictionStreamTag = 0x80000000u;

}  // namespace

PeriodizedCovariance periodize_covariance(const CovarianceSpec& c, double period, std::size_t n) {
    if (!(c.variance >= 0.0) || !(c.correlation_length > 0.0))
        throw std::invalid_argument("covariance needs variance >= 0 and correlation length > 0");
    if (n == 0) throw PeriodizationError("grid must have at least one point");
    if (period < 4.0 * c.correlation_length)
        throw PeriodizationError("period " + std::to_string(period) +
                                 " is below 4x the correlation length");
    const double h = period / static_cast<double>(n);
    if (h > 0.5 * c.correlation_length * (1.0 + 1e-12))
        throw PeriodizationError("grid spacing exceeds half the correlation length");
    return circulant(c, h, n);
}

MaterialSample sample_periodic_field(const CovarianceSpec& c, double period, std::size_t n,
                                     std::uint64_t seed, std::uint64_t index) {
    const auto cov = periodize_covariance(c, period, n);
    MaterialSample s;
    s.period = period;
    s.seed = seed;
    s.index = index;
    s.values = synthesize(cov, seed, static_cast<std::uint32_t>(n) & ~kRestrictionStreamTag, index);
    return s;
}

std::vector<double> sample_unperiodized_restriction(const CovarianceSpec& c, double window,
                                                    std::size_t n, std::uint64_t seed,
                                                    std::uint64_t index) {
    if (!(window > 0.0) || n == 0) throw std::invalid_argument("empty window");
    if (!(c.variance >= 0.0) || !(c.correlation_length > 0.0))
        throw std::invalid_argument("covariance needs variance >= 0 and correlation length > 0");
    const double h = window / static_cast<double>(n);
    // With period P >= window + l/2 and P >= l every separation inside the
    // window sees either the true covariance or two zeros.
    const auto pad = static_cast<std::size_t>(std::ceil(c.support_radius() / h - 1e-9));
    const auto min_total = static_cast<std::size_t>(std::ceil(c.correlation_length / h - 1e-9)) + 1;
    const std::size_t total = std::max(n + pad, min_total);
    const auto cov = circulant(c, h, total);
    auto values = synthesize(cov, seed, static_cast<std::uint32_t>(n) | kRestrictionStreamTag, index);
    values.resize(n);
    return values;
}

std::vector<double> lattice_covariance(const CovarianceSpec& c, double spacing, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t j = 0; j < count; ++j) out[j] = c(spacing * static_cast<double>(j));
    return out;
}

}  // namespace laminhom
