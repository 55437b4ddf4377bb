#pragma once

#include "laminhom/cell.hpp"
#include "laminhom/energy.hpp"
#include "laminhom/fields.hpp"
#include "laminhom/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace laminhom {

/**
 * Experiment description read from an INI-style file.
 *
 *   [material]       family (svk | neohookean), lambda, mu, modulation, dim,
 *                    domain_radius
 *   [covariance]     kind (triangle | cosine_bump), variance, correlation_length
 *   [discretization] spacing (default min(1, correlation_length) / 8)
 *   [deformation]    F = d*d numbers, row-major
 *                    or rotation (angle), axis (3 numbers, d = 3),
 *                    strain (d*d numbers), magnitude:
 *                    F = R(rotation) (I + magnitude S / |S|)
 *   [run]            lengths, samples, seed, order, workers, reference,
 *                    length, index (for single and dump-field),
 *                    schedule_scale, batches (for mc), tol_inner, tol_outer,
 *                    max_outer, max_inner, delta_bar, neighborhood,
 *                    lipschitz_c, condition_limit
 *
 * Lists are whitespace separated. Comments are full lines starting with '#'
 * or ';'. Unknown sections or keys are a ConfigError.
 */
struct ExperimentConfig {
    Family family = Family::SaintVenantKirchhoff;
    double lambda0 = 1.0;
    double mu0 = 1.0;
    double modulation = 0.5;
    int dim = 2;
    double domain_radius = 0.5;

    CovarianceSpec covariance;
    double spacing = 0.125;
    Mat F;

    std::vector<double> lengths{16, 32, 64, 128};
    int samples = 64;
    std::uint64_t seed = 1;
    int order = 2;
    int workers = 1;
    ReferenceStrategy reference = ReferenceStrategy::LargestLMean;
    double length = 16;          ///< single and dump-field
    std::uint64_t index = 0;     ///< single and dump-field
    double schedule_scale = 1.0; ///< mc
    int batches = 50;            ///< mc
    SolverOptions solver;

    EnergyDensity density() const;
    EnsembleConfig ensemble() const;

    /// key = value lines of every effective setting except workers, in a
    /// fixed order; identical runs have identical canonical text.
    std::string canonical() const;
    /// FNV-1a 64 of canonical().
    std::uint64_t hash() const;

    /// Checks the invariants: positive parameters, L >= 4 l, L a multiple of
    /// h, dist(F, SO(d)) < delta_bar. ConfigError otherwise.
    void validate() const;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line overrides, applied before validation.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace laminhom
