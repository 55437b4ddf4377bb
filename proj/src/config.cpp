#include "laminhom/config.hpp"

#include "laminhom/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace laminhom {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>, std::less<>> kSchema = {
    {"material", {"family", "lambda", "mu", "modulation", "dim", "domain_radius"}},
    {"covariance", {"kind", "variance", "correlation_length"}},
    {"discretization", {"spacing"}},
    {"deformation", {"F", "rotation", "axis", "strain", "magnitude"}},
    {"run",
     {"lengths", "samples", "seed", "order", "workers", "reference", "length", "index", "schedule_scale",
      "batches", "tol_inner", "tol_outer", "max_outer", "max_inner", "delta_bar", "neighborhood",
      "lipschitz_c", "condition_limit"}},
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

template <class T>
T number(const std::string& key, const std::string& text) {
    T v{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, text));
    return v;
}

std::vector<double> numbers(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& w : words(text)) out.push_back(number<double>(key, w));
    return out;
}

// Accessor over one section that remembers what was read.
class Section {
public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    std::optional<std::string> raw(const std::string& key) const {
        if (!tree_) return std::nullopt;
        const auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
        if (!v) return std::nullopt;
        return trim(*v);
    }
    std::string full(const std::string& key) const { return name_ + "." + key; }

    template <class T>
    void get(const std::string& key, T& out) const {
        if (auto v = raw(key)) out = number<T>(full(key), *v);
    }
    void get(const std::string& key, std::vector<double>& out) const {
        if (auto v = raw(key)) out = numbers(full(key), *v);
    }

private:
    std::string name_;
    const pt::ptree* tree_;
};

Mat matrix_from(const std::string& key, const std::vector<double>& v, int d) {
    if (static_cast<int>(v.size()) != d * d)
        throw ConfigError(fmt::format("{}: expected {} entries, got {}", key, d * d, v.size()));
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(i * d + j)];
    return m;
}

std::string fmt_double(double x) { return fmt::format("{:.17g}", x); }

std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt_double(v[i]);
    return s;
}

}  // namespace

EnergyDensity ExperimentConfig::density() const {
    return EnergyDensity(family, lambda0, mu0, modulation, dim, domain_radius);
}

EnsembleConfig ExperimentConfig::ensemble() const {
    EnsembleConfig e{density(), covariance, spacing, F, lengths, samples, order, seed, 0, solver, workers};
    return e;
}

std::string ExperimentConfig::canonical() const {
    std::vector<double> f;
    for (int i = 0; i < F.rows(); ++i)
        for (int j = 0; j < F.cols(); ++j) f.push_back(F(i, j));
    std::string s;
    auto line = [&s](std::string_view k, const std::string& v) { s += fmt::format("{} = {}\n", k, v); };
    line("material.family", std::string(to_string(family)));
    line("material.lambda", fmt_double(lambda0));
    line("material.mu", fmt_double(mu0));
    line("material.modulation", fmt_double(modulation));
    line("material.dim", std::to_string(dim));
    line("material.domain_radius", fmt_double(domain_radius));
    line("covariance.kind", std::string(to_string(covariance.kind)));
    line("covariance.variance", fmt_double(covariance.variance));
    line("covariance.correlation_length", fmt_double(covariance.correlation_length));
    line("discretization.spacing", fmt_double(spacing));
    line("deformation.F", fmt_list(f));
    line("run.lengths", fmt_list(lengths));
    line("run.samples", std::to_string(samples));
    line("run.seed", std::to_string(seed));
    line("run.order", std::to_string(order));
    line("run.reference", std::string(to_string(reference)));
    line("run.length", fmt_double(length));
    line("run.index", std::to_string(index));
    line("run.schedule_scale", fmt_double(schedule_scale));
    line("run.batches", std::to_string(batches));
    line("run.tol_inner", fmt_double(solver.tol_inner));
    line("run.tol_outer", fmt_double(solver.tol_outer));
    line("run.max_outer", std::to_string(solver.max_outer));
    line("run.max_inner", std::to_string(solver.max_inner));
    line("run.delta_bar", fmt_double(solver.delta_bar));
    line("run.neighborhood", fmt_double(solver.neighborhood));
    line("run.lipschitz_c", fmt_double(solver.lipschitz_c));
    line("run.condition_limit", fmt_double(solver.condition_limit));
    return s;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(dim == 2 || dim == 3, "material.dim must be 2 or 3");
    require(lambda0 > 0 && mu0 > 0, "material.lambda and material.mu must be positive");
    require(modulation >= 0 && modulation < 1, "material.modulation must be in [0, 1)");
    require(domain_radius > 0, "material.domain_radius must be positive");
    require(covariance.variance >= 0, "covariance.variance must be nonnegative");
    require(covariance.correlation_length > 0, "covariance.correlation_length must be positive");
    require(spacing > 0, "discretization.spacing must be positive");
    require(spacing <= 0.5 * covariance.correlation_length + 1e-12,
            "discretization.spacing must be at most correlation_length / 2");
    require(!lengths.empty(), "run.lengths is empty");
    require(samples >= 1, "run.samples must be positive");
    require(order >= 0 && order <= 2, "run.order must be 0, 1 or 2");
    require(workers >= 1, "run.workers must be positive");
    require(batches >= 2, "run.batches must be at least 2");
    require(schedule_scale > 0, "run.schedule_scale must be positive");
    require(solver.tol_inner > 0 && solver.tol_outer > 0, "solver tolerances must be positive");
    require(solver.max_outer >= 0 && solver.max_inner >= 1, "solver iteration budgets must be positive");
    require(solver.delta_bar > 0 && solver.neighborhood > 0 && solver.lipschitz_c > 0 &&
                solver.condition_limit > 0,
            "solver neighborhood parameters must be positive");

    auto check_length = [&](double L, const std::string& key) {
        require(L >= 4.0 * covariance.correlation_length,
                fmt::format("{} = {} is below 4 correlation lengths", key, L));
        const double cells = L / spacing;
        require(std::abs(cells - std::round(cells)) <= 1e-9 * cells && std::round(cells) >= 2,
                fmt::format("{} = {} is not a multiple of the spacing {}", key, L, spacing));
    };
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        check_length(lengths[i], "run.lengths");
        if (i > 0) require(lengths[i] > lengths[i - 1], "run.lengths must be strictly increasing");
    }
    check_length(length, "run.length");

    require(F.rows() == dim && F.cols() == dim, "deformation.F has the wrong size");
    require(F.allFinite(), "deformation.F is not finite");
    const double dist = dist_to_rotations(F);
    require(F.determinant() > 0 && dist < solver.delta_bar,
            fmt::format("dist(F, SO(d)) = {} is not below run.delta_bar = {}", dist, solver.delta_bar));
    try {
        (void)density();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("material: ") + e.what());
    }
}

ExperimentConfig parse_config(std::string_view text) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(text)};
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.message() + " at line " + std::to_string(e.line()));
    }

    for (const auto& [name, sub] : tree) {
        const auto it = kSchema.find(name);
        if (it == kSchema.end() || !sub.data().empty())
            throw ConfigError(fmt::format("unknown section or key outside a section: '{}'", name));
        for (const auto& [key, value] : sub)
            if (!it->second.contains(key)) throw ConfigError(fmt::format("unknown key '{}.{}'", name, key));
    }
    auto section = [&tree](const std::string& name) {
        const auto child = tree.get_child_optional(name);
        return Section(name, child ? &*child : nullptr);
    };

    ExperimentConfig c;
    try {
        const Section mat = section("material");
        if (auto v = mat.raw("family")) c.family = parse_family(*v);
        mat.get("lambda", c.lambda0);
        mat.get("mu", c.mu0);
        mat.get("modulation", c.modulation);
        mat.get("dim", c.dim);
        mat.get("domain_radius", c.domain_radius);

        const Section cov = section("covariance");
        if (auto v = cov.raw("kind")) c.covariance.kind = parse_covariance_kind(*v);
        cov.get("variance", c.covariance.variance);
        cov.get("correlation_length", c.covariance.correlation_length);

        c.spacing = std::min(1.0, c.covariance.correlation_length) / 8.0;
        section("discretization").get("spacing", c.spacing);

        const Section run = section("run");
        run.get("lengths", c.lengths);
        run.get("samples", c.samples);
        run.get("seed", c.seed);
        run.get("order", c.order);
        run.get("workers", c.workers);
        if (auto v = run.raw("reference")) c.reference = parse_reference_strategy(*v);
        c.length = c.lengths.empty() ? c.length : c.lengths.front();
        run.get("length", c.length);
        run.get("index", c.index);
        run.get("schedule_scale", c.schedule_scale);
        run.get("batches", c.batches);
        run.get("tol_inner", c.solver.tol_inner);
        run.get("tol_outer", c.solver.tol_outer);
        run.get("max_outer", c.solver.max_outer);
        run.get("max_inner", c.solver.max_inner);
        run.get("delta_bar", c.solver.delta_bar);
        run.get("neighborhood", c.solver.neighborhood);
        run.get("lipschitz_c", c.solver.lipschitz_c);
        run.get("condition_limit", c.solver.condition_limit);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (c.dim != 2 && c.dim != 3) throw ConfigError("material.dim must be 2 or 3");

    const Section def = section("deformation");
    const int d = c.dim;
    const auto explicit_f = def.raw("F");
    const bool shorthand = def.raw("rotation") || def.raw("axis") || def.raw("strain") || def.raw("magnitude");
    if (explicit_f && shorthand)
        throw ConfigError("deformation: give either F or the rotation/strain/magnitude shorthand, not both");
    if (explicit_f) {
        c.F = matrix_from(def.full("F"), numbers(def.full("F"), *explicit_f), d);
    } else {
        double angle = 0.0, magnitude = 0.0;
        std::vector<double> axis{0.0, 0.0, 1.0};
        def.get("rotation", angle);
        def.get("magnitude", magnitude);
        def.get("axis", axis);
        Mat s = Mat::Zero(d, d);
        if (auto v = def.raw("strain")) s = matrix_from(def.full("strain"), numbers(def.full("strain"), *v), d);
        Mat r;
        if (d == 2) {
            r = rotation2(angle);
        } else {
            if (axis.size() != 3) throw ConfigError("deformation.axis needs 3 entries");
            const Eigen::Vector3d ax(axis[0], axis[1], axis[2]);
            if (!(ax.norm() > 0)) throw ConfigError("deformation.axis must be nonzero");
            r = rotation3(ax.normalized(), angle);
        }
        Mat u = Mat::Identity(d, d);
        if (magnitude != 0.0) {
            if (!(s.norm() > 0)) throw ConfigError("deformation.strain must be nonzero when magnitude is set");
            u += magnitude * s / s.norm();
        }
        c.F = r * u;
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.workers = *o.workers;
}

}  // namespace laminhom
