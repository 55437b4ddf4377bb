#include "laminhom/commands.hpp"
#include "laminhom/csv.hpp"
#include "laminhom/errors.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>

namespace {

void on_sigint(int) {
    laminhom::interrupt_flag().store(true);
    std::signal(SIGINT, SIG_DFL);  // a second Ctrl-C kills the process
}

}  // namespace

int main(int argc, char** argv) {
    using namespace laminhom;

    CLI::App app{"RVE approximation of homogenized energy, stress and tangent moduli of random laminates"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::string synthetic;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;

    auto common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", config_path, "experiment config file")->check(CLI::ExistingFile);
        if (config_required) opt->required();
        sub->add_option("--seed", seed, "override run.seed");
        sub->add_option("--workers", workers, "worker threads (default: $LAMINHOM_WORKERS, then run.workers)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    };
    auto* single = app.add_subcommand("single", "solve one sample; write quantities, corrector and checks");
    auto* rates = app.add_subcommand("rates", "ensemble fluctuation and systematic error rates");
    auto* mc = app.add_subcommand("mc", "total error along the balanced (N, L) schedule");
    auto* validate = app.add_subcommand("validate", "oracle cross-checks and property suites");
    auto* dump = app.add_subcommand("dump-field", "write one field sample as x, omega");
    common(single, true);
    common(rates, true);
    common(mc, true);
    common(validate, false);
    common(dump, true);
    rates->add_option("--synthetic", synthetic, "replace solves by exact data, e.g. powerlaw:-0.5");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: kind=UsageError exit=3 message=\"" << e.what() << "\"\n";
        return kExitConfig;
    }

    if (!workers) {
        if (const char* env = std::getenv("LAMINHOM_WORKERS")) {
            const int w = std::atoi(env);
            if (w >= 1) workers = w;
        }
    }
    std::signal(SIGINT, on_sigint);

    return guarded(
        [&]() -> int {
            if (validate->parsed()) {
                SolverOptions solver;
                if (!config_path.empty()) solver = load_config(config_path).solver;
                std::optional<std::filesystem::path> out;
                if (validate->count("--out")) out = out_dir;
                return cmd_validate(solver, out, std::cout, std::cerr);
            }
            ExperimentConfig cfg = load_config(config_path);
            apply_overrides(cfg, {seed, workers});
            if (single->parsed()) return cmd_single(cfg, out_dir, std::cout);
            if (rates->parsed()) {
                std::optional<double> e;
                if (!synthetic.empty()) e = parse_synthetic_spec(synthetic);
                return cmd_rates(cfg, out_dir, e, std::cout);
            }
            if (mc->parsed()) return cmd_mc(cfg, out_dir, std::cout);
            return cmd_dump_field(cfg, out_dir, std::cout);
        },
        std::cerr);
}
