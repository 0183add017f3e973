// hdiv: weak-identification-robust testing with many instruments.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hdiv/io.hpp"

namespace {

struct Options {
    std::string data_path;
    std::string config_path;
    bool table1_defaults = false;
    double beta0 = 0.0;
    double alpha = 0.05;
    std::string alternative = "greater";
    std::string format = "json";
    std::string output;
    std::uint64_t seed = 0;
    long reps = 0;
    std::optional<int> threads;
    double lo = 0.0, hi = 0.0;
    int steps = 0;
    bool null_normality = false;
    long n = 400, k = 100;
    double shift = 0.0;
};

void emit(const Options& opt, const std::string& text) {
    if (opt.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(opt.output, std::ios::binary);
    if (!out)
        throw hdiv::Error(hdiv::Errc::missing_input, "cannot write '" + opt.output + "'");
    out << text;
}

int cmd_test(const Options& opt) {
    const hdiv::Dataset data = hdiv::read_dataset_csv(opt.data_path);
    const hdiv::Hypothesis hyp{opt.beta0, hdiv::parse_alternative(opt.alternative), opt.alpha};
    const auto fmt = hdiv::parse_output_format(opt.format);
    const auto outcome = hdiv::q_statistic(data, hyp);
    emit(opt, hdiv::format_outcome(outcome, hyp, fmt));
    return 0;
}

int cmd_invert(const Options& opt) {
    const hdiv::Dataset data = hdiv::read_dataset_csv(opt.data_path);
    const auto alt = hdiv::parse_alternative(opt.alternative);
    const auto fmt = hdiv::parse_output_format(opt.format);
    const hdiv::BetaGrid grid{opt.lo, opt.hi, opt.steps};
    const auto intervals = hdiv::invert_ci(data, opt.alpha, grid, alt);
    emit(opt, hdiv::format_intervals(intervals, grid, opt.alpha, alt, fmt));
    return 0;
}

int cmd_simulate(const Options& opt) {
    if (opt.table1_defaults == !opt.config_path.empty())
        throw hdiv::Error(hdiv::Errc::validation,
                          "simulate: give exactly one of --config or --table1-defaults");
    const auto fmt = hdiv::parse_output_format(opt.format);
    const hdiv::SimulationConfig cfg = opt.table1_defaults
                                           ? hdiv::SimulationConfig{}
                                           : hdiv::read_simulation_config(opt.config_path);
    const auto table = hdiv::run_grid(cfg.cells(), opt.reps, opt.seed, cfg.hypothesis(),
                                      opt.threads);
    emit(opt, hdiv::format_table(table, fmt));
    return 0;
}

int cmd_diagnose(const Options& opt) {
    if (!opt.null_normality)
        throw hdiv::Error(hdiv::Errc::validation, "diagnose: choose a diagnostic (--null-normality)");
    const hdiv::NormalityConfig cfg{opt.n, opt.k, opt.reps, opt.shift};
    const auto res = hdiv::null_normality_diagnostic(cfg, opt.seed, opt.threads);
    nlohmann::json doc{{"schema_version", hdiv::kSchemaVersion},
                       {"diagnostic", "null-normality"},
                       {"n", opt.n},
                       {"k", opt.k},
                       {"reps", opt.reps},
                       {"seed", opt.seed},
                       {"shift", opt.shift},
                       {"ks_statistic", res.ks_statistic},
                       {"p_value", res.p_value}};
    emit(opt, doc.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hdiv - robust IV testing with high-dimensional instruments"};
    app.require_subcommand(1);
    Options opt;

    auto* test = app.add_subcommand("test", "Run the feasible test on a CSV dataset");
    test->add_option("--data", opt.data_path, "CSV with header y,x,z1,...,zK")->required();
    test->add_option("--beta0", opt.beta0, "Null value of beta")->required();
    test->add_option("--alpha", opt.alpha, "Significance level")->capture_default_str();
    test->add_option("--alt", opt.alternative, "greater | two-sided")->capture_default_str();
    test->add_option("--format", opt.format, "json | csv | markdown")->capture_default_str();
    test->add_option("-o,--output", opt.output, "Write to file instead of stdout");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection-rate table");
    sim->add_option("--config", opt.config_path, "JSON grid configuration");
    sim->add_flag("--table1-defaults", opt.table1_defaults, "Use the default 180-cell grid");
    sim->add_option("--reps", opt.reps, "Replications per cell")->required()
        ->check(CLI::PositiveNumber);
    sim->add_option("--seed", opt.seed, "Base seed")->required();
    sim->add_option("--threads", opt.threads, "Worker threads (default: HDIV_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
    sim->add_option("--format", opt.format, "json | csv | markdown")->capture_default_str();
    sim->add_option("-o,--output", opt.output, "Write to file instead of stdout");

    auto* inv = app.add_subcommand("invert", "Confidence set for beta by test inversion");
    inv->add_option("--data", opt.data_path, "CSV with header y,x,z1,...,zK")->required();
    inv->add_option("--lo", opt.lo, "Grid lower end")->required();
    inv->add_option("--hi", opt.hi, "Grid upper end")->required();
    inv->add_option("--steps", opt.steps, "Number of grid points")->required();
    inv->add_option("--alpha", opt.alpha, "Significance level")->capture_default_str();
    inv->add_option("--alt", opt.alternative, "greater | two-sided")->capture_default_str();
    inv->add_option("--format", opt.format, "json | csv | markdown")->capture_default_str();
    inv->add_option("-o,--output", opt.output, "Write to file instead of stdout");

    auto* diag = app.add_subcommand("diagnose", "Simulation diagnostics");
    diag->add_flag("--null-normality", opt.null_normality,
                   "KS distance of null statistics to N(0,1)");
    diag->add_option("--n", opt.n, "Observations")->capture_default_str();
    diag->add_option("--k", opt.k, "Instruments")->capture_default_str();
    diag->add_option("--reps", opt.reps, "Replications")->required();
    diag->add_option("--seed", opt.seed, "Base seed")->required();
    diag->add_option("--shift", opt.shift, "Add a constant to every statistic");
    diag->add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
    diag->add_option("-o,--output", opt.output, "Write to file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return hdiv::exit_code(hdiv::Errc::validation);
    }

    try {
        if (*test)
            return cmd_test(opt);
        if (*sim)
            return cmd_simulate(opt);
        if (*inv)
            return cmd_invert(opt);
        return cmd_diagnose(opt);
    } catch (const hdiv::Error& e) {
        std::cerr << "hdiv: error [" << hdiv::errc_name(e.code()) << "]: " << e.what() << '\n';
        return hdiv::exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "hdiv: error [internal]: " << e.what() << '\n';
        return 1;
    }
}
