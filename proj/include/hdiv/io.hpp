#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hdiv/montecarlo.hpp"
#include "hdiv/statistic.hpp"

namespace hdiv {

inline constexpr int kSchemaVersion = 1;

enum class OutputFormat { json, csv, markdown };
OutputFormat parse_output_format(std::string_view text);

// Dataset CSV: header `y,x,z1,...,zK`, one observation per row.
Dataset parse_dataset_csv(std::istream& in);
/// Errc::missing_input when the file cannot be opened.
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// Grid experiment description; mirrors the JSON config file.
struct SimulationConfig {
    Eigen::Index n = 400;
    std::vector<double> ratios{0.25, 0.5, 1.0, 2.0, 3.0};
    std::vector<double> rhos{0.5, 0.9, -0.9};
    std::vector<double> hs{0.0, 1.0, 2.0, 5.0};
    std::vector<ErrorProcessSpec> processes{NetworkSpec{}, SpatialSpec{}, MultiplicativeSpec{}};
    double beta0 = 2.0;
    double alpha = 0.05;
    Alternative alternative = Alternative::greater;
    InstrumentDesign design;

    std::vector<SimCell> cells() const;
    Hypothesis hypothesis() const { return {beta0, alternative, alpha}; }
};

/// Unknown keys and ill-typed values raise Errc::validation with the key path.
SimulationConfig parse_simulation_config(const nlohmann::json& doc);
SimulationConfig read_simulation_config(const std::filesystem::path& path);

nlohmann::json to_json(const TestOutcome& outcome, const Hypothesis& hyp);
nlohmann::json to_json(const RejectionTable& table);

std::string format_outcome(const TestOutcome& outcome, const Hypothesis& hyp, OutputFormat fmt);
std::string format_table(const RejectionTable& table, OutputFormat fmt);
std::string format_intervals(const std::vector<Interval>& intervals, const BetaGrid& grid,
                             double alpha, Alternative alternative, OutputFormat fmt);

/// 17 significant digits; round-trips through strtod.
std::string format_double(double v);

}  // namespace hdiv
