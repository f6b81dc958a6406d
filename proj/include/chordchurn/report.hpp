#pragma once

#include "chordchurn/analytics.hpp"
#include "chordchurn/experiment.hpp"
#include "chordchurn/simulator.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace chordchurn {

// Writes to a sibling temp file and renames it into place, so readers never
// see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

inline constexpr const char* kRowsHeader = "r,alpha,n0,bits,metric,k,theory,sim_mean,sim_stderr,rel_error";

std::string rows_csv(const std::vector<ComparisonRow>& rows);
nlohmann::json rows_json(const std::vector<ComparisonRow>& rows);
nlohmann::json report_json(const SweepResult& sweep, const Report& report);

nlohmann::json theory_json(const TheoryPoint& tp);
// metric,k,value
std::string theory_csv(const TheoryPoint& tp);

std::string samples_csv(const std::vector<MetricsSample>& samples);
nlohmann::json run_summary_json(const SimConfig& cfg, const RunResult& run);

// Plot data under dir: "<metric>_a<alpha>.dat" with columns r, theory,
// sim_mean, sim_stderr, and "f_r<r>_a<alpha>.dat" over k. Returns the paths.
std::vector<std::filesystem::path> write_plot_data(const std::filesystem::path& dir,
                                                   const std::vector<ComparisonRow>& rows);

} // namespace chordchurn
