#pragma once

// CSV import/export. Numbers are written with 17 significant digits so every
// double survives a write/read cycle unchanged.

#include <string>
#include <vector>

#include "dce/exposure.hpp"
#include "dce/models.hpp"
#include "dce/moments.hpp"

namespace dce {

/// Columns t, EE, PFE, alive_count.
void write_profile_csv(const std::string& path, const ExposureProfile& profile);
/// Reads back times, ee, pfe and alive_counts; DataError on malformed input.
ExposureProfile read_profile_csv(const std::string& path);

/// Two whitespace-separated columns t and value, '#' header line.
void write_plot_dat(const std::string& path, const std::string& quantity, const std::vector<double>& t,
                    const std::vector<double>& value);

/// Header lines model_tag, domain, dt, N followed by one row per start node.
void write_moment_matrix_csv(const std::string& path, const MomentMatrix& m);
MomentMatrix read_moment_matrix_csv(const std::string& path);

/// Header lines seed, measure, grid followed by one row of values per path.
void write_ensemble_csv(const std::string& path, const PathEnsemble& ensemble);
PathEnsemble read_ensemble_csv(const std::string& path);

/// %.17g formatting.
std::string format_double(double v);

}  // namespace dce
