#pragma once

#include <string>
#include <vector>

#include "qpburst/rates.hpp"

namespace qpburst {

// How a source's chip-impact rate is obtained: a transport-simulation
// coefficient scaled by a measured flux or activity, a fixed rate, or a pure
// upper limit (no central value).
enum class SourceType { flux, activity, fixed, limit };

const char* to_string(SourceType t);
SourceType source_type_from_string(const std::string& s);

struct SourceEntry {
    std::string name;
    SourceType type = SourceType::fixed;
    double coefficient = 0.0;  // events/s per driver unit; limit value for limits
    double coefficient_err = 0.0;
    double driver = 1.0;  // flux (per cm^2/s) or activity (kBq); 1 for fixed rates
    double driver_err = 0.0;
    bool has_driver = true;
};

struct SourceRate {
    std::string name;
    SourceType type = SourceType::fixed;
    double rate = 0.0;
    double error = 0.0;
    double limit = 0.0;  // upper limit value when is_limit
    bool is_limit = false;
};

// rate = coefficient x driver, relative errors combined in quadrature.
// Limit entries pass through with a zero central value.
SourceRate scale_source_rate(const SourceEntry& entry);

enum class ErrorCombination { linear, quadrature };

struct BudgetTotal {
    double rate = 0.0;
    double error = 0.0;
};

// Sums central values; limit entries contribute nothing. Linear error
// combination is the default, quadrature optional.
BudgetTotal total_budget(const std::vector<SourceRate>& rates,
                         ErrorCombination combine = ErrorCombination::linear);

// Source-definition text format: one entry per line,
//   name type coefficient coefficient_err driver driver_err
// with '#' comments; limit lines are "name limit value". Malformed lines
// raise FormatError carrying the byte offset of the offending line.
std::vector<SourceEntry> load_sources(const std::string& path);

// Through-origin weighted fit of rate-vs-activity calibration points,
// giving a coefficient in events/s per kBq.
FitResult fit_activity_coefficient(const std::vector<FitPoint>& points);

}  // namespace qpburst
