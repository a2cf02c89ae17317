#include "qpburst/budget.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "qpburst/errors.hpp"

namespace qpburst {

const char* to_string(SourceType t) {
    switch (t) {
        case SourceType::flux: return "flux";
        case SourceType::activity: return "activity";
        case SourceType::fixed: return "fixed";
        case SourceType::limit: return "limit";
    }
    return "unknown";
}

SourceType source_type_from_string(const std::string& s) {
    if (s == "flux") return SourceType::flux;
    if (s == "activity") return SourceType::activity;
    if (s == "fixed") return SourceType::fixed;
    if (s == "limit") return SourceType::limit;
    throw ConfigError("budget: unknown source type '" + s + "'");
}

SourceRate scale_source_rate(const SourceEntry& entry) {
    SourceRate out;
    out.name = entry.name;
    out.type = entry.type;
    if (entry.type == SourceType::limit) {
        out.is_limit = true;
        out.limit = entry.coefficient;
        return out;
    }
    if (!entry.has_driver || !std::isfinite(entry.driver))
        throw ConfigError("budget: source '" + entry.name + "' has no driver value");
    if (entry.coefficient < 0.0 || entry.driver < 0.0)
        throw ConfigError("budget: source '" + entry.name + "' has negative inputs");

    out.rate = entry.coefficient * entry.driver;
    // relative errors in quadrature, written in absolute form so zero-valued
    // factors stay well defined
    const double a = entry.coefficient_err * entry.driver;
    const double b = entry.driver_err * entry.coefficient;
    out.error = std::sqrt(a * a + b * b);
    return out;
}

BudgetTotal total_budget(const std::vector<SourceRate>& rates, ErrorCombination combine) {
    BudgetTotal total;
    double quad = 0.0;
    for (const auto& r : rates) {
        if (r.is_limit) continue;  // limits carry no central value
        total.rate += r.rate;
        total.error += r.error;
        quad += r.error * r.error;
    }
    if (combine == ErrorCombination::quadrature) total.error = std::sqrt(quad);
    return total;
}

std::vector<SourceEntry> load_sources(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("budget: cannot open source file '" + path + "'");

    std::vector<SourceEntry> entries;
    std::string line;
    std::uint64_t offset = 0;
    while (std::getline(in, line)) {
        const std::uint64_t line_offset = offset;
        offset += line.size() + 1;

        const auto hash = line.find('#');
        std::string body = hash == std::string::npos ? line : line.substr(0, hash);
        std::istringstream fields(body);
        std::string name, type_token;
        if (!(fields >> name)) continue;  // blank or comment-only line
        if (!(fields >> type_token))
            throw FormatError("budget: missing source type for '" + name + "'", line_offset);

        SourceEntry e;
        e.name = name;
        try {
            e.type = source_type_from_string(type_token);
        } catch (const ConfigError& err) {
            throw FormatError(err.what(), line_offset);
        }

        if (e.type == SourceType::limit) {
            if (!(fields >> e.coefficient))
                throw FormatError("budget: limit entry '" + name + "' needs a value",
                                  line_offset);
            e.has_driver = false;
        } else {
            if (!(fields >> e.coefficient >> e.coefficient_err >> e.driver >> e.driver_err))
                throw FormatError(
                    "budget: entry '" + name +
                        "' needs coefficient, coefficient_err, driver, driver_err",
                    line_offset);
        }
        std::string extra;
        if (fields >> extra)
            throw FormatError("budget: trailing fields on entry '" + name + "'", line_offset);
        entries.push_back(std::move(e));
    }
    return entries;
}

FitResult fit_activity_coefficient(const std::vector<FitPoint>& points) {
    return weighted_linear_fit(points, /*fix_intercept_zero=*/true);
}

}  // namespace qpburst
