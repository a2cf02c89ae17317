#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpburst/trace.hpp"

namespace qpburst {

// Poisson rate estimate. For n = 0 the error field carries the 90% CL upper
// limit on the rate and is_upper_limit is set.
struct RateResult {
    double rate = 0.0;
    double error = 0.0;
    bool is_upper_limit = false;
    std::uint64_t n_selected = 0;
    double live_time_s = 0.0;
};

RateResult event_rate(std::uint64_t n_selected, double live_time_s);

struct FitPoint {
    double x = 0.0;
    double y = 0.0;
    double sigma_y = 1.0;
};

struct FitResult {
    double p0 = 0.0, p0_err = 0.0;  // intercept
    double p1 = 0.0, p1_err = 0.0;  // slope
    double chi2 = 0.0;
    int dof = 0;
    bool intercept_fixed = false;

    double eval(double x) const { return p0 + p1 * x; }
};

// Closed-form weighted least squares for y = p0 + p1*x (or p1*x with the
// intercept pinned at zero); parameter errors from the normal-equation
// covariance.
FitResult weighted_linear_fit(const std::vector<FitPoint>& points, bool fix_intercept_zero);

struct RateWithError {
    double rate = 0.0;
    double error = 0.0;
};

// Rescales a rate measured at sampling period t_from to t_to using a fitted
// rate-vs-T_S model; the relative error is unchanged.
RateWithError sampling_period_correction(RateWithError in, double t_from_us, double t_to_us,
                                         const FitResult& model);

// T1' = -wait / ln(N_e / N_tot) from excited-outcome counting.
double effective_t1_from_counts(std::uint64_t n_excited, std::uint64_t n_total, double wait_us);
double effective_t1(const BinaryTrace& binary, double wait_us);

// P(at least one impact in dt) = 1 - exp(-r*dt), and its inverse giving the
// longest computation with impact probability below p_max (infinite for r=0).
double impact_probability(double rate_per_s, double dt_s);
double available_time(double rate_per_s, double p_max);

// One analysis row as emitted in results CSVs.
struct RunResult {
    std::string label;
    double ts_us = 0.0;
    double p_g = 0.0;
    double live_time_s = 0.0;
    RateResult rate;
};

}  // namespace qpburst
