#include "qpburst/rates.hpp"

#include <cmath>
#include <limits>

#include "qpburst/errors.hpp"

namespace qpburst {

namespace {
// 90% CL Poisson upper limit on the mean for zero observed events: -ln(0.10)
constexpr double kZeroCountUpperLimit = 2.302585092994046;
}  // namespace

RateResult event_rate(std::uint64_t n_selected, double live_time_s) {
    if (live_time_s <= 0.0) throw DomainError("event_rate: live time must be positive");
    RateResult r;
    r.n_selected = n_selected;
    r.live_time_s = live_time_s;
    if (n_selected == 0) {
        r.rate = 0.0;
        r.error = kZeroCountUpperLimit / live_time_s;
        r.is_upper_limit = true;
    } else {
        const double n = static_cast<double>(n_selected);
        r.rate = n / live_time_s;
        r.error = std::sqrt(n) / live_time_s;
    }
    return r;
}

FitResult weighted_linear_fit(const std::vector<FitPoint>& points, bool fix_intercept_zero) {
    const std::size_t min_points = fix_intercept_zero ? 1 : 2;
    if (points.size() < min_points)
        throw ConfigError("weighted_linear_fit: too few points for the requested model");

    double s = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& pt : points) {
        if (pt.sigma_y <= 0.0)
            throw DomainError("weighted_linear_fit: sigma_y must be positive");
        const double w = 1.0 / (pt.sigma_y * pt.sigma_y);
        s += w;
        sx += w * pt.x;
        sy += w * pt.y;
        sxx += w * pt.x * pt.x;
        sxy += w * pt.x * pt.y;
    }

    FitResult fit;
    fit.intercept_fixed = fix_intercept_zero;
    if (fix_intercept_zero) {
        if (sxx <= 0.0)
            throw DegeneracyError("weighted_linear_fit: all abscissae zero");
        fit.p1 = sxy / sxx;
        fit.p1_err = std::sqrt(1.0 / sxx);
        fit.dof = static_cast<int>(points.size()) - 1;
    } else {
        const double delta = s * sxx - sx * sx;
        if (delta <= 1e-12 * s * sxx)
            throw DegeneracyError("weighted_linear_fit: singular design (all x equal)");
        fit.p1 = (s * sxy - sx * sy) / delta;
        fit.p0 = (sxx * sy - sx * sxy) / delta;
        fit.p1_err = std::sqrt(s / delta);
        fit.p0_err = std::sqrt(sxx / delta);
        fit.dof = static_cast<int>(points.size()) - 2;
    }
    for (const auto& pt : points) {
        const double res = (pt.y - fit.eval(pt.x)) / pt.sigma_y;
        fit.chi2 += res * res;
    }
    return fit;
}

RateWithError sampling_period_correction(RateWithError in, double t_from_us, double t_to_us,
                                         const FitResult& model) {
    const double denom = model.eval(t_from_us);
    if (denom <= 0.0)
        throw DomainError("sampling_period_correction: model is non-positive at T_from");
    const double factor = model.eval(t_to_us) / denom;
    return {in.rate * factor, in.error * factor};
}

double effective_t1_from_counts(std::uint64_t n_excited, std::uint64_t n_total,
                                double wait_us) {
    if (wait_us <= 0.0) throw DomainError("effective_t1: wait must be positive");
    if (n_total == 0 || n_excited == 0 || n_excited >= n_total)
        throw DomainError("effective_t1: N_e must satisfy 0 < N_e < N_tot");
    const double frac = static_cast<double>(n_excited) / static_cast<double>(n_total);
    return -wait_us / std::log(frac);
}

double effective_t1(const BinaryTrace& binary, double wait_us) {
    std::uint64_t excited = 0;
    for (const auto b : binary.bits) excited += (b != 0);
    return effective_t1_from_counts(excited, binary.size(), wait_us);
}

double impact_probability(double rate_per_s, double dt_s) {
    if (rate_per_s < 0.0) throw DomainError("impact_probability: rate must be >= 0");
    if (dt_s < 0.0) throw DomainError("impact_probability: duration must be >= 0");
    return -std::expm1(-rate_per_s * dt_s);
}

double available_time(double rate_per_s, double p_max) {
    if (rate_per_s < 0.0) throw DomainError("available_time: rate must be >= 0");
    if (p_max <= 0.0 || p_max >= 1.0)
        throw DomainError("available_time: p_max must lie in (0, 1)");
    if (rate_per_s == 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-p_max) / rate_per_s;
}

}  // namespace qpburst
