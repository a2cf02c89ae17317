#include "qpburst/discrimination.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "qpburst/errors.hpp"

namespace qpburst {

namespace {

constexpr double kSqrt2Pi = 2.506628274631000502415765;

double gauss_norm(double x, double m, double s) {
    const double as = std::max(std::abs(s), 1e-12);
    const double z = (x - m) / as;
    return std::exp(-0.5 * z * z) / (kSqrt2Pi * as);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730951); }

struct Histogram {
    std::vector<double> centers;
    std::vector<double> counts;
    double width = 0.0;
};

// Freedman-Diaconis bin width with interquartile range from partial sorts.
double fd_bin_width(std::vector<double> values) {
    const std::size_t n = values.size();
    const std::size_t i25 = n / 4;
    const std::size_t i75 = (3 * n) / 4;
    std::nth_element(values.begin(), values.begin() + i25, values.end());
    const double q25 = values[i25];
    std::nth_element(values.begin(), values.begin() + i75, values.end());
    const double q75 = values[i75];
    return 2.0 * (q75 - q25) / std::cbrt(static_cast<double>(n));
}

Histogram build_histogram(const std::vector<double>& values, double width) {
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double mn = *mn_it, mx = *mx_it;
    if (!(mx > mn))
        throw DegeneracyError("discrimination: projection has zero spread");
    if (width <= 0.0) width = (mx - mn) / 100.0;

    Histogram h;
    const int nbins = std::clamp(static_cast<int>(std::ceil((mx - mn) / width)), 8, 400);
    h.width = (mx - mn) / nbins;
    h.centers.resize(nbins);
    h.counts.assign(nbins, 0.0);
    for (int b = 0; b < nbins; ++b) h.centers[b] = mn + (b + 0.5) * h.width;
    for (const double v : values) {
        int b = static_cast<int>((v - mn) / h.width);
        b = std::clamp(b, 0, nbins - 1);
        h.counts[b] += 1.0;
    }
    return h;
}

struct LMOutcome {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    int iterations = 0;
};

// Standard Levenberg-Marquardt on normalized residuals r(beta) with analytic
// Jacobian J = d(model)/d(beta) / sigma; minimizes chi2 = |r|^2.
template <typename Model>
LMOutcome levenberg_marquardt(const Model& model, Eigen::VectorXd beta, int max_iterations) {
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    model.eval(beta, r, J);
    double chi2 = r.squaredNorm();

    double lambda = 1e-3;
    int it = 0;
    bool converged = false;
    for (; it < max_iterations && !converged; ++it) {
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;

        bool stepped = false;
        for (int attempt = 0; attempt < 50; ++attempt) {
            Eigen::MatrixXd damped = JtJ;
            for (int d = 0; d < damped.rows(); ++d)
                damped(d, d) += lambda * std::max(JtJ(d, d), 1e-12);
            const Eigen::VectorXd delta = damped.ldlt().solve(g);
            const Eigen::VectorXd trial = beta - delta;

            Eigen::VectorXd r_try;
            Eigen::MatrixXd J_try;
            model.eval(trial, r_try, J_try);
            const double chi2_try = r_try.squaredNorm();
            if (chi2_try <= chi2) {
                const double gain = chi2 - chi2_try;
                beta = trial;
                r = std::move(r_try);
                J = std::move(J_try);
                chi2 = chi2_try;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (gain <= 1e-10 * std::max(chi2, 1.0)) converged = true;
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e14) break;
        }
        if (!stepped) converged = true;  // no downhill direction left
    }
    if (!converged) {
        std::vector<double> res(r.data(), r.data() + r.size());
        throw FitError("fit did not converge after " + std::to_string(max_iterations) +
                           " iterations",
                       std::move(res), chi2, it);
    }

    LMOutcome out;
    out.params = std::move(beta);
    out.chi2 = chi2;
    out.iterations = it;
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    out.covariance = JtJ.completeOrthogonalDecomposition().pseudoInverse();
    return out;
}

// Sum of k Gaussians over the I and Q projection histograms with shared
// amplitudes. Parameter layout per state: [A, mI, sI, mQ, sQ].
struct ProjectionModel {
    const Histogram* hi;
    const Histogram* hq;
    int k;

    void eval(const Eigen::VectorXd& beta, Eigen::VectorXd& r, Eigen::MatrixXd& J) const {
        const int nbi = static_cast<int>(hi->counts.size());
        const int nbq = static_cast<int>(hq->counts.size());
        r.resize(nbi + nbq);
        J.setZero(nbi + nbq, 5 * k);

        auto fill = [&](const Histogram& h, int row0, int m_off, int s_off) {
            const int nb = static_cast<int>(h.counts.size());
            for (int b = 0; b < nb; ++b) {
                const double x = h.centers[b];
                const double sig = std::sqrt(std::max(h.counts[b], 1.0));
                double modeled = 0.0;
                for (int i = 0; i < k; ++i) {
                    const double a = beta[5 * i];
                    const double m = beta[5 * i + m_off];
                    const double s = beta[5 * i + s_off];
                    const double as = std::max(std::abs(s), 1e-12);
                    const double n = gauss_norm(x, m, s) * h.width;
                    const double z = (x - m) / as;
                    modeled += a * n;
                    J(row0 + b, 5 * i) = -n / sig;
                    J(row0 + b, 5 * i + m_off) = -a * n * z / (as * sig);
                    J(row0 + b, 5 * i + s_off) =
                        -a * n * (z * z - 1.0) / (as * sig) * (s < 0.0 ? -1.0 : 1.0);
                }
                r[row0 + b] = (h.counts[b] - modeled) / sig;
            }
        };
        fill(*hi, 0, 1, 2);
        fill(*hq, nbi, 3, 4);
    }
};

// Sum of k Gaussians over a single histogram; layout per state: [A, m, s].
struct Profile1DModel {
    const Histogram* h;
    int k;

    void eval(const Eigen::VectorXd& beta, Eigen::VectorXd& r, Eigen::MatrixXd& J) const {
        const int nb = static_cast<int>(h->counts.size());
        r.resize(nb);
        J.setZero(nb, 3 * k);
        for (int b = 0; b < nb; ++b) {
            const double x = h->centers[b];
            const double sig = std::sqrt(std::max(h->counts[b], 1.0));
            double modeled = 0.0;
            for (int i = 0; i < k; ++i) {
                const double a = beta[3 * i];
                const double m = beta[3 * i + 1];
                const double s = beta[3 * i + 2];
                const double as = std::max(std::abs(s), 1e-12);
                const double n = gauss_norm(x, m, s) * h->width;
                const double z = (x - m) / as;
                modeled += a * n;
                J(b, 3 * i) = -n / sig;
                J(b, 3 * i + 1) = -a * n * z / (as * sig);
                J(b, 3 * i + 2) = -a * n * (z * z - 1.0) / (as * sig) * (s < 0.0 ? -1.0 : 1.0);
            }
            r[b] = (h->counts[b] - modeled) / sig;
        }
    }
};

struct Mode {
    double count = 0.0;
    double i_center = 0.0, q_center = 0.0;
    double i_sigma = 1.0, q_sigma = 1.0;
};

// Seeds the fit by peeling components off a coarse 2D histogram. A minor
// state often has no local maximum of its own: the dominant cluster's tail
// out-counts it everywhere, so the density rises monotonically from the minor
// center toward the major one and plain peak finding cannot see it. Peeling
// sidesteps that: take the highest cell, size that component from its
// half-maximum crossings, subtract a deliberately inflated model of it, and
// search the residual for the next component.
std::vector<Mode> find_modes(const std::vector<double>& iv, const std::vector<double>& qv,
                             int want) {
    constexpr int kGrid = 48;
    constexpr int kWindow = 4;  // moment window half-width, cells
    constexpr double kSqrt2 = 1.4142135623730951;
    constexpr double kHalfMaxToSigma = 1.1774100225154747;  // sqrt(2 ln 2)

    const auto [imn_it, imx_it] = std::minmax_element(iv.begin(), iv.end());
    const auto [qmn_it, qmx_it] = std::minmax_element(qv.begin(), qv.end());
    const double imn = *imn_it, imx = *imx_it, qmn = *qmn_it, qmx = *qmx_it;
    if (!(imx > imn) || !(qmx > qmn))
        throw DegeneracyError("discrimination: records have zero spread");
    const double wi = (imx - imn) / kGrid;
    const double wq = (qmx - qmn) / kGrid;

    std::vector<double> res(kGrid * kGrid, 0.0);
    for (std::size_t n = 0; n < iv.size(); ++n) {
        const int ci = std::clamp(static_cast<int>((iv[n] - imn) / wi), 0, kGrid - 1);
        const int cq = std::clamp(static_cast<int>((qv[n] - qmn) / wq), 0, kGrid - 1);
        res[ci * kGrid + cq] += 1.0;
    }

    // half-maximum crossing distance from the peak cell, walking one axis in
    // both directions with linear interpolation inside the crossing cell
    const auto axis_sigma = [&](double v, int ci, int cq, bool along_i, double w) {
        double total = 0.0;
        int n_ok = 0;
        for (const int dir : {+1, -1}) {
            double prev = v;
            for (int k = 1;; ++k) {
                const int p = (along_i ? ci : cq) + dir * k;
                if (p < 0 || p >= kGrid) break;
                const double cur = res[along_i ? p * kGrid + cq : ci * kGrid + p];
                if (cur < 0.5 * v) {
                    const double frac = (prev - 0.5 * v) / std::max(prev - cur, 1e-300);
                    total += (k - 1 + frac) * w;
                    ++n_ok;
                    break;
                }
                prev = cur;
            }
        }
        const double hw = n_ok > 0 ? total / n_ok : 0.5 * w;
        return std::max(hw / kHalfMaxToSigma, 0.35 * w);
    };

    std::vector<Mode> modes;
    double first_peak = 0.0;
    for (int found = 0; found < want; ++found) {
        int best = -1;
        double v = 0.0;
        for (int idx = 0; idx < kGrid * kGrid; ++idx)
            if (res[idx] > v) {
                v = res[idx];
                best = idx;
            }
        if (found == 0) first_peak = v;
        if (best < 0 || v < std::max(10.0, 0.002 * first_peak))
            throw DegeneracyError("discrimination: resolved only " + std::to_string(found) +
                                  " of " + std::to_string(want) + " requested modes");
        const int ci = best / kGrid;
        const int cq = best % kGrid;

        Mode m;
        m.i_sigma = axis_sigma(v, ci, cq, true, wi);
        m.q_sigma = axis_sigma(v, ci, cq, false, wq);

        // center from positive-residual moments around the peak
        double wsum = 0.0, si = 0.0, sq = 0.0;
        for (int di = -kWindow; di <= kWindow; ++di) {
            for (int dq = -kWindow; dq <= kWindow; ++dq) {
                const int ni = ci + di, nq = cq + dq;
                if (ni < 0 || ni >= kGrid || nq < 0 || nq >= kGrid) continue;
                const double c = std::max(res[ni * kGrid + nq], 0.0);
                si += c * (imn + (ni + 0.5) * wi);
                sq += c * (qmn + (nq + 0.5) * wq);
                wsum += c;
            }
        }
        if (wsum <= 0.0)
            throw DegeneracyError("discrimination: resolved only " + std::to_string(found) +
                                  " of " + std::to_string(want) + " requested modes");
        m.i_center = si / wsum;
        m.q_center = sq / wsum;

        // window mass corrected for the tails the window cuts off
        const auto coverage = [](double lo, double hi, double c, double s) {
            return 0.5 * (std::erf((hi - c) / (s * kSqrt2)) -
                          std::erf((lo - c) / (s * kSqrt2)));
        };
        const double lo_i = imn + std::max(ci - kWindow, 0) * wi;
        const double hi_i = imn + std::min(ci + kWindow + 1, kGrid) * wi;
        const double lo_q = qmn + std::max(cq - kWindow, 0) * wq;
        const double hi_q = qmn + std::min(cq + kWindow + 1, kGrid) * wq;
        const double cov = std::max(coverage(lo_i, hi_i, m.i_center, m.i_sigma) *
                                        coverage(lo_q, hi_q, m.q_center, m.q_sigma),
                                    0.02);
        m.count = wsum / cov;
        modes.push_back(m);

        // inflated subtraction: 1.2x the mass over 1.15x the widths guarantees
        // this component's own flanks cannot resurface as the next "mode"
        const double peak = 1.2 * m.count * wi * wq / (2.0 * 3.14159265358979324 *
                                                       m.i_sigma * m.q_sigma);
        const double di2 = 2.0 * (1.15 * m.i_sigma) * (1.15 * m.i_sigma);
        const double dq2 = 2.0 * (1.15 * m.q_sigma) * (1.15 * m.q_sigma);
        for (int ni = 0; ni < kGrid; ++ni) {
            const double xi = imn + (ni + 0.5) * wi - m.i_center;
            for (int nq = 0; nq < kGrid; ++nq) {
                const double xq = qmn + (nq + 0.5) * wq - m.q_center;
                res[ni * kGrid + nq] -= peak * std::exp(-xi * xi / di2 - xq * xq / dq2);
            }
        }
    }
    return modes;
}

// Polishes the peeled seeds with a few rounds of expectation-maximization on
// the raw records. The projections the final fit works with blur overlapping
// components, but record-level responsibilities in the full IQ plane keep
// them apart, so this lands every seed in its own basin with an honest mass
// before the histogram fit takes over. A strided subsample keeps the cost
// flat for long traces.
void refine_modes(const std::vector<double>& iv, const std::vector<double>& qv,
                  std::vector<Mode>& modes) {
    constexpr std::uint64_t kMaxSample = 120000;
    constexpr int kRounds = 6;
    const std::uint64_t n = iv.size();
    const std::uint64_t stride = 1 + (n - 1) / kMaxSample;
    const int k = static_cast<int>(modes.size());

    const auto [imn_it, imx_it] = std::minmax_element(iv.begin(), iv.end());
    const auto [qmn_it, qmx_it] = std::minmax_element(qv.begin(), qv.end());
    const double sigma_floor = 1e-4 * std::max(*imx_it - *imn_it, *qmx_it - *qmn_it);

    std::vector<double> wgt(k), i2(k), q2(k), acc(5 * k);
    for (int round = 0; round < kRounds; ++round) {
        for (int m = 0; m < k; ++m) {
            wgt[m] = modes[m].count / (modes[m].i_sigma * modes[m].q_sigma);
            i2[m] = 0.5 / (modes[m].i_sigma * modes[m].i_sigma);
            q2[m] = 0.5 / (modes[m].q_sigma * modes[m].q_sigma);
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::uint64_t r = 0; r < n; r += stride) {
            double p[4];  // n_states <= 4
            double s = 0.0;
            for (int m = 0; m < k; ++m) {
                const double di = iv[r] - modes[m].i_center;
                const double dq = qv[r] - modes[m].q_center;
                p[m] = wgt[m] * std::exp(-di * di * i2[m] - dq * dq * q2[m]);
                s += p[m];
            }
            if (!(s > 1e-300)) continue;  // beyond every component's reach
            for (int m = 0; m < k; ++m) {
                const double resp = p[m] / s;
                acc[5 * m] += resp;
                acc[5 * m + 1] += resp * iv[r];
                acc[5 * m + 2] += resp * iv[r] * iv[r];
                acc[5 * m + 3] += resp * qv[r];
                acc[5 * m + 4] += resp * qv[r] * qv[r];
            }
        }
        for (int m = 0; m < k; ++m) {
            const double w = acc[5 * m];
            if (!(w > 1.0)) continue;  // starved component: leave it in place
            const double mi = acc[5 * m + 1] / w;
            const double mq = acc[5 * m + 3] / w;
            modes[m].count = w * static_cast<double>(stride);
            modes[m].i_center = mi;
            modes[m].q_center = mq;
            modes[m].i_sigma = std::max(
                std::sqrt(std::max(acc[5 * m + 2] / w - mi * mi, 0.0)), sigma_floor);
            modes[m].q_sigma = std::max(
                std::sqrt(std::max(acc[5 * m + 4] / w - mq * mq, 0.0)), sigma_floor);
        }
    }
}

}  // namespace

double ClusterModel::leakage_population() const {
    double leak = 0.0;
    for (std::size_t i = 0; i < populations.size(); ++i)
        if (static_cast<int>(i) != g_index && static_cast<int>(i) != e_index)
            leak += populations[i];
    return leak;
}

ClusterModel fit_clusters(const Trace& trace, int n_states, double bin_width,
                          int max_iterations) {
    if (n_states < 2 || n_states > 4)
        throw ConfigError("discrimination: n_states must lie in [2, 4]");
    if (trace.size() < 100000)
        throw ConfigError("discrimination: trace must hold at least 10^5 records");

    const std::uint64_t n = trace.size();
    std::vector<double> iv(n), qv(n);
    for (std::uint64_t r = 0; r < n; ++r) {
        iv[r] = trace.iq[2 * r];
        qv[r] = trace.iq[2 * r + 1];
    }

    const double wi = bin_width > 0.0 ? bin_width : fd_bin_width(iv);
    const double wq = bin_width > 0.0 ? bin_width : fd_bin_width(qv);
    const Histogram hi = build_histogram(iv, wi);
    const Histogram hq = build_histogram(qv, wq);

    auto modes = find_modes(iv, qv, n_states);
    refine_modes(iv, qv, modes);

    Eigen::VectorXd beta(5 * n_states);
    for (int i = 0; i < n_states; ++i) {
        beta[5 * i] = modes[i].count;
        beta[5 * i + 1] = modes[i].i_center;
        beta[5 * i + 2] = modes[i].i_sigma;
        beta[5 * i + 3] = modes[i].q_center;
        beta[5 * i + 4] = modes[i].q_sigma;
    }

    const ProjectionModel model{&hi, &hq, n_states};
    const auto lm = levenberg_marquardt(model, std::move(beta), max_iterations);

    // amplitude-descending state order
    std::vector<int> order(n_states);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return lm.params[5 * a] > lm.params[5 * b]; });

    ClusterModel out;
    out.chi2 = lm.chi2;
    out.iterations = lm.iterations;
    double total = 0.0;
    for (int i = 0; i < n_states; ++i) {
        const int src = order[i];
        GaussComponent c;
        c.amplitude = lm.params[5 * src];
        c.i_center = lm.params[5 * src + 1];
        c.i_sigma = std::abs(lm.params[5 * src + 2]);
        c.q_center = lm.params[5 * src + 3];
        c.q_sigma = std::abs(lm.params[5 * src + 4]);
        out.states.push_back(c);
        total += c.amplitude;
    }
    if (total <= 0.0)
        throw DegeneracyError("discrimination: non-positive total amplitude");

    out.populations.resize(n_states);
    out.population_errors.resize(n_states);
    for (int i = 0; i < n_states; ++i) {
        const double ai = out.states[i].amplitude;
        out.populations[i] = ai / total;
        // delta method on P_i = A_i / sum(A): dP_i/dA_j = (d_ij*S - A_i) / S^2
        double var = 0.0;
        for (int a = 0; a < n_states; ++a) {
            const double ga = ((a == i ? total : 0.0) - ai) / (total * total);
            for (int b = 0; b < n_states; ++b) {
                const double gb = ((b == i ? total : 0.0) - ai) / (total * total);
                var += ga * gb * lm.covariance(5 * order[a], 5 * order[b]);
            }
        }
        out.population_errors[i] = std::sqrt(std::max(var, 0.0));
    }

    // a non-positive amplitude or coincident centers means the records could
    // not actually support n_states distinct components
    for (int i = 0; i < n_states; ++i)
        if (!(out.states[i].amplitude > 0.0))
            throw DegeneracyError("discrimination: a fitted component collapsed to "
                                  "non-positive amplitude");
    for (int a = 0; a < n_states; ++a) {
        for (int b = a + 1; b < n_states; ++b) {
            const double sep = std::hypot(out.states[a].i_center - out.states[b].i_center,
                                          out.states[a].q_center - out.states[b].q_center);
            const double scale =
                std::max(std::max(out.states[a].i_sigma, out.states[a].q_sigma),
                         std::max(out.states[b].i_sigma, out.states[b].q_sigma));
            if (sep < 0.5 * scale)
                throw DegeneracyError("discrimination: fitted components are not distinct");
        }
    }

    out.e_index = 0;
    out.g_index = 1;
    return out;
}

bool quality_filter(const ClusterModel& model, double max_leak) {
    if (max_leak < 0.0) throw ConfigError("discrimination: max_leak must be >= 0");
    return model.leakage_population() <= max_leak;
}

BinaryTrace rotate_and_threshold(const Trace& trace, ClusterModel& model,
                                 int threshold_steps) {
    if (threshold_steps < 2)
        throw ConfigError("discrimination: threshold_steps must be >= 2");
    const GaussComponent& gc = model.states.at(model.g_index);
    const GaussComponent& ec = model.states.at(model.e_index);
    const double di = ec.i_center - gc.i_center;
    const double dq = ec.q_center - gc.q_center;
    if (std::hypot(di, dq) < 1e-9)
        throw DegeneracyError("discrimination: coincident g and e centers");

    model.theta = -std::atan2(dq, di);
    const double c = std::cos(model.theta);
    const double s = std::sin(model.theta);

    const std::uint64_t n = trace.size();
    std::vector<double> rot(n);
    for (std::uint64_t r = 0; r < n; ++r)
        rot[r] = trace.iq[2 * r] * c - trace.iq[2 * r + 1] * s;

    // refit 1D Gaussians to the rotated-I projection, seeded by the rotated
    // 2D model components
    const Histogram h = build_histogram(rot, fd_bin_width(rot));
    auto rotated_mu = [&](const GaussComponent& comp) {
        return comp.i_center * c - comp.q_center * s;
    };
    auto rotated_sigma = [&](const GaussComponent& comp) {
        return std::sqrt(c * c * comp.i_sigma * comp.i_sigma +
                         s * s * comp.q_sigma * comp.q_sigma);
    };
    Eigen::VectorXd beta(6);
    beta << gc.amplitude, rotated_mu(gc), rotated_sigma(gc),  //
        ec.amplitude, rotated_mu(ec), rotated_sigma(ec);
    const Profile1DModel model1d{&h, 2};
    const auto lm = levenberg_marquardt(model1d, std::move(beta), 200);

    double mu_g = lm.params[1], s_g = std::abs(lm.params[2]);
    double mu_e = lm.params[4], s_e = std::abs(lm.params[5]);
    if (mu_g > mu_e) {
        std::swap(mu_g, mu_e);
        std::swap(s_g, s_e);
    }
    if (!(mu_e - mu_g > 1e-9))
        throw DegeneracyError("discrimination: rotated centers collapsed");

    // scan t* between the centers, minimizing the summed tail misid fractions
    const double step = (mu_e - mu_g) / threshold_steps;
    double best_t = mu_g + step;
    double best_miss = 2.0;
    for (int k = 1; k < threshold_steps; ++k) {
        const double t = mu_g + k * step;
        const double miss =
            (1.0 - normal_cdf((t - mu_g) / s_g)) + normal_cdf((t - mu_e) / s_e);
        if (miss < best_miss) {
            best_miss = miss;
            best_t = t;
        }
    }
    model.threshold = best_t;
    model.misid_g_to_e = 1.0 - normal_cdf((best_t - mu_g) / s_g);
    model.misid_e_to_g = normal_cdf((best_t - mu_e) / s_e);

    BinaryTrace binary;
    binary.parent_index = trace.index;
    binary.ts_us = trace.ts_us;
    binary.bits.resize(n);
    for (std::uint64_t r = 0; r < n; ++r)
        binary.bits[r] = rot[r] < best_t ? 0 : 1;  // ground lies below e on the axis
    return binary;
}

DiscriminationResult discriminate_trace(const Trace& trace, const DiscriminationConfig& cfg) {
    DiscriminationResult out;
    out.model = fit_clusters(trace, cfg.n_states, cfg.bin_width, cfg.max_iterations);
    out.binary = rotate_and_threshold(trace, out.model, cfg.threshold_steps);
    out.binary.quality_ok = quality_filter(out.model, cfg.max_leak);
    return out;
}

}  // namespace qpburst
