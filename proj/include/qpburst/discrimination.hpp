#pragma once

#include <vector>

#include "qpburst/trace.hpp"

namespace qpburst {

struct GaussComponent {
    double amplitude = 0.0;  // ~ number of records attributed to the state
    double i_center = 0.0;
    double i_sigma = 1.0;
    double q_center = 0.0;
    double q_sigma = 1.0;
};

// Fitted mixture for one trace. Components are stored amplitude-descending;
// the protocol holds the qubit excited, so the dominant component is |e> and
// the runner-up is |g> (leakage states trail far behind both).
struct ClusterModel {
    std::vector<GaussComponent> states;
    std::vector<double> populations;        // A_i / sum(A), same order
    std::vector<double> population_errors;  // delta-method from the fit covariance
    int e_index = 0;
    int g_index = 1;

    // filled by rotate_and_threshold
    double theta = 0.0;      // rotation aligning the g->e axis with I
    double threshold = 0.0;  // t* on the rotated I axis
    double misid_g_to_e = 0.0;
    double misid_e_to_g = 0.0;

    double chi2 = 0.0;
    int iterations = 0;

    double population(int index) const { return populations.at(index); }
    // everything that is neither g nor e (f and h leakage)
    double leakage_population() const;
};

struct DiscriminationConfig {
    int n_states = 2;
    double bin_width = 0.0;  // histogram bin width; 0 = Freedman-Diaconis
    double max_leak = 0.01;  // quality cut on P_f + P_h
    int max_iterations = 200;
    int threshold_steps = 1000;  // candidate spacing = (center gap) / steps
};

// Histograms the I and Q projections and simultaneously fits sums of
// n_states Gaussians with shared amplitudes (Poisson bin weights,
// Levenberg-Marquardt). Initial modes come from a coarse 2D histogram.
ClusterModel fit_clusters(const Trace& trace, int n_states, double bin_width = 0.0,
                          int max_iterations = 200);

// Trace acceptance: leakage population within the cut.
bool quality_filter(const ClusterModel& model, double max_leak = 0.01);

// Rotates records so the g->e axis lies along I, refits 1D Gaussians to the
// rotated-I projection, scans t* between the centers minimizing the summed
// tail misid fractions, and emits the thresholded trace (0 = ground side).
// Fills theta, threshold and the misid fractions in the model.
BinaryTrace rotate_and_threshold(const Trace& trace, ClusterModel& model,
                                 int threshold_steps = 1000);

struct DiscriminationResult {
    ClusterModel model;
    BinaryTrace binary;
};

// fit + quality + threshold for one trace; quality_ok is stamped on the
// binary trace, which is produced regardless so callers can inspect it.
DiscriminationResult discriminate_trace(const Trace& trace, const DiscriminationConfig& cfg);

}  // namespace qpburst
