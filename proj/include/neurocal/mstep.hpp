#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "neurocal/types.hpp"

namespace neurocal {

// Weighted (S(C), F) support points of the fluorescence-term expectation.
struct ObsStats {
  std::vector<double> s, f, p;
  void add(double s_, double f_, double p_) {
    s.push_back(s_);
    f.push_back(f_);
    p.push_back(p_);
  }
};

// Second moments of (C(t-1), n(t), 1, C(t)) under the pairwise posterior;
// everything the calcium-transition fit needs.
struct CalciumGram {
  double g[4][4] = {};
  double n_pairs = 0;
  void add(double c_prev, double n, double c_cur, double weight) {
    const double z[4] = {c_prev, n, 1.0, c_cur};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) g[a][b] += weight * z[a] * z[b];
    n_pairs += weight;
  }
  void merge(const CalciumGram& o) {
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) g[a][b] += o.g[a][b];
    n_pairs += o.n_pairs;
  }
};

struct ObsParams {
  double alpha = 1, beta = 0, gamma = 0, sigma_f = 0;
};

struct CalParams {
  double tau_c = 0.2, a_jump = 80, c_b = 24, sigma_c = 1;
};

struct PriorConfig {
  double lambda = 0;  // L1 strength
  double l_cap = 50;  // |w| bound
  bool dale_enabled = false;
  std::vector<std::int8_t> a;  // per presynaptic neuron: -1, 0, +1
};

struct SpikeFitResult {
  double b = 0;
  std::vector<double> w;
  double objective = 0;  // penalized, per-frame normalized
  double kkt = 0;
  int iters = 0;
  bool converged = false;
};

// Everything the connectivity M-step consumes. p holds the exact smoothed
// spike marginals; cross the filtered-marginal histories shared by all
// rows; self the per-neuron posterior-mean own history.
struct ConnectivityStats {
  Mat p;      // N x T
  Mat cross;  // T x N (column j = posterior-mean history of neuron j)
  Mat self;   // N x T
  double dt = 1.0 / 60.0;
  int n() const { return p.rows; }
  int frames() const { return p.cols; }
};

double obs_loglik(const ObsStats& st, const ObsParams& q);
ObsParams fit_observation_params(const ObsStats& st, ObsParams init);

double cal_loglik(const CalciumGram& gram, const CalParams& q, double dt);
CalParams fit_calcium_params(const CalciumGram& gram, double dt, CalParams init);

// Penalized spiking objective (per-frame normalized), exposed for tests and
// for the EM surrogate trace.
double spike_objective(const Mat& design, std::span<const double> p, double dt,
                       double b, std::span<const double> w, double lambda);
void spike_gradient(const Mat& design, std::span<const double> p, double dt,
                    double b, std::span<const double> w, double* grad_b,
                    std::span<double> grad_w);

// Maximizes the concave spiking term with L1 penalty, |w|<=L box and
// optional sign constraints (self column exempt from signs). Warm-started
// proximal gradient plus an active-set Newton polish for the certificate.
SpikeFitResult fit_spiking_params(const Mat& design, std::span<const double> p,
                                  double dt, const PriorConfig& prior,
                                  int self_index, double b0,
                                  std::span<const double> w0);

std::vector<std::int8_t> assign_dale_signs(const Mat& w_hat, double threshold = 0.6);

struct RowFits {
  Mat w;  // N x N
  std::vector<double> b;
  double objective = 0;  // sum of row objectives
};

// Fits every row of W (optionally in parallel) from shared stats.
RowFits fit_all_rows(const ConnectivityStats& stats, const PriorConfig& prior,
                     const Mat& w_init, const std::vector<double>& b_init,
                     int jobs = 0);

// Greedy Dale refinement: alternate sign assignment and constrained fits,
// then try random single-neuron flips, keeping improvements only.
RowFits dale_refine(const ConnectivityStats& stats, const RowFits& start,
                    PriorConfig prior, int max_rounds = 5, int n_flips = 10,
                    std::uint64_t seed = 99, int jobs = 0);

}  // namespace neurocal
