#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurocal/types.hpp"

namespace neurocal {

struct ScaleFit {
  double slope = 0;
  double ci_lo = 0, ci_hi = 0;  // bootstrap 95% interval
};

struct EvalReport {
  double r2 = 0;
  double hamming = 0;
  ScaleFit scale;
  std::vector<double> esnr_per_neuron;  // empty when spikes unavailable
  double esnr_mean = 0;
  std::string to_json() const;
};

// Effective SNR of one fluorescence trace given the frame-grid spike
// indicator: mean spike-driven one-frame jump over the RMS (halved) of
// non-spike one-frame differences. Returns +inf (saturated) when the
// denominator vanishes; throws "undefined-esnr" without spike frames.
double esnr(std::span<const double> trace, std::span<const std::uint8_t> spike_frames);

// Squared Pearson correlation over off-diagonal entries.
double r_squared(const Mat& w_true, const Mat& w_hat);

// Normalized sign distance over off-diagonal entries, sign(0) = 0.
double hamming_sign(const Mat& w_true, const Mat& w_hat);

// Through-origin OLS slope of w_hat on w_true with a pair-resampling
// bootstrap interval; needs >= 10 nonzero true off-diagonal weights.
ScaleFit empirical_scale(const Mat& w_true, const Mat& w_hat,
                         int n_boot = 1000, std::uint64_t seed = 1234);

EvalReport evaluate(const Mat& w_true, const Mat& w_hat);

}  // namespace neurocal
