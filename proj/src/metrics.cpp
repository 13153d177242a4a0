#include "neurocal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "neurocal/errors.hpp"
#include "neurocal/rng.hpp"

namespace neurocal {

double esnr(std::span<const double> trace, std::span<const std::uint8_t> spike_frames) {
  if (trace.size() != spike_frames.size() || trace.size() < 2)
    throw Error("undefined-esnr", "trace and spike indicator must align");
  double num = 0, den = 0;
  long n_spike = 0, n_quiet = 0;
  for (size_t t = 1; t < trace.size(); ++t) {
    double d = trace[t] - trace[t - 1];
    if (spike_frames[t]) {
      num += d;
      ++n_spike;
    } else {
      den += d * d / 2;
      ++n_quiet;
    }
  }
  if (n_spike == 0) throw Error("undefined-esnr", "no spike frames");
  num /= n_spike;
  if (n_quiet == 0 || den == 0) return std::numeric_limits<double>::infinity();
  return num / std::sqrt(den / n_quiet);
}

namespace {

void gather_offdiag(const Mat& a, const Mat& b, std::vector<double>& x,
                    std::vector<double>& y) {
  if (a.rows != b.rows || a.cols != b.cols || a.rows != a.cols)
    throw Error("shape-mismatch", "matrices must be square and equal-shaped");
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j)
      if (i != j) {
        x.push_back(a.at(i, j));
        y.push_back(b.at(i, j));
      }
}

int sgn(double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

}  // namespace

double r_squared(const Mat& w_true, const Mat& w_hat) {
  std::vector<double> x, y;
  gather_offdiag(w_true, w_hat, x, y);
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t k = 0; k < n; ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0 || syy == 0) throw Error("zero-variance", "degenerate weight vector");
  double r = sxy / std::sqrt(sxx * syy);
  return r * r;
}

double hamming_sign(const Mat& w_true, const Mat& w_hat) {
  std::vector<double> x, y;
  gather_offdiag(w_true, w_hat, x, y);
  double acc = 0;
  for (size_t k = 0; k < x.size(); ++k) acc += std::abs(sgn(x[k]) - sgn(y[k]));
  return acc / x.size();
}

ScaleFit empirical_scale(const Mat& w_true, const Mat& w_hat, int n_boot,
                         std::uint64_t seed) {
  std::vector<double> x, y;
  gather_offdiag(w_true, w_hat, x, y);
  long nonzero = std::count_if(x.begin(), x.end(), [](double v) { return v != 0; });
  if (nonzero < 10)
    throw Error("insufficient-nonzeros", "need >= 10 nonzero true weights");

  auto slope_of = [&](const std::vector<size_t>& idx) {
    double num = 0, den = 0;
    for (size_t k : idx) {
      num += x[k] * y[k];
      den += x[k] * x[k];
    }
    return num / den;
  };

  std::vector<size_t> all(x.size());
  for (size_t k = 0; k < x.size(); ++k) all[k] = k;
  ScaleFit fit;
  fit.slope = slope_of(all);

  auto rng = make_engine(seed, 0x5ca1e);
  std::uniform_int_distribution<size_t> pick(0, x.size() - 1);
  std::vector<double> slopes;
  slopes.reserve(n_boot);
  std::vector<size_t> idx(x.size());
  for (int bIt = 0; bIt < n_boot; ++bIt) {
    double den = 0;
    do {
      for (size_t k = 0; k < x.size(); ++k) idx[k] = pick(rng);
      den = 0;
      for (size_t k : idx) den += x[k] * x[k];
    } while (den == 0);
    slopes.push_back(slope_of(idx));
  }
  std::sort(slopes.begin(), slopes.end());
  auto q = [&](double p) {
    double pos = p * (slopes.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    size_t hi = std::min(lo + 1, slopes.size() - 1);
    double w = pos - lo;
    return slopes[lo] * (1 - w) + slopes[hi] * w;
  };
  fit.ci_lo = q(0.025);
  fit.ci_hi = q(0.975);
  return fit;
}

EvalReport evaluate(const Mat& w_true, const Mat& w_hat) {
  EvalReport rep;
  rep.r2 = r_squared(w_true, w_hat);
  rep.hamming = hamming_sign(w_true, w_hat);
  rep.scale = empirical_scale(w_true, w_hat);
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["r2"] = r2;
  j["hamming_sign"] = hamming;
  j["scale"] = {{"slope", scale.slope}, {"ci95_lo", scale.ci_lo}, {"ci95_hi", scale.ci_hi}};
  if (!esnr_per_neuron.empty()) {
    j["esnr_per_neuron"] = esnr_per_neuron;
    j["esnr_mean"] = esnr_mean;
  }
  return j.dump(2);
}

}  // namespace neurocal
