#pragma once

#include <algorithm>
#include <cmath>

namespace neurocal {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Bernoulli spiking nonlinearity f(J) = 1 - exp(-e^J dt) and friends.
// All evaluations go through u = e^J dt so saturation and underflow are
// handled in one place.
struct SpikeNonlin {
  double u;       // e^J * dt (capped)
  double f;       // spike probability in [0,1)
  double log_f;   // log f
  double log_1mf; // log(1-f) = -u
};

inline SpikeNonlin spike_nonlin(double J, double dt) {
  SpikeNonlin s;
  double log_u = J + std::log(dt);
  if (log_u > 27.6) log_u = 27.6;  // u <= ~1e12; beyond this f == 1 anyway
  double u = std::exp(log_u);
  s.u = u;
  if (log_u < -36.0) {
    // f = u to full double precision
    s.f = u;
    s.log_f = log_u;
  } else {
    s.f = -std::expm1(-u);
    // log(1-e^(-u)) with the usual split for accuracy
    s.log_f = (u <= 0.6931471805599453) ? std::log(-std::expm1(-u))
                                        : std::log1p(-std::exp(-u));
  }
  s.log_1mf = -u;
  return s;
}

inline double spike_prob(double J, double dt) { return spike_nonlin(J, dt).f; }

// Firing rate in Hz implied by drive J at bin width dt; saturates at 1/dt.
inline double spike_rate(double J, double dt) { return spike_nonlin(J, dt).f / dt; }

inline double log_bernoulli(bool spike, const SpikeNonlin& s) {
  return spike ? s.log_f : s.log_1mf;
}

// d/dJ of [p log f + (1-p) log(1-f)] evaluated stably: u (p - f) / f.
inline double spike_loglik_slope(double p, const SpikeNonlin& s) {
  double ratio;  // u / f
  if (s.u < 1e-12) {
    ratio = 1.0 + 0.5 * s.u;
  } else {
    ratio = s.u / s.f;
  }
  return ratio * (p - s.f);
}

// Saturating fluorescence map S(C) = C / (C + K_d).
inline double hill(double c, double k_d) {
  double ce = std::max(c, -0.5 * k_d);
  return ce / (ce + k_d);
}

inline double hill_deriv(double c, double k_d) {
  double ce = std::max(c, -0.5 * k_d);
  double d = ce + k_d;
  return k_d / (d * d);
}

// Observation noise variance; S is clamped to its physical range so the
// density stays proper when calcium noise drives C below zero.
inline double obs_variance(double s_of_c, double gamma, double sigma_f) {
  double s = std::clamp(s_of_c, 0.0, 1.0);
  double v = sigma_f * sigma_f + gamma * s;
  double floor = 1e-12 * (sigma_f * sigma_f + gamma) + 1e-300;
  return std::max(v, floor);
}

inline double log_normal_pdf(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

}  // namespace neurocal
