#pragma once

#include <cmath>

#include "neurocal/errors.hpp"

namespace neurocal {

// Two-level time discretization: a fine simulation step and a coarser
// imaging (frame) step that is an integer multiple of it.
struct TimeGrid {
  double dt_sim = 1e-3;    // seconds
  double dt_frame = 1e-3;  // seconds, snapped to stride * dt_sim
  double duration = 0;     // seconds
  int stride = 1;          // dt_frame / dt_sim

  int n_steps() const { return static_cast<int>(std::llround(duration / dt_sim)); }
  int n_frames() const { return n_steps() / stride; }
  double frame_time(int t) const { return (t + 1) * static_cast<double>(stride) * dt_sim; }
};

inline TimeGrid make_grid(double dt_sim, double dt_frame, double duration) {
  if (!(dt_sim > 0)) throw Error("invalid-grid", "dt_sim must be positive");
  if (!(dt_frame >= dt_sim)) throw Error("invalid-grid", "dt_frame must be >= dt_sim");
  TimeGrid g;
  g.dt_sim = dt_sim;
  g.stride = static_cast<int>(std::llround(dt_frame / dt_sim));
  if (g.stride < 1) g.stride = 1;
  g.dt_frame = g.stride * dt_sim;
  g.duration = duration;
  if (g.n_frames() < 2) throw Error("invalid-grid", "need at least 2 frames");
  return g;
}

// Frame-rate convenience used by configs and sweeps.
inline TimeGrid make_frame_grid(double frame_rate_hz, double duration, double dt_sim = 1e-3) {
  double dtf = 1.0 / frame_rate_hz;
  if (dtf < dt_sim) dt_sim = dtf;
  return make_grid(dt_sim, dtf, duration);
}

}  // namespace neurocal
