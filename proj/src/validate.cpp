#include <cmath>

#include "neurocal/types.hpp"

namespace neurocal {

namespace {
void add(std::vector<Violation>& out, int neuron, const std::string& field,
         const std::string& msg, int edge_from = -1) {
  out.push_back({neuron, edge_from, field, msg});
}
}  // namespace

std::vector<Violation> validate_network(const NetworkSpec& spec) {
  std::vector<Violation> out;
  const int n = spec.n();

  if (spec.grid.dt_sim <= 0) add(out, -1, "grid.dt_sim", "must be positive");
  if (spec.grid.dt_frame < spec.grid.dt_sim)
    add(out, -1, "grid.dt_frame", "must be >= dt_sim");
  if (spec.grid.n_frames() < 2) add(out, -1, "grid.duration", "needs at least 2 frames");

  if (spec.w.rows != spec.w.cols) add(out, -1, "w", "must be square");
  if (static_cast<int>(spec.neurons.size()) != n)
    add(out, -1, "neurons", "count must match w dimension");

  for (int i = 0; i < spec.w.rows; ++i)
    for (int j = 0; j < spec.w.cols; ++j)
      if (!std::isfinite(spec.w.at(i, j)))
        add(out, i, "w", "non-finite entry", j);

  if (!spec.tau_syn.empty()) {
    if (spec.tau_syn.rows != n || spec.tau_syn.cols != n)
      add(out, -1, "tau_syn", "shape must match w");
    for (int i = 0; i < spec.tau_syn.rows; ++i)
      for (int j = 0; j < spec.tau_syn.cols; ++j)
        if (!(spec.tau_syn.at(i, j) > 0))
          add(out, i, "tau_syn", "must be positive", j);
  }

  if (!(spec.kinetics.tau_h > 0)) add(out, -1, "tau_h", "must be positive");
  if (spec.kinetics.sigma_h < 0) add(out, -1, "sigma_h", "must be >= 0");
  if (spec.kinetics.tau_h > 0 && !(spec.grid.dt_frame < spec.kinetics.tau_h * 50))
    add(out, -1, "tau_h", "dt_frame must be < 50 * tau_h");

  for (int i = 0; i < static_cast<int>(spec.neurons.size()); ++i) {
    const auto& p = spec.neurons[i];
    if (!(p.tau_c > 0)) add(out, i, "tau_c", "must be positive");
    if (!(p.a_jump > 0)) add(out, i, "A", "must be positive");
    if (p.sigma_c < 0) add(out, i, "sigma_c", "must be >= 0");
    if (p.gamma < 0) add(out, i, "gamma", "must be >= 0");
    if (p.sigma_f < 0) add(out, i, "sigma_F", "must be >= 0");
    if (!(p.k_d > 0)) add(out, i, "K_d", "must be positive");
    if (!(p.gamma > 0) && !(p.sigma_f > 0))
      add(out, i, "gamma/sigma_F", "observation density must be proper");
    if (!std::isfinite(p.b)) add(out, i, "b", "non-finite");
    if (!std::isfinite(p.c_b)) add(out, i, "C_b", "non-finite");
    if (!std::isfinite(p.alpha) || !std::isfinite(p.beta))
      add(out, i, "alpha/beta", "non-finite");
  }

  return out;
}

}  // namespace neurocal
