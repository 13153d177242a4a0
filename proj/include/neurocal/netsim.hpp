#pragma once

#include <cstdint>
#include <vector>

#include "neurocal/types.hpp"

namespace neurocal {

// Normal(mean, var) truncated below at floor_frac * mean.
struct TruncNormal {
  double mean = 0, var = 0, floor_frac = 0;
};

enum class TauMode { shared, by_type, jitter };

// Simulation parameters; defaults follow the cortical-network table the
// generator is modeled on (times in seconds, calcium in uM).
struct SimConfig {
  int n_neurons = 25;
  double frac_excitatory = 0.8;
  double p_connect = 0.1;
  double target_rate = 5.0;  // Hz
  double psp_exc_mean_mv = 0.5;
  double psp_inh_mean_mv = 2.3;
  double v_b_mv = 15.0;

  TruncNormal tau_c{0.200, 60e-6, 0.4};
  TruncNormal a_jump{80.0, 20.0, 0.4};
  TruncNormal c_b{24.0, 8.0, 0.4};
  TruncNormal sigma_c{28.0, 10.0, 0.4};
  TruncNormal tau_exc{0.010, 2.5e-6, 0.5};
  TruncNormal tau_inh{0.020, 5.0e-6, 0.5};
  TruncNormal tau_refr{0.010, 2.5e-6, 0.5};
  double gamma = 2e-4;
  double sigma_f = 4e-5;
  double k_d = 200.0;

  TauMode tau_mode = TauMode::shared;
  double tau_h_shared = 0.010;
  double tau_jitter_frac = 0.25;  // used by TauMode::jitter (per presynaptic neuron)
  double sigma_h = 0.0;
  bool alpha_psp = false;          // two-exponential PSP kernel, 1 ms rise
  double psp_rise = 1e-3;
  double refractory_suppression = 0.9;
  double inh_floor_frac = 0.02;    // strongest inhibition: rate floor as fraction of baseline
  bool balance_inhibition = true;

  // Strong-coupling ("command neuron") component.
  double frac_command = 0.0;
  double command_base_rate = 1.0;  // Hz
  double p_command_connect = 0.3;

  TimeGrid grid = make_grid(1e-3, 1.0 / 60.0, 600.0);
  std::uint64_t seed = 1;
  bool store_paths = false;
};

struct SimOutput {
  NetworkSpec spec;
  std::vector<std::vector<int>> spike_steps;  // per neuron, simulation-step indices
  FluorescenceMovie movie;
  std::vector<double> realized_rate;  // Hz
  std::vector<HiddenPath> paths;      // filled when cfg.store_paths
};

std::vector<std::string> validate_config(const SimConfig& cfg);

// Baseline drive that makes f(b)/dt equal target_rate.
double calibrate_baseline(double target_rate_hz, double dt);

// w such that rate(b+w, dt) == target_rate_hz; bisection on the monotone rate.
double solve_weight_for_rate(double b, double target_rate_hz, double dt);

// Converts a signed PSP peak amplitude (mV) into a GLM coupling weight by
// equating the spiking-probability increments; throws
// "unreachable-probability" when the requested rate change leaves f's range.
double psp_to_weight(double v_psp_mv, double v_b_mv, double b, double tau_h, double dt);

NetworkSpec generate_network(const SimConfig& cfg);

// Joint spike simulation at dt_sim. Returns sparse spike steps; optionally
// records the full history paths (only sensible for small instances).
std::vector<std::vector<int>> simulate_spikes(const NetworkSpec& spec,
                                              const SimConfig& cfg,
                                              std::uint64_t seed,
                                              std::vector<HiddenPath>* paths = nullptr);

// Exact recursion of the calcium dynamics for one neuron.
std::vector<double> simulate_calcium(const std::vector<std::uint8_t>& spikes,
                                     const NeuronIntrinsics& p, double dt,
                                     std::uint64_t seed, int neuron_tag);

// Samples the calcium path at frame instants and adds observation noise.
std::vector<double> render_fluorescence(const std::vector<double>& calcium,
                                        const NeuronIntrinsics& p,
                                        const TimeGrid& grid, std::uint64_t seed,
                                        int neuron_tag);

SimOutput simulate(const SimConfig& cfg);

// Filtered spike train (the deterministic part of the history recursion).
std::vector<double> history_filter(const std::vector<std::uint8_t>& spikes,
                                   double tau_h, double dt);

// Frame-grid binarized raster: entry 1 iff the frame's bin contains a spike.
Mat bin_spikes(const std::vector<std::vector<int>>& spike_steps, const TimeGrid& grid);

}  // namespace neurocal
