#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurocal/grid.hpp"

namespace neurocal {

// Dense row-major matrix; all we need for weights, movies and designs.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}
  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
  bool empty() const { return v.empty(); }
};

// Per-neuron parameters of the calcium/fluorescence cascade plus the
// baseline drive. The stimulus filter k is carried but never estimated;
// the external stimulus defaults to zero.
struct NeuronIntrinsics {
  double b = 0;         // baseline drive (dimensionless)
  double c_b = 24.0;    // baseline calcium, uM
  double tau_c = 0.2;   // calcium decay, s
  double a_jump = 80.0; // calcium jump per spike, uM
  double sigma_c = 28.0;// calcium noise, uM s^-1/2
  double alpha = 1.0;   // fluorescence scale
  double beta = 0.0;    // fluorescence offset
  double gamma = 2e-4;  // signal-dependent noise coefficient
  double sigma_f = 0.0; // signal-independent noise
  double k_d = 200.0;   // dissociation constant, uM
  std::vector<double> k;// stimulus filter, unused (zero stimulus)
};

struct SynapseKinetics {
  double tau_h = 0.010;  // PSP decay, s
  double sigma_h = 0.0;  // history noise scale, s^-1/2
};

// Ground-truth network: coupling matrix (row = postsynaptic) plus the
// per-neuron intrinsics and synaptic kinetics. tau_syn holds the actual
// per-synapse decay times used by the simulator (diagonal = refractory
// timescale); kinetics.tau_h is the single shared value the inference
// model assumes.
struct NetworkSpec {
  TimeGrid grid;
  Mat w;  // n x n
  Mat tau_syn;  // n x n, seconds
  std::vector<NeuronIntrinsics> neurons;
  SynapseKinetics kinetics;
  int n() const { return w.rows; }
};

struct HiddenPath {
  std::vector<std::uint8_t> spikes;
  std::vector<double> calcium;
  Mat history;  // rows = presynaptic index, cols = time; often left empty
};

struct FluorescenceMovie {
  TimeGrid grid;
  Mat f;  // n x n_frames
};

struct Violation {
  int neuron = -1;
  int edge_from = -1;  // presynaptic index for edge violations
  std::string field;
  std::string message;
};

// Total function: returns one entry per violated invariant, empty when the
// spec is valid.
std::vector<Violation> validate_network(const NetworkSpec& spec);

}  // namespace neurocal
