#include "neurocal/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "neurocal/errors.hpp"
#include "neurocal/model.hpp"
#include "neurocal/parallel.hpp"
#include "neurocal/rng.hpp"

namespace neurocal {

namespace {

double draw_trunc_normal(const TruncNormal& d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(d.mean, std::sqrt(d.var));
  double lo = d.floor_frac * d.mean;
  for (int k = 0; k < 1000; ++k) {
    double x = nd(rng);
    if (x >= lo) return x;
  }
  return lo;
}

double draw_exponential(double mean, std::mt19937_64& rng) {
  std::exponential_distribution<double> ed(1.0 / mean);
  return ed(rng);
}

// Peak value of exp(-t/tau_d) - exp(-t/tau_r); used to normalize the
// alpha-kernel mode so a single spike still produces a unit-height PSP.
double two_exp_peak(double tau_d, double tau_r) {
  if (std::abs(tau_d - tau_r) < 1e-12) return std::exp(-1.0);
  double tstar = std::log(tau_d / tau_r) * tau_d * tau_r / (tau_d - tau_r);
  return std::exp(-tstar / tau_d) - std::exp(-tstar / tau_r);
}

struct SpikeSimScratch {
  // per-synapse exponential states; e2 only used in alpha mode
  Mat e1, e2;
};

// One full spike simulation; returns realized mean rate and fills spikes.
double run_spike_sim(const NetworkSpec& spec, const SimConfig& cfg,
                     std::uint64_t seed, int n_steps,
                     std::vector<std::vector<int>>& spikes,
                     std::vector<HiddenPath>* paths) {
  const int n = spec.n();
  const double dt = spec.grid.dt_sim;
  SpikeSimScratch sc;
  sc.e1 = Mat(n, n, 0.0);
  if (cfg.alpha_psp) sc.e2 = Mat(n, n, 0.0);
  Mat norm(n, n, 1.0);
  if (cfg.alpha_psp) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        norm.at(i, j) = 1.0 / two_exp_peak(spec.tau_syn.at(i, j), cfg.psp_rise);
  }

  spikes.assign(n, {});
  std::vector<std::uint8_t> fired(n, 0);
  long total_spikes = 0;

  if (paths) {
    paths->assign(n, {});
    for (int i = 0; i < n; ++i) {
      (*paths)[i].spikes.assign(n_steps, 0);
      (*paths)[i].history = Mat(n, n_steps, 0.0);
    }
  }

  for (int t = 0; t < n_steps; ++t) {
    for (int i = 0; i < n; ++i) {
      double J = spec.neurons[i].b;
      for (int j = 0; j < n; ++j) {
        double w = spec.w.at(i, j);
        if (w == 0.0) continue;
        double h = cfg.alpha_psp ? norm.at(i, j) * (sc.e1.at(i, j) - sc.e2.at(i, j))
                                 : sc.e1.at(i, j);
        J += w * h;
      }
      fired[i] = u01_at(seed, t, i, 0) < spike_prob(J, dt) ? 1 : 0;
      if (fired[i]) {
        spikes[i].push_back(t);
        ++total_spikes;
      }
      if (paths) {
        (*paths)[i].spikes[t] = fired[i];
        for (int j = 0; j < n; ++j)
          (*paths)[i].history.at(j, t) =
              cfg.alpha_psp ? norm.at(i, j) * (sc.e1.at(i, j) - sc.e2.at(i, j))
                            : sc.e1.at(i, j);
      }
    }
    // history update with the spikes just drawn; they act from t+1 on
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (spec.w.at(i, j) == 0.0 && !paths) continue;
        double tau = spec.tau_syn.at(i, j);
        double e1 = sc.e1.at(i, j) * (1.0 - dt / tau) + fired[j];
        if (cfg.sigma_h > 0) e1 += cfg.sigma_h * std::sqrt(dt) * normal_at(seed, t, i * n + j, 1);
        sc.e1.at(i, j) = e1;
        if (cfg.alpha_psp)
          sc.e2.at(i, j) = sc.e2.at(i, j) * (1.0 - dt / cfg.psp_rise) + fired[j];
      }
    }
  }
  return static_cast<double>(total_spikes) / n / (n_steps * dt);
}

// Mean realized rate of a candidate network over a short probe window.
double probe_rate(const NetworkSpec& spec, const SimConfig& cfg, std::uint64_t seed) {
  int n_steps = std::min(spec.grid.n_steps(),
                         static_cast<int>(std::llround(30.0 / spec.grid.dt_sim)));
  std::vector<std::vector<int>> spikes;
  return run_spike_sim(spec, cfg, seed, n_steps, spikes, nullptr);
}

}  // namespace

std::vector<std::string> validate_config(const SimConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.n_neurons < 1) out.push_back("n_neurons must be >= 1");
  if (cfg.frac_excitatory < 0 || cfg.frac_excitatory > 1)
    out.push_back("frac_excitatory must lie in [0,1]");
  if (cfg.p_connect < 0 || cfg.p_connect > 1) out.push_back("p_connect must lie in [0,1]");
  if (!(cfg.target_rate > 0)) out.push_back("target_rate must be positive");
  if (!(cfg.v_b_mv > 0)) out.push_back("V_b must be positive");
  for (const auto* d : {&cfg.tau_c, &cfg.a_jump, &cfg.c_b, &cfg.sigma_c,
                        &cfg.tau_exc, &cfg.tau_inh, &cfg.tau_refr}) {
    if (!(d->mean > 0) || d->var < 0) out.push_back("distribution parameters must be positive");
  }
  if (!(cfg.k_d > 0)) out.push_back("K_d must be positive");
  if (cfg.gamma < 0 || cfg.sigma_f < 0) out.push_back("noise coefficients must be >= 0");
  return out;
}

double calibrate_baseline(double target_rate_hz, double dt) {
  double p = target_rate_hz * dt;
  if (p >= 1.0) throw Error("invalid-config", "target rate exceeds 1/dt");
  return std::log(-std::log1p(-p) / dt);
}

double solve_weight_for_rate(double b, double target_rate_hz, double dt) {
  if (!(target_rate_hz > 0) || target_rate_hz * dt >= 1.0 - 1e-12)
    throw Error("unreachable-probability",
                "target rate outside the range of the spiking nonlinearity");
  double r0 = spike_rate(b, dt);
  if (target_rate_hz == r0) return 0.0;
  double lo, hi;
  if (target_rate_hz > r0) {
    lo = 0.0;
    hi = 1.0;
    while (spike_rate(b + hi, dt) < target_rate_hz) {
      hi *= 2.0;
      if (hi > 256.0) throw Error("unreachable-probability", "no bracket above");
    }
  } else {
    hi = 0.0;
    lo = -1.0;
    while (spike_rate(b + lo, dt) > target_rate_hz) {
      lo *= 2.0;
      if (lo < -256.0) throw Error("unreachable-probability", "no bracket below");
    }
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (spike_rate(b + mid, dt) < target_rate_hz)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

double psp_to_weight(double v_psp_mv, double v_b_mv, double b, double tau_h, double dt) {
  if (!(v_b_mv > 0)) throw Error("invalid-config", "V_b must be positive");
  if (!(tau_h > 0)) throw Error("invalid-config", "tau_h must be positive");
  if (v_psp_mv == 0.0) return 0.0;
  double target = spike_rate(b, dt) + (v_psp_mv / v_b_mv) / tau_h;
  if (!(target > 0))
    throw Error("unreachable-probability",
                "inhibitory PSP drives the rate below zero");
  return solve_weight_for_rate(b, target, dt);
}

NetworkSpec generate_network(const SimConfig& cfg) {
  auto errors = validate_config(cfg);
  if (!errors.empty()) throw Error("invalid-config", errors.front());

  const int n = cfg.n_neurons;
  const double dt = cfg.grid.dt_sim;
  auto rng = make_engine(cfg.seed, 0xbeef);

  NetworkSpec spec;
  spec.grid = cfg.grid;
  spec.kinetics.tau_h = cfg.tau_h_shared;
  spec.kinetics.sigma_h = cfg.sigma_h;
  spec.w = Mat(n, n, 0.0);
  spec.tau_syn = Mat(n, n, cfg.tau_h_shared);

  double base_rate = cfg.frac_command > 0 ? cfg.command_base_rate : cfg.target_rate;
  double b = calibrate_baseline(base_rate, dt);

  std::vector<std::uint8_t> excit(n);
  for (int j = 0; j < n; ++j)
    excit[j] = std::uniform_real_distribution<>(0, 1)(rng) < cfg.frac_excitatory;

  // strong-coupling component: the first n_cmd neurons become "command"
  // cells with dense strong excitatory outputs
  int n_cmd = cfg.frac_command > 0
                  ? std::max(1, static_cast<int>(std::ceil(cfg.frac_command * n)))
                  : 0;
  for (int j = 0; j < n_cmd; ++j) excit[j] = 1;

  std::vector<double> jitter(n, 1.0);
  if (cfg.tau_mode == TauMode::jitter)
    for (int j = 0; j < n; ++j)
      jitter[j] = 1.0 + cfg.tau_jitter_frac *
                            std::uniform_real_distribution<>(-1, 1)(rng);

  // synapse decay times
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      switch (cfg.tau_mode) {
        case TauMode::shared: spec.tau_syn.at(i, j) = cfg.tau_h_shared; break;
        case TauMode::by_type:
          spec.tau_syn.at(i, j) = draw_trunc_normal(excit[j] ? cfg.tau_exc : cfg.tau_inh, rng);
          break;
        case TauMode::jitter:
          spec.tau_syn.at(i, j) = cfg.tau_h_shared * jitter[j];
          break;
      }
    }
  }

  // connectivity: amplitude draws in mV, converted after balancing
  Mat amp(n, n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (std::uniform_real_distribution<>(0, 1)(rng) >= cfg.p_connect) continue;
      amp.at(i, j) = excit[j] ? draw_exponential(cfg.psp_exc_mean_mv, rng)
                              : -draw_exponential(cfg.psp_inh_mean_mv, rng);
    }
  }

  Mat cmd_edge(n, n, 0.0);
  for (int j = 0; j < n_cmd; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      if (std::uniform_real_distribution<>(0, 1)(rng) < cfg.p_command_connect)
        cmd_edge.at(i, j) = 1.0;
    }
  }

  // intrinsics
  spec.neurons.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& p = spec.neurons[i];
    p.b = b;
    p.tau_c = draw_trunc_normal(cfg.tau_c, rng);
    p.a_jump = draw_trunc_normal(cfg.a_jump, rng);
    p.c_b = draw_trunc_normal(cfg.c_b, rng);
    p.sigma_c = draw_trunc_normal(cfg.sigma_c, rng);
    p.gamma = cfg.gamma;
    p.sigma_f = cfg.sigma_f;
    p.k_d = cfg.k_d;
    spec.tau_syn.at(i, i) = draw_trunc_normal(cfg.tau_refr, rng);
  }

  const double r0 = spike_rate(b, dt);
  auto convert = [&](double amp_mv, double tau) {
    double target = r0 + (amp_mv / cfg.v_b_mv) / tau;
    if (target < cfg.inh_floor_frac * r0) target = cfg.inh_floor_frac * r0;
    double cap = 0.999 / dt;
    if (target > cap) target = cap;
    return solve_weight_for_rate(b, target, dt);
  };

  auto fill_weights = [&](double inh_scale, double cmd_amp_mv) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) {
          spec.w.at(i, i) = solve_weight_for_rate(
              b, std::max(1e-4, (1.0 - cfg.refractory_suppression)) * r0, dt);
          continue;
        }
        double a = amp.at(i, j);
        if (a < 0) a *= inh_scale;
        if (cmd_edge.at(i, j) > 0) a = std::max(a, 0.0) + cmd_amp_mv;
        spec.w.at(i, j) = a == 0.0 ? 0.0 : convert(a, spec.tau_syn.at(i, j));
      }
    }
  };

  bool has_inh = false;
  for (double a : amp.v) has_inh |= a < 0;

  double inh_scale = 1.0, cmd_amp = 0.0;

  if (n_cmd > 0) {
    // pick the strong-output amplitude so the population runs near target_rate
    double lo = 0.1, hi = 0.5;
    fill_weights(1.0, hi);
    while (probe_rate(spec, cfg, hash_tags(cfg.seed, 77)) < cfg.target_rate && hi < 64) {
      hi *= 2.0;
      fill_weights(1.0, hi);
    }
    for (int it = 0; it < 10; ++it) {
      cmd_amp = 0.5 * (lo + hi);
      fill_weights(1.0, cmd_amp);
      double r = probe_rate(spec, cfg, hash_tags(cfg.seed, 77));
      if (r < cfg.target_rate)
        lo = cmd_amp;
      else
        hi = cmd_amp;
    }
    cmd_amp = 0.5 * (lo + hi);
    fill_weights(1.0, cmd_amp);
  } else if (cfg.balance_inhibition && has_inh && cfg.p_connect > 0) {
    // one global factor on inhibitory amplitudes, bisected on realized rate
    double lo = 0.25, hi = 32.0;
    fill_weights(lo, 0);
    double r_lo = probe_rate(spec, cfg, hash_tags(cfg.seed, 78));
    if (r_lo > cfg.target_rate) {
      fill_weights(hi, 0);
      double r_hi = probe_rate(spec, cfg, hash_tags(cfg.seed, 78));
      if (r_hi < cfg.target_rate) {
        for (int it = 0; it < 9; ++it) {
          inh_scale = 0.5 * (lo + hi);
          fill_weights(inh_scale, 0);
          double r = probe_rate(spec, cfg, hash_tags(cfg.seed, 78));
          if (r > cfg.target_rate)
            lo = inh_scale;
          else
            hi = inh_scale;
        }
        inh_scale = 0.5 * (lo + hi);
      } else {
        inh_scale = hi;
      }
    } else {
      inh_scale = lo;
    }
    fill_weights(inh_scale, 0);
  } else {
    fill_weights(1.0, 0);
  }

  return spec;
}

std::vector<std::vector<int>> simulate_spikes(const NetworkSpec& spec,
                                              const SimConfig& cfg,
                                              std::uint64_t seed,
                                              std::vector<HiddenPath>* paths) {
  std::vector<std::vector<int>> spikes;
  run_spike_sim(spec, cfg, seed, spec.grid.n_steps(), spikes, paths);
  return spikes;
}

std::vector<double> simulate_calcium(const std::vector<std::uint8_t>& spikes,
                                     const NeuronIntrinsics& p, double dt,
                                     std::uint64_t seed, int neuron_tag) {
  std::vector<double> c(spikes.size());
  double cur = p.c_b;
  double sq = p.sigma_c * std::sqrt(dt);
  for (size_t t = 0; t < spikes.size(); ++t) {
    cur += (p.c_b - cur) * dt / p.tau_c + p.a_jump * spikes[t];
    if (p.sigma_c > 0) cur += sq * normal_at(seed, t, neuron_tag, 2);
    c[t] = cur;
  }
  return c;
}

std::vector<double> render_fluorescence(const std::vector<double>& calcium,
                                        const NeuronIntrinsics& p,
                                        const TimeGrid& grid, std::uint64_t seed,
                                        int neuron_tag) {
  const int nf = grid.n_frames();
  std::vector<double> f(nf);
  for (int t = 0; t < nf; ++t) {
    double c = calcium[static_cast<size_t>(t + 1) * grid.stride - 1];
    double s = hill(c, p.k_d);
    double var = p.gamma > 0 || p.sigma_f > 0 ? obs_variance(s, p.gamma, p.sigma_f) : 0.0;
    double noise = var > 0 ? std::sqrt(var) * normal_at(seed, t, neuron_tag, 3) : 0.0;
    f[t] = p.alpha * s + p.beta + noise;
  }
  return f;
}

SimOutput simulate(const SimConfig& cfg) {
  SimOutput out;
  out.spec = generate_network(cfg);
  const int n = cfg.n_neurons;
  const auto& grid = cfg.grid;

  std::vector<HiddenPath>* paths_ptr = nullptr;
  if (cfg.store_paths) {
    out.paths.resize(n);
    paths_ptr = &out.paths;
  }
  out.spike_steps = simulate_spikes(out.spec, cfg, hash_tags(cfg.seed, 1), paths_ptr);

  out.movie.grid = grid;
  out.movie.f = Mat(n, grid.n_frames());
  out.realized_rate.resize(n);

  parallel_for(n, [&](int i) {
    std::vector<std::uint8_t> dense(grid.n_steps(), 0);
    for (int t : out.spike_steps[i]) dense[t] = 1;
    auto calcium = simulate_calcium(dense, out.spec.neurons[i], grid.dt_sim,
                                    hash_tags(cfg.seed, 2), i);
    auto f = render_fluorescence(calcium, out.spec.neurons[i], grid,
                                 hash_tags(cfg.seed, 3), i);
    for (int t = 0; t < grid.n_frames(); ++t) out.movie.f.at(i, t) = f[t];
    out.realized_rate[i] = out.spike_steps[i].size() / grid.duration;
    if (cfg.store_paths) (*paths_ptr)[i].calcium = std::move(calcium);
  });
  return out;
}

std::vector<double> history_filter(const std::vector<std::uint8_t>& spikes,
                                   double tau_h, double dt) {
  std::vector<double> h(spikes.size());
  double decay = 1.0 - dt / tau_h;
  double cur = 0.0;
  for (size_t t = 0; t < spikes.size(); ++t) {
    h[t] = cur;  // h(t) depends on spikes up to t-1
    cur = decay * cur + spikes[t];
  }
  return h;
}

Mat bin_spikes(const std::vector<std::vector<int>>& spike_steps, const TimeGrid& grid) {
  const int n = static_cast<int>(spike_steps.size());
  const int nf = grid.n_frames();
  Mat out(n, nf, 0.0);
  for (int i = 0; i < n; ++i)
    for (int t : spike_steps[i]) {
      int frame = t / grid.stride;
      if (frame < nf) out.at(i, frame) = 1.0;
    }
  return out;
}

}  // namespace neurocal
