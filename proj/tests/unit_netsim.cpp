#include <doctest.h>

#include <cmath>
#include <numeric>

#include "neurocal/errors.hpp"
#include "neurocal/metrics.hpp"
#include "neurocal/model.hpp"
#include "neurocal/netsim.hpp"

using namespace neurocal;

namespace {
NetworkSpec uncoupled_spec(int n, double rate_hz, const TimeGrid& grid) {
  NetworkSpec spec;
  spec.grid = grid;
  spec.w = Mat(n, n, 0.0);
  spec.tau_syn = Mat(n, n, 0.01);
  spec.neurons.resize(n);
  for (auto& p : spec.neurons) p.b = calibrate_baseline(rate_hz, grid.dt_sim);
  return spec;
}
}  // namespace

TEST_SUITE("psp conversion") {
  TEST_CASE("zero PSP maps to zero weight") {
    CHECK(psp_to_weight(0.0, 15.0, 1.6, 0.01, 1e-3) == 0.0);
  }

  TEST_CASE("returned weight solves the rate-increment equation") {
    double dt = 1e-3, tau = 0.01;
    double b = calibrate_baseline(5.0, dt);
    double w = psp_to_weight(0.5, 15.0, b, tau, dt);
    CHECK(w > 0);
    // independent check: evaluate the defining equation at the root
    double lhs = spike_rate(b + w, dt) - spike_rate(b, dt);
    double rhs = (0.5 / 15.0) / tau;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }

  TEST_CASE("monotone in the PSP amplitude") {
    double dt = 1e-3, tau = 0.01;
    double b = calibrate_baseline(5.0, dt);
    CHECK(psp_to_weight(1.0, 15.0, b, tau, dt) > psp_to_weight(0.5, 15.0, b, tau, dt));
  }

  TEST_CASE("unreachable targets are reported") {
    double dt = 1e-3;
    double b = calibrate_baseline(5.0, dt);
    // rate cannot go negative
    CHECK_THROWS_AS(psp_to_weight(-5.0, 15.0, b, 0.01, dt), Error);
    // rate cannot exceed 1/dt
    CHECK_THROWS_AS(psp_to_weight(2000.0, 15.0, b, 0.01, dt), Error);
  }

  TEST_CASE("baseline calibration inverts the nonlinearity") {
    for (double r : {1.0, 5.0, 20.0})
      CHECK(spike_rate(calibrate_baseline(r, 1e-3), 1e-3) == doctest::Approx(r));
  }
}

TEST_SUITE("network generation") {
  TEST_CASE("p_connect = 0 leaves the off-diagonal empty") {
    SimConfig cfg;
    cfg.n_neurons = 12;
    cfg.p_connect = 0.0;
    cfg.grid = make_grid(1e-3, 1.0 / 60.0, 2.0);
    auto spec = generate_network(cfg);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        if (i != j) CHECK(spec.w.at(i, j) == 0.0);
    // diagonal carries the refractory coupling
    for (int i = 0; i < 12; ++i) CHECK(spec.w.at(i, i) < 0.0);
  }

  TEST_CASE("all-excitatory network has positive couplings") {
    SimConfig cfg;
    cfg.n_neurons = 15;
    cfg.frac_excitatory = 1.0;
    cfg.grid = make_grid(1e-3, 1.0 / 60.0, 2.0);
    cfg.seed = 9;
    auto spec = generate_network(cfg);
    int nonzero = 0;
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 15; ++j)
        if (i != j && spec.w.at(i, j) != 0.0) {
          CHECK(spec.w.at(i, j) > 0);
          ++nonzero;
        }
    CHECK(nonzero > 0);
  }

  TEST_CASE("connection count lands in the binomial 99% interval") {
    SimConfig cfg;
    cfg.n_neurons = 50;
    cfg.p_connect = 0.1;
    cfg.grid = make_grid(1e-3, 1.0 / 60.0, 2.0);
    cfg.seed = 21;
    cfg.balance_inhibition = false;  // keep the count test independent of rates
    auto spec = generate_network(cfg);
    int count = 0;
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 50; ++j)
        if (i != j && spec.w.at(i, j) != 0.0) ++count;
    // Binomial(2450, 0.1): mean 245, sd 14.85, 99% ~ [207, 283]
    CHECK(count >= 207);
    CHECK(count <= 283);
  }

  TEST_CASE("Dale consistency in the ground truth") {
    SimConfig cfg;
    cfg.n_neurons = 30;
    cfg.grid = make_grid(1e-3, 1.0 / 60.0, 2.0);
    cfg.seed = 4;
    auto spec = generate_network(cfg);
    for (int j = 0; j < 30; ++j) {
      bool pos = false, neg = false;
      for (int i = 0; i < 30; ++i) {
        if (i == j) continue;
        if (spec.w.at(i, j) > 0) pos = true;
        if (spec.w.at(i, j) < 0) neg = true;
      }
      CHECK_FALSE((pos && neg));
    }
  }
}

TEST_SUITE("spike simulation") {
  TEST_CASE("uncoupled rates match f(b)/dt within 3 standard errors") {
    auto grid = make_grid(1e-3, 1.0 / 60.0, 600.0);
    auto spec = uncoupled_spec(5, 5.0, grid);
    SimConfig cfg;
    cfg.n_neurons = 5;
    cfg.grid = grid;
    auto spikes = simulate_spikes(spec, cfg, 42);
    double p = spike_prob(spec.neurons[0].b, grid.dt_sim);
    double n_bins = grid.n_steps();
    double se_rate = std::sqrt(p * (1 - p) / n_bins) / grid.dt_sim;
    for (int i = 0; i < 5; ++i) {
      double rate = spikes[i].size() / grid.duration;
      CHECK(std::abs(rate - 5.0) < 3 * se_rate);
    }
  }

  TEST_CASE("history recursion unrolls exactly after a single spike") {
    std::vector<std::uint8_t> spikes(20, 0);
    spikes[3] = 1;
    double tau = 0.01, dt = 1e-3;
    auto h = history_filter(spikes, tau, dt);
    for (int k = 0; k <= 3; ++k) CHECK(h[k] == 0.0);
    for (int k = 1; k + 3 < 20; ++k)
      CHECK(h[3 + k] == doctest::Approx(std::pow(1.0 - dt / tau, k - 1)).epsilon(1e-12));
  }

  TEST_CASE("default network fires near 5 Hz") {
    SimConfig cfg;
    cfg.n_neurons = 25;
    cfg.grid = make_grid(1e-3, 1.0 / 60.0, 120.0);
    cfg.seed = 17;
    auto out = simulate(cfg);
    double mean_rate = 0;
    for (double r : out.realized_rate) mean_rate += r;
    mean_rate /= cfg.n_neurons;
    CHECK(mean_rate == doctest::Approx(5.0).epsilon(0.3));
  }

  TEST_CASE("identical config and seed give bit-identical output") {
    SimConfig cfg;
    cfg.n_neurons = 8;
    cfg.grid = make_grid(1e-3, 1.0 / 30.0, 20.0);
    cfg.seed = 33;
    auto a = simulate(cfg);
    auto b = simulate(cfg);
    CHECK(a.spike_steps == b.spike_steps);
    REQUIRE(a.movie.f.v.size() == b.movie.f.v.size());
    for (size_t k = 0; k < a.movie.f.v.size(); ++k)
      CHECK(a.movie.f.v[k] == b.movie.f.v[k]);
    for (size_t k = 0; k < a.spec.w.v.size(); ++k)
      CHECK(a.spec.w.v[k] == b.spec.w.v[k]);
  }
}

TEST_SUITE("calcium and fluorescence") {
  TEST_CASE("no spikes and no noise: calcium stays at baseline") {
    NeuronIntrinsics p;
    p.sigma_c = 0;
    std::vector<std::uint8_t> spikes(100, 0);
    auto c = simulate_calcium(spikes, p, 1e-3, 1, 0);
    for (double x : c) CHECK(x == doctest::Approx(p.c_b).epsilon(1e-12));
  }

  TEST_CASE("single spike: jump A then geometric decay") {
    NeuronIntrinsics p;
    p.sigma_c = 0;
    p.c_b = 10;
    p.a_jump = 50;
    p.tau_c = 0.2;
    double dt = 1e-3;
    std::vector<std::uint8_t> spikes(50, 0);
    spikes[5] = 1;
    auto c = simulate_calcium(spikes, p, dt, 1, 0);
    CHECK(c[5] == doctest::Approx(10.0 + 50.0).epsilon(1e-12));
    double decay = 1.0 - dt / p.tau_c;
    for (int k = 6; k < 50; ++k)
      CHECK(c[k] - 10.0 == doctest::Approx((c[k - 1] - 10.0) * decay).epsilon(1e-12));
  }

  TEST_CASE("stationary variance approaches the OU limit") {
    NeuronIntrinsics p;
    p.sigma_c = 2.0;
    p.tau_c = 0.2;
    p.c_b = 20;
    double dt = 1e-3;
    std::vector<std::uint8_t> spikes(2000000, 0);
    auto c = simulate_calcium(spikes, p, dt, 77, 0);
    double m = 0, v = 0;
    size_t burn = 10000;
    for (size_t t = burn; t < c.size(); ++t) m += c[t];
    m /= (c.size() - burn);
    for (size_t t = burn; t < c.size(); ++t) v += (c[t] - m) * (c[t] - m);
    v /= (c.size() - burn - 1);
    double target = p.sigma_c * p.sigma_c * p.tau_c / 2;  // = 0.4
    CHECK(v == doctest::Approx(target).epsilon(0.05));
  }

  TEST_CASE("noiseless rendering is exactly alpha S + beta") {
    NeuronIntrinsics p;
    p.sigma_c = 0;
    p.gamma = 0;
    p.sigma_f = 0;
    p.alpha = 2.0;
    p.beta = 0.5;
    auto grid = make_grid(1e-3, 1e-2, 0.2);
    std::vector<std::uint8_t> spikes(grid.n_steps(), 0);
    spikes[40] = 1;
    auto c = simulate_calcium(spikes, p, grid.dt_sim, 1, 0);
    auto f = render_fluorescence(c, p, grid, 1, 0);
    for (int t = 0; t < grid.n_frames(); ++t) {
      double cs = c[(t + 1) * grid.stride - 1];
      CHECK(f[t] == doctest::Approx(2.0 * hill(cs, p.k_d) + 0.5).epsilon(1e-12));
    }
  }
}
