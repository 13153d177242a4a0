#include "neurocal/mstep.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "neurocal/errors.hpp"
#include "neurocal/model.hpp"
#include "neurocal/parallel.hpp"
#include "neurocal/rng.hpp"

namespace neurocal {

namespace {

// d^2/dJ^2 of [p log f + (1-p) log(1-f)]; see spike_loglik_slope.
double spike_loglik_curv(double p, const SpikeNonlin& s) {
  double r = s.u < 1e-12 ? 1.0 + 0.5 * s.u : s.u / s.f;
  return r * ((1.0 - r * (1.0 - s.f)) * (p - s.f) - (1.0 - s.f) * s.u);
}

// Dense SPD solve (Cholesky), in place on a copy. Returns false if the
// matrix is not positive definite enough.
bool spd_solve(std::vector<double> a, std::vector<double>& x, int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (!(s > 0)) return false;
        a[i * n + i] = std::sqrt(s);
      } else {
        a[i * n + j] = s / a[j * n + j];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = x[i];
    for (int k = 0; k < i; ++k) s -= a[i * n + k] * x[k];
    x[i] = s / a[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= a[k * n + i] * x[k];
    x[i] = s / a[i * n + i];
  }
  return true;
}

void coord_bounds(const PriorConfig& prior, int self_index, int j, double& lo,
                  double& hi) {
  lo = -prior.l_cap;
  hi = prior.l_cap;
  if (prior.dale_enabled && j != self_index &&
      j < static_cast<int>(prior.a.size())) {
    if (prior.a[j] > 0) lo = 0.0;
    if (prior.a[j] < 0) hi = 0.0;
  }
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace

double obs_loglik(const ObsStats& st, const ObsParams& q) {
  double acc = 0;
  for (size_t k = 0; k < st.s.size(); ++k) {
    double var = obs_variance(st.s[k], q.gamma, q.sigma_f);
    acc += st.p[k] * log_normal_pdf(st.f[k], q.alpha * st.s[k] + q.beta, var);
  }
  return acc;
}

ObsParams fit_observation_params(const ObsStats& st, ObsParams init) {
  const size_t n = st.s.size();
  double wsum = 0, smean = 0;
  for (size_t k = 0; k < n; ++k) {
    wsum += st.p[k];
    smean += st.p[k] * st.s[k];
  }
  if (!(wsum > 0) || n < 2) throw Error("unidentifiable-scale", "no support points");
  smean /= wsum;
  double svar = 0;
  for (size_t k = 0; k < n; ++k) svar += st.p[k] * (st.s[k] - smean) * (st.s[k] - smean);
  svar /= wsum;
  if (svar < 1e-14 * (smean * smean + 1.0))
    throw Error("unidentifiable-scale", "all S(C) support points coincide");

  ObsParams q = init;
  if (!(q.gamma > 0) && !(q.sigma_f > 0)) q.sigma_f = 1e-3;
  double ll = obs_loglik(st, q);

  for (int it = 0; it < 200; ++it) {
    ObsParams prev = q;

    // (alpha, beta) by weighted least squares; weights fixed given (gamma, sigma_F)
    double a11 = 0, a12 = 0, a22 = 0, r1 = 0, r2 = 0;
    for (size_t k = 0; k < n; ++k) {
      double u = st.p[k] / obs_variance(st.s[k], q.gamma, q.sigma_f);
      a11 += u * st.s[k] * st.s[k];
      a12 += u * st.s[k];
      a22 += u;
      r1 += u * st.s[k] * st.f[k];
      r2 += u * st.f[k];
    }
    double det = a11 * a22 - a12 * a12;
    if (std::abs(det) > 1e-300) {
      double alpha = (r1 * a22 - r2 * a12) / det;
      double beta = (a11 * r2 - a12 * r1) / det;
      if (alpha < 0) {
        alpha = 0;
        beta = r2 / a22;
      }
      q.alpha = alpha;
      q.beta = beta;
      ll = obs_loglik(st, q);
    }

    // (gamma, sigma_F^2) from the residual second moments
    double b11 = 0, b12 = 0, b22 = 0, c1 = 0, c2 = 0;
    for (size_t k = 0; k < n; ++k) {
      double sc = std::clamp(st.s[k], 0.0, 1.0);
      double e = st.f[k] - q.alpha * st.s[k] - q.beta;
      double e2 = e * e;
      b11 += st.p[k] * sc * sc;
      b12 += st.p[k] * sc;
      b22 += st.p[k];
      c1 += st.p[k] * sc * e2;
      c2 += st.p[k] * e2;
    }
    double detb = b11 * b22 - b12 * b12;
    double g_new = q.gamma, v_new = q.sigma_f * q.sigma_f;
    if (std::abs(detb) > 1e-300) {
      g_new = (c1 * b22 - c2 * b12) / detb;
      v_new = (b11 * c2 - b12 * c1) / detb;
    }
    if (g_new < 0) {
      g_new = 0;
      v_new = c2 / b22;
    }
    if (v_new < 0) {
      v_new = 0;
      g_new = b11 > 0 ? std::max(0.0, c1 / b11) : 0.0;
    }
    // accept the moment update only if it does not reduce the likelihood
    ObsParams cand = q;
    double step = 1.0;
    for (int ls = 0; ls < 24; ++ls) {
      cand.gamma = q.gamma + step * (g_new - q.gamma);
      double v = q.sigma_f * q.sigma_f + step * (v_new - q.sigma_f * q.sigma_f);
      cand.sigma_f = std::sqrt(std::max(v, 0.0));
      double cll = obs_loglik(st, cand);
      if (cll >= ll - 1e-12 * std::abs(ll)) {
        q = cand;
        ll = cll;
        break;
      }
      step *= 0.5;
    }

    double rel = 0;
    auto upd = [&](double a, double b2) {
      rel = std::max(rel, std::abs(a - b2) / std::max({std::abs(a), std::abs(b2), 1e-12}));
    };
    upd(q.alpha, prev.alpha);
    upd(q.beta, prev.beta);
    upd(q.gamma, prev.gamma);
    upd(q.sigma_f, prev.sigma_f);
    if (rel < 1e-6) break;
  }
  return q;
}

namespace {

struct CalQuad {
  double p[3][3];
  double q[3];
  double c;
  double n_pairs;
  double value(const double x[3]) const {
    double acc = c;
    for (int a = 0; a < 3; ++a) {
      acc -= 2 * q[a] * x[a];
      for (int b = 0; b < 3; ++b) acc += x[a] * p[a][b] * x[b];
    }
    return acc;
  }
};

CalQuad quad_from_gram(const CalciumGram& g) {
  CalQuad cq{};
  for (int a = 0; a < 3; ++a) {
    cq.q[a] = g.g[a][3];
    for (int b = 0; b < 3; ++b) cq.p[a][b] = g.g[a][b];
  }
  cq.c = g.g[3][3];
  cq.n_pairs = g.n_pairs;
  return cq;
}

bool solve3(double m[3][3], double r[3], double out[3]) {
  double a[3][4];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a[i][j] = m[i][j];
    a[i][3] = r[i];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int i = col + 1; i < 3; ++i)
      if (std::abs(a[i][col]) > std::abs(a[piv][col])) piv = i;
    if (std::abs(a[piv][col]) < 1e-300) return false;
    std::swap(a[piv], a[col]);
    for (int i = 0; i < 3; ++i) {
      if (i == col) continue;
      double fac = a[i][col] / a[col][col];
      for (int j = col; j < 4; ++j) a[i][j] -= fac * a[col][j];
    }
  }
  for (int i = 0; i < 3; ++i) out[i] = a[i][3] / a[i][i];
  return true;
}

}  // namespace

double cal_loglik(const CalciumGram& gram, const CalParams& q, double dt) {
  CalQuad cq = quad_from_gram(gram);
  double a = 1.0 - dt / q.tau_c;
  double x[3] = {a, q.a_jump, q.c_b * dt / q.tau_c};
  double var = std::max(q.sigma_c * q.sigma_c * dt, 1e-300);
  return -0.5 * (cq.n_pairs * (kLog2Pi + std::log(var)) + cq.value(x) / var);
}

CalParams fit_calcium_params(const CalciumGram& gram, double dt, CalParams init) {
  if (!(gram.n_pairs > 0)) throw Error("numerical-stats", "empty calcium stats");
  for (int a = 0; a < 4; ++a) {
    if (!std::isfinite(gram.g[a][a]) || gram.g[a][a] < -1e-9)
      throw Error("numerical-stats", "calcium moment matrix is not PSD");
  }
  CalQuad cq = quad_from_gram(gram);

  const double a_max = 1.0 - 1e-6;
  double best[3] = {1.0 - dt / init.tau_c, init.a_jump, init.c_b * dt / init.tau_c};
  best[0] = std::clamp(best[0], 0.0, a_max);
  best[1] = std::max(best[1], 0.0);
  best[2] = std::max(best[2], 0.0);
  double best_val = cq.value(best);

  // ridge keeps unidentifiable directions (e.g. no spikes) at their
  // warm-start values instead of failing
  double ridge = 0;
  for (int a = 0; a < 3; ++a) ridge = std::max(ridge, cq.p[a][a]);
  ridge = ridge * 1e-12 + 1e-300;

  // enumerate active sets: each variable free / at lower bound, a also at cap
  for (int st0 = 0; st0 < 3; ++st0) {
    for (int st1 = 0; st1 < 2; ++st1) {
      for (int st2 = 0; st2 < 2; ++st2) {
        double fixed[3] = {st0 == 1 ? 0.0 : (st0 == 2 ? a_max : -1),
                           st1 == 1 ? 0.0 : -1, st2 == 1 ? 0.0 : -1};
        bool is_free[3] = {st0 == 0, st1 == 0, st2 == 0};
        int idx[3], nf = 0;
        for (int a = 0; a < 3; ++a)
          if (is_free[a]) idx[nf++] = a;
        double x[3] = {fixed[0] < 0 ? 0 : fixed[0], fixed[1] < 0 ? 0 : fixed[1],
                       fixed[2] < 0 ? 0 : fixed[2]};
        if (nf > 0) {
          double m[3][3] = {}, r[3] = {};
          for (int a = 0; a < nf; ++a) {
            r[a] = cq.q[idx[a]];
            for (int c = 0; c < 3; ++c)
              if (!is_free[c]) r[a] -= cq.p[idx[a]][c] * x[c];
            for (int b = 0; b < nf; ++b) m[a][b] = cq.p[idx[a]][idx[b]];
            m[a][a] += ridge;
          }
          double sol[3];
          double m3[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
          double r3[3] = {0, 0, 0};
          for (int a = 0; a < nf; ++a) {
            r3[a] = r[a];
            for (int b = 0; b < nf; ++b) m3[a][b] = m[a][b];
          }
          if (!solve3(m3, r3, sol)) continue;
          for (int a = 0; a < nf; ++a) x[idx[a]] = sol[a];
        }
        if (x[0] < -1e-12 || x[0] > a_max + 1e-12 || x[1] < -1e-12 || x[2] < -1e-12)
          continue;
        x[0] = std::clamp(x[0], 0.0, a_max);
        x[1] = std::max(x[1], 0.0);
        x[2] = std::max(x[2], 0.0);
        double val = cq.value(x);
        if (val < best_val) {
          best_val = val;
          best[0] = x[0];
          best[1] = x[1];
          best[2] = x[2];
        }
      }
    }
  }

  CalParams out;
  out.tau_c = dt / (1.0 - best[0]);
  out.a_jump = best[1];
  out.c_b = best[0] < 1.0 ? best[2] / (1.0 - best[0]) : 0.0;
  double resid = std::max(best_val, 0.0) / gram.n_pairs;
  out.sigma_c = std::sqrt(std::max(resid / dt, 1e-12));
  if (!std::isfinite(out.tau_c) || !std::isfinite(out.sigma_c))
    throw Error("numerical-stats", "calcium fit produced non-finite parameters");
  return out;
}

double spike_objective(const Mat& design, std::span<const double> p, double dt,
                       double b, std::span<const double> w, double lambda) {
  const int T = design.rows, N = design.cols;
  double acc = 0;
  for (int t = 0; t < T; ++t) {
    const double* row = design.row(t);
    double J = b;
    for (int j = 0; j < N; ++j) J += row[j] * w[j];
    auto s = spike_nonlin(J, dt);
    acc += p[t] * s.log_f + (1.0 - p[t]) * s.log_1mf;
  }
  double pen = 0;
  for (int j = 0; j < N; ++j) pen += std::abs(w[j]);
  return (acc - lambda * pen) / T;
}

void spike_gradient(const Mat& design, std::span<const double> p, double dt,
                    double b, std::span<const double> w, double* grad_b,
                    std::span<double> grad_w) {
  const int T = design.rows, N = design.cols;
  *grad_b = 0;
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  for (int t = 0; t < T; ++t) {
    const double* row = design.row(t);
    double J = b;
    for (int j = 0; j < N; ++j) J += row[j] * w[j];
    double s = spike_loglik_slope(p[t], spike_nonlin(J, dt));
    *grad_b += s;
    for (int j = 0; j < N; ++j) grad_w[j] += s * row[j];
  }
  *grad_b /= T;
  for (int j = 0; j < N; ++j) grad_w[j] /= T;
}

SpikeFitResult fit_spiking_params(const Mat& design, std::span<const double> p,
                                  double dt, const PriorConfig& prior,
                                  int self_index, double b0,
                                  std::span<const double> w0) {
  const int T = design.rows, N = design.cols;
  double psum = 0;
  for (int t = 0; t < T; ++t) psum += p[t];
  if (psum >= T - 1e-9 || psum <= 1e-12)
    throw Error("degenerate-likelihood",
                "spike marginals are all-one or all-zero; drive is unbounded");

  const double pen = prior.lambda / T;
  std::vector<double> lo(N), hi(N);
  for (int j = 0; j < N; ++j) coord_bounds(prior, self_index, j, lo[j], hi[j]);

  std::vector<double> w(w0.begin(), w0.end());
  w.resize(N, 0.0);
  for (int j = 0; j < N; ++j) w[j] = std::clamp(w[j], lo[j], hi[j]);
  double b = b0;

  // smooth part value+gradient at (b, w)
  std::vector<double> smooth_grad(N);
  double smooth_gb = 0;
  auto eval_smooth = [&](double bb, const std::vector<double>& ww, bool want_grad,
                         double* gb, std::vector<double>* gw) {
    double acc = 0;
    if (want_grad) {
      *gb = 0;
      std::fill(gw->begin(), gw->end(), 0.0);
    }
    for (int t = 0; t < T; ++t) {
      const double* row = design.row(t);
      double J = bb;
      for (int j = 0; j < N; ++j) J += row[j] * ww[j];
      auto s = spike_nonlin(J, dt);
      acc += p[t] * s.log_f + (1.0 - p[t]) * s.log_1mf;
      if (want_grad) {
        double sl = spike_loglik_slope(p[t], s);
        *gb += sl;
        for (int j = 0; j < N; ++j) (*gw)[j] += sl * row[j];
      }
    }
    if (want_grad) {
      *gb /= T;
      for (int j = 0; j < N; ++j) (*gw)[j] /= T;
    }
    return acc / T;
  };
  auto penalty = [&](const std::vector<double>& ww) {
    double s = 0;
    for (double x : ww) s += std::abs(x);
    return pen * s;
  };

  double step = 1.0;
  double g_val = eval_smooth(b, w, true, &smooth_gb, &smooth_grad);
  double obj = g_val - penalty(w);

  // momentum state
  std::vector<double> w_prev = w, y_w = w;
  double b_prev = b, y_b = b;
  double tk = 1.0;

  std::vector<double> cand(N), gy(N);
  int it = 0;
  const int max_iter = 20000;
  double kkt = 1e300;

  auto kkt_residual = [&](double gb, const std::vector<double>& gw) {
    double r = std::abs(gb);
    double t_ref = 1.0;
    for (int j = 0; j < N; ++j) {
      double moved = std::clamp(soft_threshold(w[j] + t_ref * gw[j], t_ref * pen),
                                lo[j], hi[j]);
      r = std::max(r, std::abs(moved - w[j]) / t_ref);
    }
    return r;
  };

  // ---- proximal gradient phase (FISTA with restart) ----
  for (; it < max_iter; ++it) {
    double gyb;
    double gy_val = eval_smooth(y_b, y_w, true, &gyb, &gy);
    bool accepted = false;
    double cb = b;
    for (int ls = 0; ls < 60 && !accepted; ++ls) {
      cb = y_b + step * gyb;
      for (int j = 0; j < N; ++j)
        cand[j] = std::clamp(soft_threshold(y_w[j] + step * gy[j], step * pen),
                             lo[j], hi[j]);
      double cval = eval_smooth(cb, cand, false, nullptr, nullptr);
      double dd = (cb - y_b) * (cb - y_b);
      for (int j = 0; j < N; ++j) dd += (cand[j] - y_w[j]) * (cand[j] - y_w[j]);
      double lin = gy_val + gyb * (cb - y_b);
      for (int j = 0; j < N; ++j) lin += gy[j] * (cand[j] - y_w[j]);
      if (cval >= lin - dd / (2 * step) - 1e-15) {
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) break;

    double new_obj = eval_smooth(cb, cand, false, nullptr, nullptr) - penalty(cand);
    if (new_obj < obj) {
      // restart momentum from the best point
      tk = 1.0;
      y_b = b;
      y_w = w;
      continue;
    }
    w_prev = w;
    b_prev = b;
    w = cand;
    b = cb;
    obj = new_obj;
    double tk1 = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    double mom = (tk - 1.0) / tk1;
    tk = tk1;
    y_b = b + mom * (b - b_prev);
    for (int j = 0; j < N; ++j) y_w[j] = w[j] + mom * (w[j] - w_prev[j]);
    step *= 1.1;

    if (it % 10 == 0) {
      g_val = eval_smooth(b, w, true, &smooth_gb, &smooth_grad);
      kkt = kkt_residual(smooth_gb, smooth_grad);
      if (kkt < 1e-6) break;
      if (kkt < 1e-3) break;  // hand off to the Newton polish
    }
  }

  // ---- active-set Newton polish ----
  for (int polish = 0; polish < 60; ++polish) {
    g_val = eval_smooth(b, w, true, &smooth_gb, &smooth_grad);
    kkt = kkt_residual(smooth_gb, smooth_grad);
    if (kkt < 1e-7) break;

    // free set: b plus coordinates off their bounds / off zero, plus zero
    // coordinates whose gradient beats the penalty
    std::vector<int> free_idx;
    for (int j = 0; j < N; ++j) {
      bool at_zero = w[j] == 0.0;
      bool at_lo = w[j] <= lo[j] + 1e-14 && lo[j] != 0.0;
      bool at_hi = w[j] >= hi[j] - 1e-14 && hi[j] != 0.0;
      if (lo[j] == 0.0 && hi[j] == 0.0) continue;
      if (at_zero) {
        if (std::abs(smooth_grad[j]) > pen + 1e-12) free_idx.push_back(j);
      } else if (at_lo || at_hi) {
        double sign_out = at_hi ? 1.0 : -1.0;
        double sub = smooth_grad[j] - pen * (w[j] > 0 ? 1 : (w[j] < 0 ? -1 : 0));
        if (sub * sign_out < 0) free_idx.push_back(j);
      } else {
        free_idx.push_back(j);
      }
    }
    const int nf = static_cast<int>(free_idx.size()) + 1;  // + intercept

    // Hessian of the smooth part on the free set (negated -> SPD)
    std::vector<double> h(static_cast<size_t>(nf) * nf, 0.0);
    std::vector<double> rhs(nf, 0.0);
    std::vector<double> rowv(nf);
    for (int t = 0; t < T; ++t) {
      const double* row = design.row(t);
      double J = b;
      for (int j = 0; j < N; ++j) J += row[j] * w[j];
      auto s = spike_nonlin(J, dt);
      double curv = -spike_loglik_curv(p[t], s);  // >= 0 by concavity
      if (curv < 0) curv = 0;
      rowv[0] = 1.0;
      for (int a = 1; a < nf; ++a) rowv[a] = row[free_idx[a - 1]];
      for (int a = 0; a < nf; ++a)
        for (int c = 0; c <= a; ++c) h[a * nf + c] += curv * rowv[a] * rowv[c];
    }
    for (int a = 0; a < nf; ++a) {
      for (int c = a + 1; c < nf; ++c) h[a * nf + c] = h[c * nf + a];
      h[a * nf + a] += 1e-12 * (h[a * nf + a] + 1.0);
    }
    for (auto& x : h) x /= T;

    rhs[0] = smooth_gb;
    for (int a = 1; a < nf; ++a) {
      int j = free_idx[a - 1];
      double sgn = w[j] > 0 ? 1.0 : (w[j] < 0 ? -1.0 : (smooth_grad[j] > 0 ? 1.0 : -1.0));
      rhs[a] = smooth_grad[j] - pen * sgn;
    }
    std::vector<double> delta = rhs;
    if (!spd_solve(h, delta, nf)) break;

    // cap the step at the first zero-crossing or bound
    double cap = 1.0;
    for (int a = 1; a < nf; ++a) {
      int j = free_idx[a - 1];
      double d = delta[a];
      if (d == 0) continue;
      double limit = cap;
      if (w[j] != 0.0 && (w[j] + d * cap) * w[j] < 0) limit = -w[j] / d;
      double tgt = w[j] + d * limit;
      if (tgt > hi[j]) limit = (hi[j] - w[j]) / d;
      if (tgt < lo[j]) limit = (lo[j] - w[j]) / d;
      cap = std::min(cap, std::max(limit, 0.0));
    }

    double stepn = cap;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      double nb = b + stepn * delta[0];
      cand = w;
      for (int a = 1; a < nf; ++a) {
        int j = free_idx[a - 1];
        cand[j] = std::clamp(w[j] + stepn * delta[a], lo[j], hi[j]);
        if (w[j] != 0.0 && cand[j] * w[j] < 0) cand[j] = 0.0;
      }
      double cobj = eval_smooth(nb, cand, false, nullptr, nullptr) - penalty(cand);
      if (cobj > obj + 1e-15 * std::abs(obj)) {
        b = nb;
        w = cand;
        obj = cobj;
        improved = true;
        break;
      }
      stepn *= 0.5;
    }
    ++it;
    if (!improved) break;
  }

  g_val = eval_smooth(b, w, true, &smooth_gb, &smooth_grad);
  kkt = kkt_residual(smooth_gb, smooth_grad);

  SpikeFitResult res;
  res.b = b;
  res.w = std::move(w);
  res.objective = g_val - penalty(res.w);
  res.kkt = kkt;
  res.iters = it;
  res.converged = kkt < 1e-6;
  return res;
}

std::vector<std::int8_t> assign_dale_signs(const Mat& w_hat, double threshold) {
  const int n = w_hat.rows;
  std::vector<std::int8_t> a(n, 0);
  for (int j = 0; j < n; ++j) {
    double pos = 0, neg = 0;
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      double w = w_hat.at(i, j);
      if (w > 0) pos += w;
      if (w < 0) neg -= w;
    }
    double tot = pos + neg;
    if (tot <= 0) {
      a[j] = 0;
      continue;
    }
    double dom = (pos - neg) / tot;
    a[j] = std::abs(dom) >= threshold ? (dom > 0 ? 1 : -1) : 0;
  }
  return a;
}

RowFits fit_all_rows(const ConnectivityStats& stats, const PriorConfig& prior,
                     const Mat& w_init, const std::vector<double>& b_init,
                     int jobs) {
  const int n = stats.n();
  const int T = stats.frames();
  RowFits out;
  out.w = Mat(n, n, 0.0);
  out.b.assign(n, 0.0);
  std::vector<double> objs(n, 0.0);

  parallel_for(n, [&](int i) {
    Mat design = stats.cross;  // T x N copy, self column overridden
    for (int t = 0; t < T; ++t) design.at(t, i) = stats.self.at(i, t);
    std::vector<double> w0(n);
    for (int j = 0; j < n; ++j) w0[j] = w_init.empty() ? 0.0 : w_init.at(i, j);
    double b0 = b_init.empty() ? 0.0 : b_init[i];
    auto fit = fit_spiking_params(design, {stats.p.row(i), static_cast<size_t>(T)},
                                  stats.dt, prior, i, b0, w0);
    for (int j = 0; j < n; ++j) out.w.at(i, j) = fit.w[j];
    out.b[i] = fit.b;
    objs[i] = fit.objective;
  }, jobs);

  for (double o : objs) out.objective += o;
  return out;
}

RowFits dale_refine(const ConnectivityStats& stats, const RowFits& start,
                    PriorConfig prior, int max_rounds, int n_flips,
                    std::uint64_t seed, int jobs) {
  prior.dale_enabled = true;
  prior.a = assign_dale_signs(start.w);
  RowFits cur = fit_all_rows(stats, prior, start.w, start.b, jobs);

  for (int round = 1; round < max_rounds; ++round) {
    auto a_new = assign_dale_signs(cur.w);
    if (a_new == prior.a) break;
    prior.a = a_new;
    RowFits next = fit_all_rows(stats, prior, cur.w, cur.b, jobs);
    if (next.objective < cur.objective) break;
    cur = std::move(next);
  }

  auto rng = make_engine(seed, 0xda1e);
  std::uniform_int_distribution<int> pick(0, stats.n() - 1);
  for (int f = 0; f < n_flips; ++f) {
    auto a_try = prior.a;
    int j = pick(rng);
    a_try[j] = a_try[j] == 1 ? -1 : 1;
    PriorConfig p_try = prior;
    p_try.a = a_try;
    RowFits next = fit_all_rows(stats, p_try, cur.w, cur.b, jobs);
    if (next.objective > cur.objective) {
      cur = std::move(next);
      prior.a = a_try;
    }
  }
  return cur;
}

}  // namespace neurocal
