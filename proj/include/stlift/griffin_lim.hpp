#pragma once

// Griffin-Lim alternating projections: keep the phase of the current estimate,
// impose the target magnitudes, resynthesise by least squares.

#include "stlift/random.hpp"
#include "stlift/stft.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace stlift {

struct GlConfig {
  int max_iters = 1000;
  double objective_tol = 1e-12;
  int n_inits = 10;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (n_inits < 1) throw std::invalid_argument("n_inits must be >= 1");
    if (!(objective_tol >= 0.0)) throw std::invalid_argument("objective_tol must be >= 0");
  }
};

struct GlResult {
  Signal signal;
  std::vector<double> objective_trace;  // entry i: objective after i updates
  int iterations_used = 0;
  int init_index = 0;

  double final_objective() const { return objective_trace.back(); }
};

namespace detail {

inline void check_target(const MagnitudeSpectrogram& target, const StftConfig& cfg) {
  if (target.frames() != cfg.frames() || target.bins() != cfg.fft_size())
    throw std::invalid_argument("target magnitudes do not match the STFT configuration");
}

/// Replaces magnitudes of S in place; unit phase where |S| is zero.
inline void impose_magnitudes(ComplexSpectrogram& S, const MagnitudeSpectrogram& target) {
  for (long m = 0; m < S.frames(); ++m)
    for (long k = 0; k < S.bins(); ++k) {
      const cplx z = S.coeffs(m, k);
      const double a = std::abs(z);
      S.coeffs(m, k) = a > 0.0 ? target.values(m, k) * (z / a) : cplx(target.values(m, k), 0.0);
    }
}

}  // namespace detail

inline Signal gl_step(const Signal& x, const MagnitudeSpectrogram& target, const StftConfig& cfg) {
  detail::check_target(target, cfg);
  ComplexSpectrogram S = stft(x, cfg);
  detail::impose_magnitudes(S, target);
  return ls_inverse(S, cfg);
}

/// Iterates gl_step from x0 until the objective changes by less than
/// objective_tol or max_iters updates have been made.
inline GlResult griffin_lim(const MagnitudeSpectrogram& target, const StftConfig& cfg,
                            const Signal& x0, const GlConfig& gl) {
  gl.validate();
  detail::check_target(target, cfg);
  GlResult out;
  Signal x = x0;
  ComplexSpectrogram S = stft(x, cfg);
  out.objective_trace.push_back(objective(magnitude_spec(S), target));
  for (int it = 0; it < gl.max_iters; ++it) {
    detail::impose_magnitudes(S, target);
    x = ls_inverse(S, cfg);
    S = stft(x, cfg);
    const double f = objective(magnitude_spec(S), target);
    const double prev = out.objective_trace.back();
    out.objective_trace.push_back(f);
    ++out.iterations_used;
    if (std::abs(prev - f) < gl.objective_tol) break;
  }
  out.signal = std::move(x);
  return out;
}

/// Standard-normal starting point for initialisation `index` under `seed`.
inline Signal gl_initial_signal(long n, std::uint64_t seed, int index) {
  auto rng = derived_stream(seed, kStreamGriffinLim, static_cast<std::uint64_t>(index));
  std::normal_distribution<double> normal(0.0, 1.0);
  Signal x(n);
  for (long i = 0; i < n; ++i) x[i] = normal(rng);
  return x;
}

/// Best (lowest final objective) of n_inits random restarts. Ties keep the
/// earliest initialisation.
inline GlResult griffin_lim_multi(const MagnitudeSpectrogram& target, const StftConfig& cfg,
                                  const GlConfig& gl) {
  gl.validate();
  GlResult best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int i = 0; i < gl.n_inits; ++i) {
    GlResult r = griffin_lim(target, cfg, gl_initial_signal(cfg.signal_length(), gl.rng_seed, i), gl);
    r.init_index = i;
    if (r.final_objective() < best_obj || i == 0) {
      best_obj = r.final_objective();
      best = std::move(r);
    }
  }
  return best;
}

}  // namespace stlift
