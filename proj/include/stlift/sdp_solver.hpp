#pragma once

// Convex lifted phase retrieval: accelerated projected gradient on the PSD
// cone for
//
//   minimise  sum_i (tr(S_i X) - b_i)^2 + lambda tr(X)   subject to X >= 0,
//
// driven along a decreasing lambda path, followed by rank-one extraction.

#include "stlift/lifting.hpp"
#include "stlift/random.hpp"
#include "stlift/stft.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlift {

struct SolverConfig {
  std::optional<double> step;  // empty: autotune
  int max_iters = 5000;        // per lambda stage
  double grad_tol = 1e-9;      // relative objective change
  double lambda_decay = 0.5;
  double rank1_tol = 1e-3;     // sigma_2 / sigma_1
  int divergence_window = 20;  // consecutive objective increases
  int restart_window = 10;     // consecutive increases before momentum reset
  bool accelerate = true;
  double lambda_floor = 1e-6;  // relative to lambda_0
  int max_stages = 64;
  double refine_lambda = 1e-2;  // equality-constrained solve, relative to lambda_0
  int max_rounds = 200;         // residual add-back rounds
  double residual_tol = 1e-9;   // relative equality residual
  double round_grad_tol = 1e-12;
  long iteration_budget = 400000;
  std::uint64_t rng_seed = 0;  // step-size probe start

  void validate() const {
    if (step && !(*step > 0.0)) throw std::invalid_argument("step size must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(lambda_decay > 0.0 && lambda_decay < 1.0))
      throw std::invalid_argument("lambda_decay must lie in (0, 1)");
    if (!(rank1_tol > 0.0)) throw std::invalid_argument("rank1_tol must be positive");
    if (divergence_window < 1) throw std::invalid_argument("divergence_window must be >= 1");
    if (!(grad_tol >= 0.0)) throw std::invalid_argument("grad_tol must be >= 0");
    if (!(lambda_floor > 0.0 && lambda_floor < 1.0))
      throw std::invalid_argument("lambda_floor must lie in (0, 1)");
    if (max_stages < 1) throw std::invalid_argument("max_stages must be >= 1");
    if (!(refine_lambda > 0.0 && refine_lambda < 1.0))
      throw std::invalid_argument("refine_lambda must lie in (0, 1)");
    if (max_rounds < 0) throw std::invalid_argument("max_rounds must be >= 0");
    if (!(residual_tol >= 0.0)) throw std::invalid_argument("residual_tol must be >= 0");
    if (!(round_grad_tol >= 0.0)) throw std::invalid_argument("round_grad_tol must be >= 0");
  }
};

enum class SolveStatus { converged_rank1, max_iters, diverged };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged_rank1: return "converged-rank1";
    case SolveStatus::max_iters: return "max-iters";
    case SolveStatus::diverged: return "diverged";
  }
  return "unknown";
}

struct FistaState {
  LiftedMatrix X;
  LiftedMatrix Y;  // extrapolation point, may leave the cone
  double theta = 1.0;
  int iteration = 0;
};

enum class FistaStatus { converged, max_iters, diverged };

struct FistaResult {
  LiftedMatrix X;
  std::vector<double> objective_trace;  // entry 0 is the starting objective
  int iterations = 0;
  int restarts = 0;
  FistaStatus status = FistaStatus::max_iters;
};

struct SolveResult {
  LiftedMatrix X;
  Signal signal;
  double rank_ratio = 0.0;
  std::vector<double> lambda_path;
  std::vector<double> rank_path;
  double objective_final = 0.0;
  double step = 0.0;
  long iterations = 0;
  SolveStatus status = SolveStatus::max_iters;
};

/// Nearest PSD matrix in Frobenius norm.
inline LiftedMatrix project_psd(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("project_psd needs a square matrix");
  if (!M.allFinite()) throw std::domain_error("project_psd: non-finite input");
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw std::runtime_error("project_psd: eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  long first = 0;
  while (first < ev.size() && ev[first] <= 0.0) ++first;
  const long k = ev.size() - first;
  if (k == 0) return LiftedMatrix::Zero(M.rows(), M.cols());
  const auto V = es.eigenvectors().rightCols(k);
  LiftedMatrix P = V * ev.tail(k).asDiagonal() * V.transpose();
  return 0.5 * (P + P.transpose());
}

/// Next momentum parameter of the accelerated scheme.
inline double next_theta(double theta) { return 2.0 / (1.0 + std::sqrt(1.0 + 4.0 / (theta * theta))); }

/// One accelerated projected-gradient update of `state`.
inline void fista_step(const LiftedOperator& A, const Eigen::VectorXd& b, double lambda, double t,
                       bool accelerate, FistaState& state) {
  LiftedMatrix next = project_psd(state.Y - t * gradient_L(A, state.Y, b, lambda));
  const double theta_next = next_theta(state.theta);
  const double beta = accelerate ? theta_next * (1.0 / state.theta - 1.0) : 0.0;
  state.Y = next + beta * (next - state.X);
  state.X = std::move(next);
  state.theta = theta_next;
  ++state.iteration;
}

inline FistaResult fista_solve(const LiftedOperator& A, const Eigen::VectorXd& b, double lambda, double t,
                               const SolverConfig& cfg, const LiftedMatrix& X0) {
  if (b.size() != A.measurements()) throw std::invalid_argument("measurement count mismatch");
  if (!(t > 0.0)) throw std::invalid_argument("step size must be positive");
  FistaState st{X0, X0, 1.0, 0};
  FistaResult out;
  double f = objective_L(A, st.X, b, lambda);
  out.objective_trace.push_back(f);
  int rising = 0;
  int since_restart = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    fista_step(A, b, lambda, t, cfg.accelerate, st);
    const double fn = objective_L(A, st.X, b, lambda);
    out.objective_trace.push_back(fn);
    out.iterations = it + 1;
    if (!std::isfinite(fn)) {
      out.status = FistaStatus::diverged;
      break;
    }
    if (fn > f) {
      ++rising;
      ++since_restart;
    } else {
      rising = 0;
      since_restart = 0;
    }
    if (rising >= cfg.divergence_window) {
      out.status = FistaStatus::diverged;
      f = fn;
      break;
    }
    if (cfg.accelerate && since_restart >= cfg.restart_window) {
      st.Y = st.X;
      st.theta = 1.0;
      since_restart = 0;
      ++out.restarts;
    }
    const bool settled = std::abs(f - fn) <= cfg.grad_tol * std::max(std::abs(f), std::abs(fn));
    f = fn;
    if (settled) {
      out.status = FistaStatus::converged;
      break;
    }
  }
  out.X = std::move(st.X);
  return out;
}

/// Doubling search for the step size, starting from 1 / (2 Lip_est). Each
/// probe runs unprojected gradient descent on the penalised objective from a
/// seeded random symmetric start; it diverges when the objective rises for
/// divergence_window consecutive iterations or turns non-finite. Unprojected
/// descent tolerates steps up to 2/Lip while the accelerated iteration needs
/// about 1/Lip, so the last stable probe step is halved.
inline double autotune_step(const LiftedOperator& A, const Eigen::VectorXd& b, double lambda,
                            const SolverConfig& cfg, const LiftedMatrix& X0) {
  const double lip = A.lipschitz_bound();
  if (!(lip > 0.0)) return 1.0;
  const long n = A.signal_length();
  auto rng = derived_stream(cfg.rng_seed, kStreamStepProbe);
  std::normal_distribution<double> normal(0.0, 1.0);
  LiftedMatrix start(n, n);
  for (long j = 0; j < n; ++j)
    for (long i = 0; i <= j; ++i) start(i, j) = start(j, i) = normal(rng);
  start *= std::sqrt(std::max(X0.squaredNorm(), 1.0)) / start.norm();
  start += X0;

  const int probe_iters = 10 * cfg.divergence_window;
  auto diverges = [&](double t) {
    LiftedMatrix Z = start;
    double f = objective_L(A, Z, b, lambda);
    int rising = 0;
    for (int i = 0; i < probe_iters; ++i) {
      Z -= t * gradient_L(A, Z, b, lambda);
      const double fn = objective_L(A, Z, b, lambda);
      if (!std::isfinite(fn)) return true;
      rising = fn > f ? rising + 1 : 0;
      if (rising >= cfg.divergence_window) return true;
      f = fn;
    }
    return false;
  };

  double t = 1.0 / (2.0 * lip);
  for (int i = 0; i < 60 && !diverges(2.0 * t); ++i) t *= 2.0;
  return 0.5 * t;
}

/// Leading eigenpair factorisation, sign fixed so the largest-magnitude entry
/// is positive.
struct Extraction {
  Signal signal;
  double rank_ratio = 0.0;
};

inline Extraction extract_signal(const LiftedMatrix& X) {
  const long n = X.rows();
  Extraction out{Signal::Zero(n), 0.0};
  if (n == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (X + X.transpose()));
  if (es.info() != Eigen::Success) throw std::runtime_error("extract_signal: eigendecomposition failed");
  const double s1 = es.eigenvalues()[n - 1];
  if (!(s1 > 0.0)) return out;
  const double s2 = n > 1 ? std::max(es.eigenvalues()[n - 2], 0.0) : 0.0;
  out.rank_ratio = s2 / s1;
  out.signal = std::sqrt(s1) * es.eigenvectors().col(n - 1);
  long imax = 0;
  for (long i = 1; i < n; ++i)
    if (std::abs(out.signal[i]) > std::abs(out.signal[imax])) imax = i;
  if (out.signal[imax] < 0.0) out.signal = -out.signal;
  return out;
}

/// Smallest lambda for which X = 0 is a fixed point of the projected gradient map.
inline double lambda_start(const LiftedOperator& A, const Eigen::VectorXd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.adjoint(b), Eigen::EigenvaluesOnly);
  return 2.0 * std::max(es.eigenvalues().maxCoeff(), 0.0);
}


/// Per-stage report handed to continuation observers.
struct StageInfo {
  int stage = 0;
  double lambda = 0.0;
  const LiftedMatrix* X = nullptr;
  const Extraction* extraction = nullptr;
};

namespace detail {

inline SolveResult empty_result(long n) {
  SolveResult out;
  out.X = LiftedMatrix::Zero(n, n);
  out.signal = Signal::Zero(n);
  return out;
}

inline void finish(SolveResult& out, const LiftedOperator& A, const Eigen::VectorXd& b, double rank1_tol) {
  const Extraction e = extract_signal(out.X);
  out.signal = e.signal;
  out.rank_ratio = e.rank_ratio;
  out.objective_final = objective_L(A, out.X, b, out.lambda_path.back());
  if (out.status != SolveStatus::diverged)
    out.status = e.rank_ratio <= rank1_tol ? SolveStatus::converged_rank1 : SolveStatus::max_iters;
}

// Solves one stage, halving an autotuned step until the stage stops
// diverging. A fixed user step is never changed.
inline FistaResult stage_solve(const LiftedOperator& A, const Eigen::VectorXd& b, double lambda, double& t,
                               const SolverConfig& cfg, const LiftedMatrix& X0) {
  FistaResult r = fista_solve(A, b, lambda, t, cfg, X0);
  for (int i = 0; i < 30 && r.status == FistaStatus::diverged && !cfg.step; ++i) {
    t *= 0.5;
    r = fista_solve(A, b, lambda, t, cfg, X0);
  }
  return r;
}

// Warm-started path lambda_0 * decay^k for k = 1, 2, ... Stops once
// lambda <= stop_lambda and, if `need_rank1`, the iterate is rank one within
// tolerance, or after max_stages.
template <class Observer>
SolveResult run_path(const LiftedOperator& A, const Eigen::VectorXd& b, const SolverConfig& cfg,
                     double stop_fraction, bool need_rank1, Observer&& observe) {
  cfg.validate();
  if (b.size() != A.measurements()) throw std::invalid_argument("measurement count mismatch");
  SolveResult out = empty_result(A.signal_length());
  const double lambda0 = lambda_start(A, b);
  out.lambda_path.push_back(lambda0);
  out.rank_path.push_back(0.0);
  if (!(lambda0 > 0.0)) {
    out.status = SolveStatus::converged_rank1;
    out.objective_final = 0.0;
    return out;
  }
  double t = cfg.step ? *cfg.step : autotune_step(A, b, lambda0 * cfg.lambda_decay, cfg, out.X);
  double lambda = lambda0;
  for (int stage = 0; stage < cfg.max_stages; ++stage) {
    lambda *= cfg.lambda_decay;
    FistaResult r = stage_solve(A, b, lambda, t, cfg, out.X);
    out.iterations += r.iterations;
    if (r.status == FistaStatus::diverged) {
      out.status = SolveStatus::diverged;
      break;
    }
    out.X = std::move(r.X);
    const Extraction e = extract_signal(out.X);
    out.lambda_path.push_back(lambda);
    out.rank_path.push_back(e.rank_ratio);
    observe(StageInfo{stage, lambda, &out.X, &e});
    if (lambda <= stop_fraction * lambda0 && (!need_rank1 || e.rank_ratio <= cfg.rank1_tol)) break;
  }
  out.step = t;
  finish(out, A, b, cfg.rank1_tol);
  return out;
}

}  // namespace detail

/// Solves the penalised program along a decreasing lambda path with warm
/// starts, stopping once lambda has fallen below lambda_floor * lambda_0 with
/// a rank-one iterate. Status max-iters means the stage budget ran out first.
inline SolveResult lambda_continuation(const LiftedOperator& A, const Eigen::VectorXd& b,
                                       const SolverConfig& cfg) {
  return detail::run_path(A, b, cfg, cfg.lambda_floor, true, [](const StageInfo&) {});
}

/// Trace minimisation subject to exact magnitude constraints. The path is
/// followed down to refine_lambda * lambda_0; the equality constraints are
/// then enforced by adding the residual back into the measurements and
/// re-solving at that lambda (method of multipliers), until the relative
/// residual drops below residual_tol.
inline SolveResult solve_equality(const LiftedOperator& A, const Eigen::VectorXd& b, const SolverConfig& cfg) {
  SolveResult out = detail::run_path(A, b, cfg, cfg.refine_lambda, false, [](const StageInfo&) {});
  if (out.status == SolveStatus::diverged || out.lambda_path.size() < 2) return out;
  const double lambda = out.lambda_path.back();
  const double bnorm = b.norm();
  SolverConfig inner = cfg;
  inner.grad_tol = std::min(cfg.grad_tol, cfg.round_grad_tol);
  Eigen::VectorXd shifted = b;
  double t = out.step;
  for (int round = 0; round < cfg.max_rounds; ++round) {
    const Eigen::VectorXd residual = b - A.forward(out.X);
    if (residual.norm() <= cfg.residual_tol * bnorm) break;
    if (out.iterations >= cfg.iteration_budget) break;
    shifted += residual;
    FistaResult r = detail::stage_solve(A, shifted, lambda, t, inner, out.X);
    out.iterations += r.iterations;
    if (r.status == FistaStatus::diverged) {
      out.status = SolveStatus::diverged;
      break;
    }
    out.X = std::move(r.X);
  }
  out.step = t;
  detail::finish(out, A, b, cfg.rank1_tol);
  return out;
}

inline SolveResult solve_noiseless(const MagnitudeSpectrogram& target, const StftConfig& stft_cfg,
                                   const SolverConfig& cfg) {
  if (target.frames() != stft_cfg.frames() || target.bins() != stft_cfg.fft_size())
    throw std::invalid_argument("target magnitudes do not match the STFT configuration");
  const LiftedOperator A(stft_cfg);
  return solve_equality(A, MeasurementSet::from_magnitudes(target).b, cfg);
}

/// Penalised program for inconsistent magnitudes. Every stage of the path is
/// scored by the magnitude misfit of its rank-one extraction and the best
/// stage is returned; `rank_ratio` and `status` describe that stage.
inline SolveResult solve_noisy(const MagnitudeSpectrogram& target, const StftConfig& stft_cfg,
                               const SolverConfig& cfg) {
  if (target.frames() != stft_cfg.frames() || target.bins() != stft_cfg.fft_size())
    throw std::invalid_argument("target magnitudes do not match the STFT configuration");
  const LiftedOperator A(stft_cfg);
  const Eigen::VectorXd b = MeasurementSet::from_magnitudes(target).b;
  double best = signal_objective(Signal::Zero(stft_cfg.signal_length()), target, stft_cfg);
  LiftedMatrix best_X = LiftedMatrix::Zero(A.signal_length(), A.signal_length());
  double best_lambda = -1.0;
  SolveResult out = detail::run_path(A, b, cfg, cfg.lambda_floor, true, [&](const StageInfo& s) {
    const double f = signal_objective(s.extraction->signal, target, stft_cfg);
    if (f < best) {
      best = f;
      best_X = *s.X;
      best_lambda = s.lambda;
    }
  });
  if (out.status == SolveStatus::diverged) return out;
  out.X = std::move(best_X);
  if (best_lambda > 0.0) {
    // report the selected stage last on the path
    out.lambda_path.push_back(best_lambda);
    out.rank_path.push_back(extract_signal(out.X).rank_ratio);
  }
  detail::finish(out, A, b, cfg.rank1_tol);
  return out;
}

}  // namespace stlift
