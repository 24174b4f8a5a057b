#pragma once

// Lifted measurement model. With X standing in for x x^T, every squared STFT
// magnitude becomes a linear functional of X:
//
//   |<W_m x, s_k>|^2 = a^* X a,   a(p) = w(c_m - p) e^{j 2 pi p k / N}.
//
// For real symmetric X only Re(a a^*) matters, whose (p, q) entry is
// w_p w_q cos(2 pi k (p - q) / N). All operators below work in that real form.

#include "stlift/stft.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace stlift {

using LiftedMatrix = Eigen::MatrixXd;

/// One rank-one sensing matrix S = a a^*, stored as its atom over a contiguous
/// run of in-range samples starting at `first`.
struct SensingOp {
  long frame_index = 0;
  long frame_center = 0;
  int freq_index = 0;
  long first = 0;
  std::vector<cplx> atom;

  double trace() const {
    double s = 0.0;
    for (const cplx& v : atom) s += std::norm(v);
    return s;
  }
};

/// Squared target magnitudes, flattened row-major in (frame, bin).
struct MeasurementSet {
  long frames = 0;
  long bins = 0;
  Eigen::VectorXd b;

  static MeasurementSet from_power(const PowerSpectrogram& P) {
    MeasurementSet ms{P.frames(), P.bins(), Eigen::VectorXd(P.frames() * P.bins())};
    for (long m = 0; m < P.frames(); ++m)
      for (long k = 0; k < P.bins(); ++k) ms.b[m * P.bins() + k] = P.values(m, k);
    return ms;
  }

  static MeasurementSet from_magnitudes(const MagnitudeSpectrogram& A) {
    return from_power(PowerSpectrogram{A.values.cwiseAbs2()});
  }

  PowerSpectrogram to_power() const {
    PowerSpectrogram P{Eigen::MatrixXd(frames, bins)};
    for (long m = 0; m < frames; ++m)
      for (long k = 0; k < bins; ++k) P.values(m, k) = b[m * bins + k];
    return P;
  }
};

inline std::vector<SensingOp> build_sensing(const StftConfig& cfg) {
  const long n = cfg.signal_length();
  const int N = cfg.fft_size();
  const long h = cfg.window().half_width();
  std::vector<SensingOp> ops;
  ops.reserve(static_cast<std::size_t>(cfg.frames() * N));
  for (long m = 0; m < cfg.frames(); ++m) {
    const long c = cfg.frame_centers()[static_cast<std::size_t>(m)];
    const long lo = std::max(0L, c - h);
    const long hi = std::min(n - 1, c + h);
    for (int k = 0; k < N; ++k) {
      SensingOp op{m, c, k, lo, {}};
      for (long p = lo; p <= hi; ++p) {
        const double wv = cfg.window()(c - p);
        op.atom.push_back(wv == 0.0 ? cplx(0.0, 0.0)
                                    : wv * std::polar(1.0, kTwoPi * static_cast<double>(wrap_index(p, N) * k % N) / N));
      }
      ops.push_back(std::move(op));
    }
  }
  return ops;
}

/// tr(S X) = a^* X a evaluated on each atom's support.
inline Eigen::VectorXd forward(const LiftedMatrix& X, const std::vector<SensingOp>& ops) {
  Eigen::VectorXd out(static_cast<long>(ops.size()));
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const SensingOp& op = ops[i];
    const long L = static_cast<long>(op.atom.size());
    if (op.first < 0 || op.first + L > X.rows() || X.rows() != X.cols())
      throw std::invalid_argument("sensing atom exceeds lifted matrix dimensions");
    cplx acc = 0.0;
    for (long p = 0; p < L; ++p) {
      cplx row = 0.0;
      for (long q = 0; q < L; ++q) row += X(op.first + p, op.first + q) * op.atom[static_cast<std::size_t>(q)];
      acc += std::conj(op.atom[static_cast<std::size_t>(p)]) * row;
    }
    out[static_cast<long>(i)] = acc.real();
  }
  return out;
}

/// Re(sum_i r_i a_i a_i^*) accumulated block by block.
inline LiftedMatrix adjoint(const Eigen::VectorXd& r, const std::vector<SensingOp>& ops, long n) {
  if (r.size() != static_cast<long>(ops.size()))
    throw std::invalid_argument("residual length does not match the number of measurements");
  LiftedMatrix G = LiftedMatrix::Zero(n, n);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const SensingOp& op = ops[i];
    const long L = static_cast<long>(op.atom.size());
    if (op.first < 0 || op.first + L > n) throw std::invalid_argument("sensing atom out of range");
    for (long p = 0; p < L; ++p)
      for (long q = 0; q < L; ++q)
        G(op.first + p, op.first + q) +=
            r[static_cast<long>(i)] *
            (op.atom[static_cast<std::size_t>(p)] * std::conj(op.atom[static_cast<std::size_t>(q)])).real();
  }
  return G;
}

/// Fast form of the same operator pair. Within one frame every measurement
/// shares the window weights, so tr(S_{k,m} X) only depends on the lag sums
/// D(d) = sum_{p - q = d} w_p w_q X_pq and the adjoint only on the cosine
/// sums g(d) = sum_k r_k cos(2 pi k d / N). Cost per frame is O(L^2 + N L)
/// instead of O(N L^2).
class LiftedOperator {
public:
  explicit LiftedOperator(const StftConfig& cfg)
      : n_(cfg.signal_length()), N_(cfg.fft_size()), cos_(static_cast<std::size_t>(cfg.fft_size())) {
    const long h = cfg.window().half_width();
    for (long c : cfg.frame_centers()) {
      Block blk;
      blk.first = std::max(0L, c - h);
      const long hi = std::min(n_ - 1, c + h);
      for (long p = blk.first; p <= hi; ++p) blk.w.push_back(cfg.window()(c - p));
      blocks_.push_back(std::move(blk));
    }
    for (int q = 0; q < N_; ++q) cos_[static_cast<std::size_t>(q)] = std::cos(kTwoPi * q / N_);
  }

  long signal_length() const { return n_; }
  long measurements() const { return static_cast<long>(blocks_.size()) * N_; }
  long frames() const { return static_cast<long>(blocks_.size()); }
  int bins() const { return N_; }

  Eigen::VectorXd forward(const LiftedMatrix& X) const {
    check_square(X);
    Eigen::VectorXd out(measurements());
    std::vector<double> lag;
    for (std::size_t m = 0; m < blocks_.size(); ++m) {
      const Block& blk = blocks_[m];
      const long L = static_cast<long>(blk.w.size());
      lag.assign(static_cast<std::size_t>(L), 0.0);
      for (long d = 0; d < L; ++d) {
        double s = 0.0;
        for (long i = 0; i + d < L; ++i)
          s += blk.w[static_cast<std::size_t>(i)] * blk.w[static_cast<std::size_t>(i + d)] *
               X(blk.first + i + d, blk.first + i);
        lag[static_cast<std::size_t>(d)] = s;
      }
      for (int k = 0; k < N_; ++k) {
        double v = lag.empty() ? 0.0 : lag[0];
        for (long d = 1; d < L; ++d) v += 2.0 * lag[static_cast<std::size_t>(d)] * cosine(k * d);
        out[static_cast<long>(m) * N_ + k] = v;
      }
    }
    return out;
  }

  LiftedMatrix adjoint(const Eigen::VectorXd& r) const {
    if (r.size() != measurements())
      throw std::invalid_argument("residual length does not match the number of measurements");
    LiftedMatrix G = LiftedMatrix::Zero(n_, n_);
    std::vector<double> g;
    for (std::size_t m = 0; m < blocks_.size(); ++m) {
      const Block& blk = blocks_[m];
      const long L = static_cast<long>(blk.w.size());
      g.assign(static_cast<std::size_t>(L), 0.0);
      for (int k = 0; k < N_; ++k) {
        const double rk = r[static_cast<long>(m) * N_ + k];
        if (rk == 0.0) continue;
        for (long d = 0; d < L; ++d) g[static_cast<std::size_t>(d)] += rk * cosine(k * d);
      }
      for (long j = 0; j < L; ++j)
        for (long i = 0; i < L; ++i)
          G(blk.first + i, blk.first + j) += blk.w[static_cast<std::size_t>(i)] *
                                             blk.w[static_cast<std::size_t>(j)] *
                                             g[static_cast<std::size_t>(std::abs(i - j))];
    }
    return G;
  }

  /// 2 * sum_i ||a_i||^4, an upper bound on the curvature of the quadratic term.
  double lipschitz_bound() const {
    double s = 0.0;
    for (const Block& blk : blocks_) {
      double e = 0.0;
      for (double v : blk.w) e += v * v;
      s += static_cast<double>(N_) * e * e;
    }
    return 2.0 * s;
  }

private:
  struct Block {
    long first = 0;
    std::vector<double> w;
  };

  double cosine(long kd) const { return cos_[static_cast<std::size_t>(kd % N_)]; }

  void check_square(const LiftedMatrix& X) const {
    if (X.rows() != n_ || X.cols() != n_)
      throw std::invalid_argument("lifted matrix must be n x n");
  }

  long n_;
  int N_;
  std::vector<Block> blocks_;
  std::vector<double> cos_;
};

/// sum_i (tr(S_i X) - b_i)^2 + lambda tr(X).
inline double objective_L(const LiftedOperator& A, const LiftedMatrix& X, const Eigen::VectorXd& b,
                          double lambda) {
  if (b.size() != A.measurements()) throw std::invalid_argument("measurement count mismatch");
  return (A.forward(X) - b).squaredNorm() + lambda * X.trace();
}

/// 2 sum_i (tr(S_i X) - b_i) Re(S_i) + lambda I.
inline LiftedMatrix gradient_L(const LiftedOperator& A, const LiftedMatrix& X, const Eigen::VectorXd& b,
                               double lambda) {
  if (b.size() != A.measurements()) throw std::invalid_argument("measurement count mismatch");
  LiftedMatrix G = A.adjoint(2.0 * (A.forward(X) - b));
  G.diagonal().array() += lambda;
  return G;
}

}  // namespace stlift
