#pragma once

// Hann windows, frame layout, forward STFT, least-squares inverse STFT and the
// magnitude-domain objective shared by every solver in the library.
//
// Conventions
//   * w(t) is indexed by t in [-(M-1)/2, (M-1)/2]; the frame centred at c
//     weights sample p by w(c - p).
//   * Forward DFT kernel e^{-j 2 pi p k / N} with absolute sample index p and
//     no normalisation; the inverse carries 1/N.
//   * Samples outside [0, n) are exactly zero.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlift {

using Signal = Eigen::VectorXd;
using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Floor division for possibly negative numerators.
inline long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline long ceil_div(long a, long b) { return -floor_div(-a, b); }

inline long wrap_index(long p, long N) {
  const long r = p % N;
  return r < 0 ? r + N : r;
}

class Window {
public:
  Window() = default;
  explicit Window(std::vector<double> taps) : taps_(std::move(taps)) {
    if (taps_.empty() || taps_.size() % 2 == 0)
      throw std::invalid_argument("window length must be odd and positive");
  }

  int length() const { return static_cast<int>(taps_.size()); }
  int half_width() const { return (length() - 1) / 2; }

  /// w(t); zero outside the support.
  double operator()(long t) const {
    const long h = half_width();
    if (t < -h || t > h) return 0.0;
    return taps_[static_cast<std::size_t>(t + h)];
  }

  const std::vector<double>& taps() const { return taps_; }

private:
  std::vector<double> taps_;
};

/// Symmetric Hann window of odd length M >= 3 with zero endpoints and unit centre.
inline Window make_hann(int M) {
  if (M < 3 || M % 2 == 0)
    throw std::invalid_argument("Hann window length must be odd and >= 3, got " +
                                std::to_string(M));
  const int h = (M - 1) / 2;
  std::vector<double> taps(static_cast<std::size_t>(M));
  for (int t = -h; t <= h; ++t) {
    double v = 0.5 * (1.0 + std::cos(kTwoPi * t / (M - 1)));
    if (t == -h || t == h) v = 0.0;
    if (t == 0) v = 1.0;
    taps[static_cast<std::size_t>(t + h)] = v;
  }
  return Window(std::move(taps));
}

/// All multiples of R whose window support touches [0, n - 1].
inline std::vector<long> frame_centers(long n, int M, int R) {
  if (n < 1) throw std::invalid_argument("signal length must be >= 1");
  if (R < 1) throw std::invalid_argument("hop must be >= 1");
  if (M < 1 || M % 2 == 0) throw std::invalid_argument("window length must be odd");
  const long h = (M - 1) / 2;
  const long first = ceil_div(-h, R);
  const long last = floor_div(n - 1 + h, R);
  std::vector<long> centers;
  for (long m = first; m <= last; ++m) centers.push_back(m * R);
  return centers;
}

struct ColaResult {
  bool holds = false;
  double constant = 0.0;
};

/// Tests whether sum_m w(mR - p) is the same for every p. The sum is periodic
/// in p with period R, so one period of an infinite frame grid suffices.
inline ColaResult check_cola(const Window& w, int R, double tol = 1e-10) {
  if (R < 1) throw std::invalid_argument("hop must be >= 1");
  const long h = w.half_width();
  std::vector<double> sums(static_cast<std::size_t>(R), 0.0);
  for (long p = 0; p < R; ++p) {
    for (long m = floor_div(p - h, R); m <= ceil_div(p + h, R); ++m)
      sums[static_cast<std::size_t>(p)] += w(m * R - p);
  }
  ColaResult out{true, sums[0]};
  for (double s : sums)
    if (std::abs(s - sums[0]) > tol) out.holds = false;
  return out;
}

class StftConfig {
public:
  StftConfig(long signal_length, Window window, int hop, int fft_size)
      : n_(signal_length), window_(std::move(window)), hop_(hop), fft_size_(fft_size) {
    if (hop_ < 1) throw std::invalid_argument("hop must be >= 1");
    if (fft_size_ < window_.length())
      throw std::invalid_argument("FFT size must be at least the window length");
    centers_ = stlift::frame_centers(n_, window_.length(), hop_);
    const Eigen::VectorXd d = squared_window_sum();
    for (long p = 0; p < n_; ++p)
      if (!(d[p] > 0.0))
        throw std::invalid_argument("frames do not cover sample " + std::to_string(p) +
                                    " (zero squared-window sum)");
  }

  long signal_length() const { return n_; }
  const Window& window() const { return window_; }
  int window_length() const { return window_.length(); }
  int hop() const { return hop_; }
  int fft_size() const { return fft_size_; }
  const std::vector<long>& frame_centers() const { return centers_; }
  long frames() const { return static_cast<long>(centers_.size()); }

  /// sum_m w^2(c_m - p) for every in-range sample.
  Eigen::VectorXd squared_window_sum() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n_);
    const long h = window_.half_width();
    for (long c : centers_)
      for (long p = std::max(0L, c - h); p <= std::min(n_ - 1, c + h); ++p) {
        const double wv = window_(c - p);
        d[p] += wv * wv;
      }
    return d;
  }

private:
  long n_;
  Window window_;
  int hop_;
  int fft_size_;
  std::vector<long> centers_;
};

/// Hann window of length M, hop R, FFT size N (defaults to n) for a length-n signal.
inline StftConfig make_config(long n, int M, int R, int N = 0) {
  return StftConfig(n, make_hann(M), R, N > 0 ? N : static_cast<int>(n));
}

struct ComplexSpectrogram {
  Eigen::MatrixXcd coeffs;  // T x N
  long frames() const { return coeffs.rows(); }
  long bins() const { return coeffs.cols(); }
};

struct PowerSpectrogram {
  Eigen::MatrixXd values;
  long frames() const { return values.rows(); }
  long bins() const { return values.cols(); }
};

struct MagnitudeSpectrogram {
  Eigen::MatrixXd values;
  long frames() const { return values.rows(); }
  long bins() const { return values.cols(); }
};

namespace detail {

/// e^{-j 2 pi q / N} for q in [0, N).
inline std::vector<cplx> twiddles(int N) {
  std::vector<cplx> tw(static_cast<std::size_t>(N));
  for (int q = 0; q < N; ++q) tw[static_cast<std::size_t>(q)] = std::polar(1.0, -kTwoPi * q / N);
  return tw;
}

}  // namespace detail

inline ComplexSpectrogram stft(const Signal& x, const StftConfig& cfg) {
  if (x.size() != cfg.signal_length())
    throw std::invalid_argument("signal length " + std::to_string(x.size()) +
                                " does not match configuration length " +
                                std::to_string(cfg.signal_length()));
  const int N = cfg.fft_size();
  const long n = cfg.signal_length();
  const long h = cfg.window().half_width();
  const auto tw = detail::twiddles(N);
  ComplexSpectrogram S{Eigen::MatrixXcd::Zero(cfg.frames(), N)};
  for (long m = 0; m < cfg.frames(); ++m) {
    const long c = cfg.frame_centers()[static_cast<std::size_t>(m)];
    for (long p = std::max(0L, c - h); p <= std::min(n - 1, c + h); ++p) {
      const double v = cfg.window()(c - p) * x[p];
      if (v == 0.0) continue;
      const long base = wrap_index(p, N);
      for (int k = 0; k < N; ++k)
        S.coeffs(m, k) += v * tw[static_cast<std::size_t>((base * k) % N)];
    }
  }
  return S;
}

inline PowerSpectrogram power_spec(const ComplexSpectrogram& S) {
  return {S.coeffs.cwiseAbs2()};
}

inline MagnitudeSpectrogram magnitude_spec(const ComplexSpectrogram& S) {
  return {S.coeffs.cwiseAbs()};
}

/// Least-squares signal whose windowed frames best match the inverse DFTs of
/// the rows of S. Frame content where the window vanishes is ignored.
inline Signal ls_inverse(const ComplexSpectrogram& S, const StftConfig& cfg) {
  const int N = cfg.fft_size();
  if (S.frames() != cfg.frames() || S.bins() != N)
    throw std::invalid_argument("spectrogram shape does not match configuration");
  const long n = cfg.signal_length();
  const long h = cfg.window().half_width();
  const auto tw = detail::twiddles(N);
  Signal num = Signal::Zero(n);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(n);
  for (long m = 0; m < cfg.frames(); ++m) {
    const long c = cfg.frame_centers()[static_cast<std::size_t>(m)];
    for (long p = std::max(0L, c - h); p <= std::min(n - 1, c + h); ++p) {
      const double wv = cfg.window()(c - p);
      den[p] += wv * wv;
      if (wv == 0.0) continue;
      const long base = wrap_index(p, N);
      // Real part of the inverse DFT at sample p; tw holds the conjugate kernel.
      double acc = 0.0;
      for (int k = 0; k < N; ++k) {
        const cplx e = std::conj(tw[static_cast<std::size_t>((base * k) % N)]);
        acc += (S.coeffs(m, k) * e).real();
      }
      num[p] += wv * acc / N;
    }
  }
  for (long p = 0; p < n; ++p) {
    if (!(den[p] > 0.0))
      throw std::domain_error("zero window-energy at sample " + std::to_string(p));
    num[p] /= den[p];
  }
  return num;
}

/// sum over frames and bins of (|X| - |Y|)^2.
inline double objective(const MagnitudeSpectrogram& estimate, const MagnitudeSpectrogram& target) {
  if (estimate.frames() != target.frames() || estimate.bins() != target.bins())
    throw std::invalid_argument("spectrogram shapes differ");
  return (estimate.values - target.values).squaredNorm();
}

/// Objective of a signal against target magnitudes.
inline double signal_objective(const Signal& x, const MagnitudeSpectrogram& target,
                               const StftConfig& cfg) {
  return objective(magnitude_spec(stft(x, cfg)), target);
}

}  // namespace stlift
