#include "stlift/stft.hpp"
#include "stlift/random.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <algorithm>
#include <random>
#include <vector>

using namespace stlift;
using Catch::Approx;

namespace {

Signal random_signal(long n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Signal x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

// Direct evaluation of sum_p w(c - p) x(p) exp(-2 pi i p k / N).
std::complex<double> direct_coeff(const Signal& x, const Window& w, long c, int k, int N) {
  std::complex<double> acc = 0.0;
  for (long p = 0; p < x.size(); ++p)
    acc += w(c - p) * x[p] * std::exp(std::complex<double>(0.0, -2.0 * M_PI * double(p) * k / N));
  return acc;
}

// Brute-force frame enumeration over a wide range of multiples of R.
std::vector<long> enumerate_centers(long n, int M, int R) {
  const long h = (M - 1) / 2;
  std::vector<long> out;
  for (long m = -1000; m <= 1000; ++m) {
    const long c = m * R;
    if (c + h >= 0 && c - h <= n - 1) out.push_back(c);
  }
  return out;
}

const std::vector<std::pair<int, int>> kGrid{{5, 2}, {5, 1}, {7, 3}, {7, 2}, {7, 1}, {9, 4},
                                                  {9, 2}, {9, 1}, {11, 5}, {11, 2}, {11, 1}};

}  // namespace

TEST_CASE("Hann taps") {
  CHECK(make_hann(3).taps() == std::vector<double>{0.0, 1.0, 0.0});
  const auto t5 = make_hann(5).taps();
  const std::vector<double> expect{0.0, 0.5, 1.0, 0.5, 0.0};
  for (std::size_t i = 0; i < 5; ++i) CHECK(t5[i] == Approx(expect[i]).margin(1e-15));
  CHECK_THROWS_AS(make_hann(4), std::invalid_argument);
  CHECK_THROWS_AS(make_hann(1), std::invalid_argument);

  for (int M = 3; M <= 21; M += 2) {
    const Window w = make_hann(M);
    const int h = w.half_width();
    CHECK(w(-h) == 0.0);
    CHECK(w(h) == 0.0);
    CHECK(w(0) == 1.0);
    for (int t = -h; t <= h; ++t) {
      CHECK(w(t) == w(-t));
      CHECK(w(t) >= 0.0);
      CHECK(w(t) <= 1.0);
      if (std::abs(t) < h) CHECK(w(t) == Approx(0.5 * (1.0 + std::cos(2.0 * M_PI * t / (M - 1)))).epsilon(1e-14));
    }
    CHECK(w(h + 1) == 0.0);
  }
}

TEST_CASE("frame centres") {
  CHECK(frame_centers(4, 3, 1) == std::vector<long>{-1, 0, 1, 2, 3, 4});
  CHECK(frame_centers(1, 3, 1) == std::vector<long>{-1, 0, 1});
  // Enumeration gives -2..16 (ten frames): a centre at 18 has support 16..20,
  // which misses [0, 15].
  CHECK(frame_centers(16, 5, 2) == std::vector<long>{-2, 0, 2, 4, 6, 8, 10, 12, 14, 16});
  CHECK(frame_centers(16, 5, 2) == enumerate_centers(16, 5, 2));
  for (long n : {1L, 7L, 16L, 32L})
    for (auto [M, R] : kGrid) {
      const auto c = frame_centers(n, M, R);
      CHECK(c == enumerate_centers(n, M, R));
      for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] - c[i - 1] == R);
    }
}

TEST_CASE("COLA check") {
  const ColaResult r52 = check_cola(make_hann(5), 2);
  CHECK(r52.holds);
  CHECK(r52.constant == Approx(1.0).epsilon(1e-14));
  CHECK_FALSE(check_cola(make_hann(5), 3).holds);
  CHECK(check_cola(make_hann(7), 3).holds);
  for (auto [M, R] : kGrid) CHECK(check_cola(make_hann(M), R).holds);

  // Independent oracle: overlap-add sum over many frames at interior samples.
  for (int M = 5; M <= 21; M += 2)
    for (int R = 1; R <= M; ++R) {
      const Window w = make_hann(M);
      std::vector<double> sums;
      for (long p = 500; p < 500 + 2 * R; ++p) {
        double s = 0.0;
        for (long m = 0; m * R < 1200; ++m) s += w(m * R - p);
        sums.push_back(s);
      }
      bool flat = true;
      for (double s : sums) flat = flat && std::abs(s - sums[0]) < 1e-10;
      INFO("M=" << M << " R=" << R);
      CHECK(check_cola(w, R).holds == flat);
      // Closed form: constant overlap-add exactly when R divides M-1 with at
      // least two frames per period; R = M-1 leaves gaps between endpoints.
      CHECK(flat == ((M - 1) % R == 0 && 2 * R <= M - 1));
    }
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(make_config(16, 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_config(16, 5, 1, 4), std::invalid_argument);
  // Taps {0, 1, 0} with hop 2 leave odd samples uncovered.
  CHECK_THROWS_AS(StftConfig(4, Window({0.0, 1.0, 0.0}), 2, 4), std::invalid_argument);
  const StftConfig cfg = make_config(16, 5, 2);
  CHECK(cfg.frames() == 10);
  CHECK(cfg.fft_size() == 16);
  CHECK((cfg.squared_window_sum().array() > 0.0).all());
}

TEST_CASE("forward STFT") {
  SECTION("zero signal") {
    const StftConfig cfg = make_config(8, 5, 1);
    CHECK(stft(Signal::Zero(8), cfg).coeffs.isZero(0.0));
  }
  SECTION("impulse") {
    const StftConfig cfg = make_config(4, 3, 1, 4);
    Signal x = Signal::Zero(4);
    x[0] = 1.0;
    const ComplexSpectrogram S = stft(x, cfg);
    REQUIRE(S.frames() == 6);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(S.coeffs(1, k) - cplx(1.0, 0.0)) < 1e-15);  // centre 0
    CHECK(S.coeffs.row(0).isZero(1e-15));  // centre -1: w(-1) = 0
  }
  SECTION("matches direct evaluation") {
    for (auto [M, R] : kGrid)
      for (long n : {8L, 16L}) {
        if (M > n) continue;
        const StftConfig cfg = make_config(n, M, R);
        const Signal x = random_signal(n, 11 * M + R);
        const ComplexSpectrogram S = stft(x, cfg);
        for (long m = 0; m < S.frames(); ++m)
          for (int k = 0; k < cfg.fft_size(); ++k)
            CHECK(std::abs(S.coeffs(m, k) - direct_coeff(x, cfg.window(), cfg.frame_centers()[m], k, cfg.fft_size())) <
                  1e-12);
      }
  }
  SECTION("zero padding beyond the window") {
    const StftConfig cfg = make_config(16, 5, 1, 24);
    const Signal x = random_signal(16, 5);
    const ComplexSpectrogram S = stft(x, cfg);
    CHECK(S.bins() == 24);
    for (long m = 0; m < S.frames(); ++m)
      for (int k = 0; k < 24; ++k)
        CHECK(std::abs(S.coeffs(m, k) - direct_coeff(x, cfg.window(), cfg.frame_centers()[m], k, 24)) < 1e-12);
  }
  SECTION("conjugate symmetry") {
    const StftConfig cfg = make_config(4, 3, 1, 4);
    const ComplexSpectrogram S = stft(random_signal(4, 2), cfg);
    for (long m = 0; m < S.frames(); ++m) CHECK(std::abs(S.coeffs(m, 1) - std::conj(S.coeffs(m, 3))) < 1e-14);
  }
  SECTION("length mismatch") { CHECK_THROWS_AS(stft(Signal::Zero(7), make_config(8, 5, 1)), std::invalid_argument); }
}

TEST_CASE("Parseval per frame") {
  for (auto [M, R] : kGrid) {
    const StftConfig cfg = make_config(32, M, R);
    const Signal x = random_signal(32, M * 100 + R);
    const ComplexSpectrogram S = stft(x, cfg);
    for (long m = 0; m < S.frames(); ++m) {
      double frame = 0.0;
      for (long p = 0; p < 32; ++p) frame += std::pow(cfg.window()(cfg.frame_centers()[m] - p) * x[p], 2);
      const double bins = S.coeffs.row(m).squaredNorm();
      CHECK(std::abs(bins - cfg.fft_size() * frame) <= 1e-9 * std::max(1.0, bins));
    }
  }
}

TEST_CASE("linearity") {
  const StftConfig cfg = make_config(16, 7, 2);
  const Signal x = random_signal(16, 1), y = random_signal(16, 2);
  const double a = 1.7, b = -0.3;
  const auto lhs = stft(a * x + b * y, cfg).coeffs;
  const auto rhs = (a * stft(x, cfg).coeffs + b * stft(y, cfg).coeffs).eval();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spectrogram magnitudes") {
  ComplexSpectrogram S{Eigen::MatrixXcd::Zero(2, 3)};
  CHECK(power_spec(S).values.isZero(0.0));
  S.coeffs(1, 2) = cplx(3.0, 4.0);
  CHECK(power_spec(S).values(1, 2) == Approx(25.0));
  CHECK(magnitude_spec(S).values(1, 2) == Approx(5.0));
  const StftConfig cfg = make_config(16, 5, 1);
  const ComplexSpectrogram T = stft(random_signal(16, 3), cfg);
  CHECK((power_spec(T).values - magnitude_spec(T).values.cwiseAbs2()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("least-squares inverse") {
  SECTION("round trip over the standard grid") {
    int draw = 0;
    for (long n : {8L, 16L, 32L})
      for (auto [M, R] : kGrid) {
        const StftConfig cfg = make_config(n, M, R, std::max(static_cast<int>(n), M));
        const Signal x = random_signal(n, 1000 + draw++);
        CHECK((ls_inverse(stft(x, cfg), cfg) - x).cwiseAbs().maxCoeff() < 1e-10);
      }
  }
  SECTION("zero spectrogram") {
    const StftConfig cfg = make_config(16, 5, 2);
    const ComplexSpectrogram S{Eigen::MatrixXcd::Zero(cfg.frames(), 16)};
    CHECK(ls_inverse(S, cfg).isZero(0.0));
  }
  SECTION("content where the window vanishes is ignored") {
    const StftConfig cfg = make_config(16, 5, 2);
    const Signal x = random_signal(16, 9);
    ComplexSpectrogram S = stft(x, cfg);
    const long h = cfg.window().half_width();
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    for (long m = 0; m < S.frames(); ++m) {
      const long c = cfg.frame_centers()[m];
      // samples at the zero endpoints and outside the support
      for (long p : {c - h, c + h, c + h + 1, c - h - 3}) {
        const double amp = nd(rng);
        for (int k = 0; k < 16; ++k)
          S.coeffs(m, k) += amp * std::exp(cplx(0.0, -2.0 * M_PI * double(wrap_index(p, 16)) * k / 16));
      }
    }
    CHECK((ls_inverse(S, cfg) - x).cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("shape mismatch") {
    const StftConfig cfg = make_config(16, 5, 2);
    CHECK_THROWS_AS(ls_inverse(ComplexSpectrogram{Eigen::MatrixXcd::Zero(3, 16)}, cfg), std::invalid_argument);
  }
}

TEST_CASE("objective") {
  MagnitudeSpectrogram a{Eigen::MatrixXd::Zero(2, 2)}, b{Eigen::MatrixXd::Zero(2, 2)};
  CHECK(objective(a, b) == 0.0);
  a.values(0, 1) = 2.0;
  b.values(0, 1) = 5.0;
  CHECK(objective(a, b) == Approx(9.0));
  CHECK(objective(a, b) == objective(b, a));
  CHECK_THROWS_AS(objective(a, MagnitudeSpectrogram{Eigen::MatrixXd::Zero(2, 3)}), std::invalid_argument);

  const StftConfig cfg = make_config(16, 5, 1);
  const Signal x = random_signal(16, 8);
  const MagnitudeSpectrogram target = magnitude_spec(stft(x, cfg));
  CHECK(signal_objective(x, target, cfg) < 1e-20);
  CHECK(signal_objective(-x, target, cfg) < 1e-20);
  CHECK(signal_objective(x + random_signal(16, 9) * 0.1, target, cfg) > 0.0);
}
