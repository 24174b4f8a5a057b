#pragma once

// Text and JSON serialisation for signals, spectrograms, measurement sets and
// solver results.

#include "stlift/lifting.hpp"
#include "stlift/sdp_solver.hpp"
#include "stlift/stft.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlift::io {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// Signals --------------------------------------------------------------------

/// One sample per line, round-trip precision.
inline std::string signal_to_text(const Signal& x) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (double v : x) out << v << '\n';
  return out.str();
}

inline Signal signal_from_text(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> v;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(line.substr(first), &used);
    } catch (const std::exception&) {
      throw IoError("line " + std::to_string(lineno) + ": not a number");
    }
    if (line.find_first_not_of(" \t\r", first + used) != std::string::npos)
      throw IoError("line " + std::to_string(lineno) + ": trailing characters");
    if (!std::isfinite(value)) throw IoError("line " + std::to_string(lineno) + ": non-finite sample");
    v.push_back(value);
  }
  if (v.empty()) throw IoError("signal file holds no samples");
  return Eigen::Map<const Signal>(v.data(), static_cast<long>(v.size()));
}

inline json signal_to_json(const Signal& x) {
  return json{{"n", x.size()}, {"samples", std::vector<double>(x.data(), x.data() + x.size())}};
}

inline Signal signal_from_json(const json& j) {
  const auto samples = j.at("samples").get<std::vector<double>>();
  if (j.contains("n") && j.at("n").get<long>() != static_cast<long>(samples.size()))
    throw IoError("signal JSON: n does not match the sample count");
  if (samples.empty()) throw IoError("signal JSON holds no samples");
  for (double v : samples)
    if (!std::isfinite(v)) throw IoError("signal JSON: non-finite sample");
  return Eigen::Map<const Signal>(samples.data(), static_cast<long>(samples.size()));
}

/// Accepts either the JSON form or plain text, chosen by the first character.
inline Signal load_signal(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  try {
    if (first != std::string::npos && text[first] == '{') return signal_from_json(json::parse(text));
    return signal_from_text(text);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

// Spectrograms ---------------------------------------------------------------

namespace detail {

inline json rows_of(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (long m = 0; m < M.rows(); ++m) {
    std::vector<double> row(static_cast<std::size_t>(M.cols()));
    for (long k = 0; k < M.cols(); ++k) row[static_cast<std::size_t>(k)] = M(m, k);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_of(const json& rows, long T, long N, const char* what) {
  if (!rows.is_array() || static_cast<long>(rows.size()) != T)
    throw IoError(std::string(what) + ": expected " + std::to_string(T) + " rows");
  Eigen::MatrixXd M(T, N);
  for (long m = 0; m < T; ++m) {
    const auto row = rows[static_cast<std::size_t>(m)].get<std::vector<double>>();
    if (static_cast<long>(row.size()) != N)
      throw IoError(std::string(what) + ": row " + std::to_string(m) + " has wrong length");
    for (long k = 0; k < N; ++k) M(m, k) = row[static_cast<std::size_t>(k)];
  }
  return M;
}

}  // namespace detail

inline json spectrogram_to_json(const ComplexSpectrogram& S) {
  return json{{"T", S.frames()},
              {"N", S.bins()},
              {"re", detail::rows_of(S.coeffs.real())},
              {"im", detail::rows_of(S.coeffs.imag())}};
}

inline ComplexSpectrogram spectrogram_from_json(const json& j) {
  const long T = j.at("T").get<long>();
  const long N = j.at("N").get<long>();
  ComplexSpectrogram S;
  S.coeffs = detail::matrix_of(j.at("re"), T, N, "re").cast<cplx>();
  if (j.contains("im")) S.coeffs.imag() = detail::matrix_of(j.at("im"), T, N, "im");
  return S;
}

/// Magnitudes are stored with the spectrogram layout and an all-zero
/// imaginary part omitted.
inline json magnitudes_to_json(const MagnitudeSpectrogram& A) {
  return json{{"T", A.frames()}, {"N", A.bins()}, {"re", detail::rows_of(A.values)}};
}

inline MagnitudeSpectrogram magnitudes_from_json(const json& j) {
  const ComplexSpectrogram S = spectrogram_from_json(j);
  return magnitude_spec(S);
}

// Measurements ---------------------------------------------------------------

inline json measurements_to_json(const MeasurementSet& ms) {
  return json{{"T", ms.frames}, {"N", ms.bins}, {"b", detail::rows_of(ms.to_power().values)}};
}

inline MeasurementSet measurements_from_json(const json& j) {
  const long T = j.at("T").get<long>();
  const long N = j.at("N").get<long>();
  const Eigen::MatrixXd P = detail::matrix_of(j.at("b"), T, N, "b");
  if ((P.array() < 0.0).any()) throw IoError("measurement set holds negative entries");
  return MeasurementSet::from_power(PowerSpectrogram{P});
}

// Solver results -------------------------------------------------------------

inline json solve_result_to_json(const SolveResult& r) {
  return json{{"status", to_string(r.status)},
              {"rank_ratio", r.rank_ratio},
              {"objective_final", r.objective_final},
              {"step", r.step},
              {"iterations", r.iterations},
              {"lambda_path", r.lambda_path},
              {"rank_path", r.rank_path},
              {"signal", signal_to_json(r.signal)}};
}

}  // namespace stlift::io
