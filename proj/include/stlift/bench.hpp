#pragma once

// Experiment runner: seeded test signals, noisy power spectrograms, both
// reconstruction methods over a (M, R) grid, summary tables and their
// CSV / JSON emission.

#include "stlift/griffin_lim.hpp"
#include "stlift/io.hpp"
#include "stlift/random.hpp"
#include "stlift/sdp_solver.hpp"
#include "stlift/stft.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace stlift::bench {

enum class Mode { noiseless, noisy };
enum class Method { griffin_lim, stlift };

inline std::string to_string(Mode m) { return m == Mode::noiseless ? "noiseless" : "noisy"; }
inline std::string to_string(Method m) { return m == Method::griffin_lim ? "griffin-lim" : "stlift"; }

inline Method parse_method(const std::string& s) {
  if (s == "griffin-lim" || s == "gl") return Method::griffin_lim;
  if (s == "stlift") return Method::stlift;
  throw std::invalid_argument("unknown method '" + s + "'");
}

inline Mode parse_mode(const std::string& s) {
  if (s == "noiseless") return Mode::noiseless;
  if (s == "noisy") return Mode::noisy;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

struct Cell {
  int M = 0;
  int R = 0;
  bool operator==(const Cell&) const = default;
};

struct ExperimentSpec {
  long n = 16;
  std::vector<Cell> cells;
  int trials = 20;
  std::uint64_t seed = 0;
  Mode mode = Mode::noiseless;
  double noise_sigma = 0.2;
  std::vector<Method> methods{Method::griffin_lim, Method::stlift};
  GlConfig gl;
  SolverConfig solver;
  int jobs = 1;
  double recovery_threshold = 1e-3;
  std::vector<int> overlay_trials;  // trials whose signals are kept for overlay output

  void validate() const {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (cells.empty()) throw std::invalid_argument("no (M, R) cells given");
    if (methods.empty()) throw std::invalid_argument("no methods given");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    for (const Cell& c : cells) {
      const Window w = make_hann(c.M);
      if (c.R < 1) throw std::invalid_argument("hop must be >= 1");
      if (!check_cola(w, c.R).holds)
        throw std::invalid_argument("(M=" + std::to_string(c.M) + ", R=" + std::to_string(c.R) +
                                    ") is not constant overlap-add");
    }
    gl.validate();
    solver.validate();
  }
};

/// (M, R) grid of the comparison tables for n = 16 or n = 32.
inline std::vector<Cell> comparison_grid(long n) {
  std::vector<Cell> g{{5, 2}, {5, 1}, {7, 3}, {7, 2}, {7, 1}, {9, 4}, {9, 2}, {9, 1}, {11, 5}, {11, 2}, {11, 1}};
  if (n >= 32) {
    const std::vector<Cell> more{{13, 6}, {13, 4}, {13, 3}, {13, 2}, {13, 1}, {15, 7}, {15, 2},
                                 {15, 1}, {17, 8}, {17, 4}, {17, 2}, {17, 1}, {19, 9}, {19, 6},
                                 {19, 3}, {19, 2}, {19, 1}, {21, 10}, {21, 5}, {21, 4}, {21, 2},
                                 {21, 1}};
    g.insert(g.end(), more.begin(), more.end());
  }
  return g;
}

struct TrialRecord {
  int trial_index = 0;
  Method method = Method::stlift;
  int M = 0;
  int R = 0;
  double objective_value = 0.0;
  bool recovered = false;
  double relative_error_pct = 0.0;
  double wall_time = 0.0;
  std::string status;  // "ok" or the failure message
  Signal original;     // kept only for overlay trials
  Signal estimate;
};

struct SummaryRow {
  long n = 0;
  int M = 0;
  int R = 0;
  Method method = Method::stlift;
  std::string metric;  // accuracy_pct or median_rel_err_pct
  double value = 0.0;
  int trials = 0;
  bool operator==(const SummaryRow&) const = default;
};

struct BenchResult {
  std::vector<SummaryRow> rows;
  std::vector<TrialRecord> records;
};

inline Signal gen_signal(long n, std::uint64_t seed, int index) {
  auto rng = derived_stream(seed, kStreamSignal, static_cast<std::uint64_t>(index));
  std::normal_distribution<double> normal(0.0, 1.0);
  Signal x(n);
  for (long i = 0; i < n; ++i) x[i] = normal(rng);
  return x;
}

inline std::vector<Signal> gen_signals(long n, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  std::vector<Signal> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(gen_signal(n, seed, i));
  return out;
}

/// Entrywise P + N(0, sigma^2), negatives clamped to zero.
inline PowerSpectrogram add_noise(const PowerSpectrogram& P, double sigma, std::uint64_t seed,
                                  std::uint64_t index = 0) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  PowerSpectrogram out = P;
  if (sigma == 0.0) return out;
  auto rng = derived_stream(seed, kStreamNoise, index);
  std::normal_distribution<double> normal(0.0, sigma);
  for (long m = 0; m < out.frames(); ++m)
    for (long k = 0; k < out.bins(); ++k) out.values(m, k) = std::max(out.values(m, k) + normal(rng), 0.0);
  return out;
}

/// Lower-middle element for even counts.
inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  const auto mid = v.begin() + static_cast<long>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

namespace detail {

struct Task {
  std::size_t cell;
  int trial;
  Method method;
};

inline std::uint64_t noise_index(const Cell& c, int trial) {
  return (static_cast<std::uint64_t>(c.M) << 40) ^ (static_cast<std::uint64_t>(c.R) << 20) ^
         static_cast<std::uint64_t>(trial);
}

inline TrialRecord run_task(const ExperimentSpec& spec, const std::vector<Signal>& signals, const Task& task) {
  const Cell cell = spec.cells[task.cell];
  TrialRecord rec;
  rec.trial_index = task.trial;
  rec.method = task.method;
  rec.M = cell.M;
  rec.R = cell.R;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const StftConfig cfg = make_config(spec.n, cell.M, cell.R);
    const Signal& x = signals[static_cast<std::size_t>(task.trial)];
    PowerSpectrogram P = power_spec(stft(x, cfg));
    if (spec.mode == Mode::noisy) P = add_noise(P, spec.noise_sigma, spec.seed, noise_index(cell, task.trial));
    const MagnitudeSpectrogram target{P.values.cwiseSqrt()};
    Signal est;
    if (task.method == Method::griffin_lim) {
      GlConfig gl = spec.gl;
      gl.rng_seed = derived_stream(spec.seed, kStreamGriffinLim, static_cast<std::uint64_t>(task.trial))();
      est = griffin_lim_multi(target, cfg, gl).signal;
    } else {
      SolverConfig sc = spec.solver;
      sc.rng_seed = mix64(spec.seed ^ mix64(static_cast<std::uint64_t>(task.trial)));
      const SolveResult r = spec.mode == Mode::noiseless ? solve_noiseless(target, cfg, sc)
                                                         : solve_noisy(target, cfg, sc);
      if (r.status == SolveStatus::diverged) throw std::runtime_error("solver diverged");
      est = r.signal;
    }
    rec.objective_value = signal_objective(est, target, cfg);
    if (!std::isfinite(rec.objective_value)) throw std::runtime_error("non-finite objective");
    rec.recovered = rec.objective_value < spec.recovery_threshold;
    const double total = P.values.sum();
    rec.relative_error_pct = total > 0.0 ? 100.0 * rec.objective_value / total : 0.0;
    rec.status = "ok";
    if (std::find(spec.overlay_trials.begin(), spec.overlay_trials.end(), task.trial) != spec.overlay_trials.end()) {
      rec.original = x;
      rec.estimate = est;
    }
  } catch (const std::exception& e) {
    rec.objective_value = std::numeric_limits<double>::infinity();
    rec.relative_error_pct = std::numeric_limits<double>::infinity();
    rec.recovered = false;
    rec.status = e.what();
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace detail

/// Summary rows from trial records, one per (M, R, method) in first-seen order.
inline std::vector<SummaryRow> summarize(const ExperimentSpec& spec, const std::vector<TrialRecord>& records) {
  std::vector<SummaryRow> rows;
  for (const Cell& c : spec.cells)
    for (Method m : spec.methods) {
      std::vector<double> errs;
      int hits = 0;
      for (const TrialRecord& r : records)
        if (r.M == c.M && r.R == c.R && r.method == m) {
          hits += r.recovered ? 1 : 0;
          errs.push_back(r.relative_error_pct);
        }
      if (errs.empty()) continue;
      SummaryRow row{spec.n, c.M, c.R, m, "", 0.0, static_cast<int>(errs.size())};
      if (spec.mode == Mode::noiseless) {
        row.metric = "accuracy_pct";
        row.value = 100.0 * hits / static_cast<double>(errs.size());
      } else {
        row.metric = "median_rel_err_pct";
        row.value = median(errs);
      }
      rows.push_back(row);
    }
  return rows;
}

/// Runs every (cell, trial, method) task on `spec.jobs` threads. Records come
/// back in task order whatever the scheduling.
inline BenchResult run(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<Signal> signals = gen_signals(spec.n, spec.trials, spec.seed);
  std::vector<detail::Task> tasks;
  for (std::size_t c = 0; c < spec.cells.size(); ++c)
    for (int t = 0; t < spec.trials; ++t)
      for (Method m : spec.methods) tasks.push_back({c, t, m});

  BenchResult out;
  out.records.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++)
      out.records[i] = detail::run_task(spec, signals, tasks[i]);
  };
  const int workers = std::min<int>(spec.jobs, static_cast<int>(tasks.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  out.rows = summarize(spec, out.records);
  return out;
}

inline BenchResult run_noiseless(ExperimentSpec spec) {
  if (spec.mode != Mode::noiseless) throw std::invalid_argument("spec mode is not noiseless");
  return run(spec);
}

inline BenchResult run_noisy(ExperimentSpec spec) {
  if (spec.mode != Mode::noisy) throw std::invalid_argument("spec mode is not noisy");
  return run(spec);
}

// Emission -------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline const char* kCsvHeader = "n,M,R,method,metric,value,trials";

inline std::string rows_to_csv(const std::vector<SummaryRow>& rows) {
  std::string s = std::string(kCsvHeader) + "\n";
  for (const SummaryRow& r : rows)
    s += std::to_string(r.n) + "," + std::to_string(r.M) + "," + std::to_string(r.R) + "," + to_string(r.method) +
         "," + r.metric + "," + format_double(r.value) + "," + std::to_string(r.trials) + "\n";
  return s;
}

inline std::vector<SummaryRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
  }
  if (line != kCsvHeader) throw io::IoError("CSV header mismatch");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw io::IoError("CSV row has " + std::to_string(f.size()) + " fields: " + line);
    SummaryRow r;
    r.n = std::stol(f[0]);
    r.M = std::stoi(f[1]);
    r.R = std::stoi(f[2]);
    r.method = parse_method(f[3]);
    r.metric = f[4];
    const auto res = std::from_chars(f[5].data(), f[5].data() + f[5].size(), r.value);
    if (res.ec != std::errc{}) throw io::IoError("bad value in CSV row: " + line);
    r.trials = std::stoi(f[6]);
    rows.push_back(r);
  }
  return rows;
}

inline io::json record_to_json(const TrialRecord& r) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? io::json(v) : io::json(nullptr); };
  return io::json{{"trial", r.trial_index},
                  {"method", to_string(r.method)},
                  {"M", r.M},
                  {"R", r.R},
                  {"objective", finite_or_null(r.objective_value)},
                  {"recovered", r.recovered},
                  {"relative_error_pct", finite_or_null(r.relative_error_pct)},
                  {"wall_time", r.wall_time},
                  {"status", r.status}};
}

inline io::json result_to_json(const ExperimentSpec& spec, const BenchResult& res) {
  io::json rows = io::json::array();
  for (const SummaryRow& r : res.rows)
    rows.push_back({{"n", r.n}, {"M", r.M}, {"R", r.R}, {"method", to_string(r.method)},
                    {"metric", r.metric}, {"value", r.value}, {"trials", r.trials}});
  io::json recs = io::json::array();
  for (const TrialRecord& r : res.records) recs.push_back(record_to_json(r));
  return io::json{{"n", spec.n}, {"mode", to_string(spec.mode)}, {"seed", spec.seed},
                  {"trials", spec.trials}, {"noise_sigma", spec.noise_sigma}, {"rows", rows},
                  {"records", recs}};
}

/// (index, original, reconstructed) triples, one per line.
inline std::string overlay_csv(const TrialRecord& r) {
  std::string s = "index,original,reconstructed\n";
  for (long i = 0; i < r.original.size(); ++i)
    s += std::to_string(i) + "," + format_double(r.original[i]) + "," + format_double(r.estimate[i]) + "\n";
  return s;
}

/// Writes the summary to `path` (CSV or JSON), the per-trial records next to
/// it as `<path>.trials.json` (CSV format only) and one overlay file per kept
/// trial as `<path>.overlay_M<M>_R<R>_<method>_t<trial>.csv`. Returns the
/// paths written.
inline std::vector<std::string> emit_results(const ExperimentSpec& spec, const BenchResult& res,
                                             const std::string& format, const std::string& path) {
  if (res.rows.empty()) throw std::invalid_argument("no summary rows to emit");
  std::vector<std::string> written;
  if (format == "csv") {
    io::write_file(path, rows_to_csv(res.rows));
    written.push_back(path);
    io::json recs = io::json::array();
    for (const TrialRecord& r : res.records) recs.push_back(record_to_json(r));
    io::write_file(path + ".trials.json", recs.dump(2) + "\n");
    written.push_back(path + ".trials.json");
  } else if (format == "json") {
    io::write_file(path, result_to_json(spec, res).dump(2) + "\n");
    written.push_back(path);
  } else {
    throw std::invalid_argument("unknown format '" + format + "'");
  }
  for (const TrialRecord& r : res.records) {
    if (r.original.size() == 0 || r.estimate.size() != r.original.size()) continue;
    const std::string p = path + ".overlay_M" + std::to_string(r.M) + "_R" + std::to_string(r.R) + "_" +
                          to_string(r.method) + "_t" + std::to_string(r.trial_index) + ".csv";
    io::write_file(p, overlay_csv(r));
    written.push_back(p);
  }
  return written;
}

/// Sweep description as accepted by `stlift bench --spec`:
/// {"n": 32, "mode": "noisy", "trials": 20, "seed": 0, "noise_sigma": 0.2,
///  "windows": [{"M": 5, "hops": [1, 2]}], "methods": ["griffin-lim", "stlift"]}
/// Keys left out keep the values already in `base`.
inline ExperimentSpec spec_from_json(const io::json& j, ExperimentSpec base) {
  if (j.contains("n")) base.n = j.at("n").get<long>();
  if (j.contains("mode")) base.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("trials")) base.trials = j.at("trials").get<int>();
  if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("noise_sigma")) base.noise_sigma = j.at("noise_sigma").get<double>();
  if (j.contains("jobs")) base.jobs = j.at("jobs").get<int>();
  if (j.contains("windows")) {
    base.cells.clear();
    for (const auto& w : j.at("windows")) {
      const int M = w.at("M").get<int>();
      for (const auto& R : w.at("hops")) base.cells.push_back({M, R.get<int>()});
    }
  }
  if (j.contains("methods")) {
    base.methods.clear();
    for (const auto& m : j.at("methods")) base.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (j.contains("overlay_trials")) base.overlay_trials = j.at("overlay_trials").get<std::vector<int>>();
  return base;
}

}  // namespace stlift::bench
