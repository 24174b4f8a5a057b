// stlift command-line front end.
//
//   stlift stft         --n 16 --window 5 --hop 1 [--input x.txt] [--out S.json]
//   stlift griffin-lim  --window 5 --hop 1 (--target S.json | --n 16 --seed 3)
//   stlift solve        --window 5 --hop 1 (--target S.json | --n 16 --seed 3) [--noisy]
//   stlift bench noiseless|noisy --n 32 --trials 20 --seed 0 --out table.csv

#include "stlift/bench.hpp"
#include "stlift/griffin_lim.hpp"
#include "stlift/io.hpp"
#include "stlift/sdp_solver.hpp"
#include "stlift/stft.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace stlift;
using io::json;

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct Common {
  long n = 16;
  std::vector<int> windows;
  std::vector<int> hops;
  std::uint64_t seed = 0;
  int trials = 20;
  std::string out;
  std::string format = "json";
};

struct SolverKnobs {
  std::string step = "auto";
  double lambda_decay = 0.5;
  double rank1_tol = 1e-3;
  int max_iters = 5000;

  SolverConfig config() const {
    SolverConfig sc;
    if (step != "auto") {
      try {
        sc.step = std::stod(step);
      } catch (const std::exception&) {
        throw std::invalid_argument("--step must be 'auto' or a positive number");
      }
    }
    sc.lambda_decay = lambda_decay;
    sc.rank1_tol = rank1_tol;
    sc.max_iters = max_iters;
    sc.validate();
    return sc;
  }
};

void add_common(CLI::App* app, Common& c, bool with_trials) {
  app->add_option("--n", c.n, "signal length")->check(CLI::PositiveNumber);
  app->add_option("--window", c.windows, "Hann window length(s), odd")->delimiter(',');
  app->add_option("--hop", c.hops, "hop size(s)")->delimiter(',');
  app->add_option("--seed", c.seed, "RNG seed");
  if (with_trials) app->add_option("--trials", c.trials, "signals per cell")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output path (stdout when omitted)");
  app->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
}

void add_solver(CLI::App* app, SolverKnobs& k) {
  app->add_option("--step", k.step, "step size, or 'auto'");
  app->add_option("--lambda-decay", k.lambda_decay, "lambda shrink factor per stage");
  app->add_option("--rank1-tol", k.rank1_tol, "sigma2/sigma1 rank-one threshold");
  app->add_option("--max-iters", k.max_iters, "iterations per lambda stage");
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty())
    std::cout << text;
  else
    io::write_file(c.out, text);
}

StftConfig single_config(const Common& c, long n) {
  if (c.windows.size() != 1 || c.hops.size() != 1)
    throw std::invalid_argument("give exactly one --window and one --hop");
  return make_config(n, c.windows[0], c.hops[0]);
}

std::string spectrogram_csv(const Eigen::MatrixXd& V) {
  std::string s;
  for (long m = 0; m < V.rows(); ++m) {
    for (long k = 0; k < V.cols(); ++k) s += (k ? "," : "") + bench::format_double(V(m, k));
    s += "\n";
  }
  return s;
}

// Target magnitudes from a spectrogram JSON file, or from a seeded random
// signal of length --n when no file is given.
MagnitudeSpectrogram load_target(const Common& c, const std::string& target, StftConfig& cfg) {
  if (target.empty()) {
    cfg = single_config(c, c.n);
    return magnitude_spec(stft(bench::gen_signal(c.n, c.seed, 0), cfg));
  }
  json j;
  try {
    j = json::parse(io::read_file(target));
  } catch (const json::exception& e) {
    throw io::IoError(target + ": " + e.what());
  }
  MagnitudeSpectrogram A = j.contains("b") ? MagnitudeSpectrogram{io::measurements_from_json(j).to_power().values.cwiseSqrt()}
                                           : io::magnitudes_from_json(j);
  const long n = j.contains("n") ? j.at("n").get<long>() : c.n;
  cfg = single_config(c, n);
  if (A.frames() != cfg.frames() || A.bins() != cfg.fft_size())
    throw std::invalid_argument(target + ": spectrogram shape does not match --n/--window/--hop");
  return A;
}

std::string signal_output(const Common& c, const Signal& x, json extra) {
  if (c.format == "csv") return io::signal_to_text(x);
  extra["signal"] = io::signal_to_json(x);
  return extra.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectrogram phase retrieval by convex lifting and Griffin-Lim"};
  app.require_subcommand(1);

  Common stft_c;
  std::string stft_input;
  auto* stft_cmd = app.add_subcommand("stft", "forward STFT of a signal file or a seeded random signal");
  add_common(stft_cmd, stft_c, false);
  stft_cmd->add_option("--input", stft_input, "signal file (text or JSON)");

  Common gl_c;
  std::string gl_target;
  GlConfig gl_cfg;
  auto* gl_cmd = app.add_subcommand("griffin-lim", "Griffin-Lim reconstruction from magnitudes");
  add_common(gl_cmd, gl_c, false);
  gl_cmd->add_option("--target", gl_target, "spectrogram or measurement JSON");
  gl_cmd->add_option("--inits", gl_cfg.n_inits, "random initialisations")->check(CLI::PositiveNumber);
  gl_cmd->add_option("--max-iters", gl_cfg.max_iters, "iterations per initialisation")->check(CLI::PositiveNumber);

  Common solve_c;
  SolverKnobs solve_k;
  std::string solve_target;
  bool solve_noisy_flag = false;
  auto* solve_cmd = app.add_subcommand("solve", "convex lifted reconstruction from magnitudes");
  add_common(solve_cmd, solve_c, false);
  add_solver(solve_cmd, solve_k);
  solve_cmd->add_option("--target", solve_target, "spectrogram or measurement JSON");
  solve_cmd->add_flag("--noisy", solve_noisy_flag, "penalised fit for inconsistent magnitudes");

  auto* bench_cmd = app.add_subcommand("bench", "reproduce the comparison tables");
  bench_cmd->require_subcommand(1);
  Common bench_c;
  bench_c.format = "csv";
  SolverKnobs bench_k;
  std::string spec_file;
  std::vector<std::string> methods;
  std::vector<int> overlay;
  int jobs = 1;
  double sigma = 0.2;
  std::optional<bench::Mode> mode;
  for (const char* name : {"noiseless", "noisy"}) {
    auto* sub = bench_cmd->add_subcommand(name, std::string(name) + " experiment");
    add_common(sub, bench_c, true);
    add_solver(sub, bench_k);
    sub->add_option("--spec", spec_file, "JSON sweep description");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--methods", methods, "griffin-lim,stlift")->delimiter(',');
    sub->add_option("--overlay", overlay, "trial indices to dump as overlay files")->delimiter(',');
    if (std::string(name) == "noisy") sub->add_option("--sigma", sigma, "noise standard deviation");
    sub->callback([&mode, name] { mode = bench::parse_mode(name); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (stft_cmd->parsed()) {
      Signal x = stft_input.empty() ? bench::gen_signal(stft_c.n, stft_c.seed, 0) : io::load_signal(stft_input);
      const StftConfig cfg = single_config(stft_c, x.size());
      const ComplexSpectrogram S = stft(x, cfg);
      if (stft_c.format == "csv") {
        emit(stft_c, spectrogram_csv(magnitude_spec(S).values));
      } else {
        json j = io::spectrogram_to_json(S);
        j["n"] = x.size();
        emit(stft_c, j.dump(2) + "\n");
      }
    } else if (gl_cmd->parsed()) {
      StftConfig cfg = make_config(16, 5, 1);
      const MagnitudeSpectrogram target = load_target(gl_c, gl_target, cfg);
      gl_cfg.rng_seed = gl_c.seed;
      const GlResult r = griffin_lim_multi(target, cfg, gl_cfg);
      emit(gl_c, signal_output(gl_c, r.signal,
                               json{{"objective", r.final_objective()},
                                    {"iterations", r.iterations_used},
                                    {"init_index", r.init_index},
                                    {"seed", gl_c.seed}}));
    } else if (solve_cmd->parsed()) {
      StftConfig cfg = make_config(16, 5, 1);
      const MagnitudeSpectrogram target = load_target(solve_c, solve_target, cfg);
      SolverConfig sc = solve_k.config();
      sc.rng_seed = solve_c.seed;
      const SolveResult r = solve_noisy_flag ? solve_noisy(target, cfg, sc) : solve_noiseless(target, cfg, sc);
      json j = io::solve_result_to_json(r);
      j["objective"] = signal_objective(r.signal, target, cfg);
      if (solve_c.format == "csv")
        emit(solve_c, io::signal_to_text(r.signal));
      else
        emit(solve_c, j.dump(2) + "\n");
      if (r.status == SolveStatus::diverged) return 1;
    } else if (mode) {
      bench::ExperimentSpec spec;
      spec.mode = *mode;
      spec.n = bench_c.n;
      spec.trials = bench_c.trials;
      spec.seed = bench_c.seed;
      spec.noise_sigma = sigma;
      spec.jobs = jobs;
      spec.solver = bench_k.config();
      spec.overlay_trials = overlay;
      if (!spec_file.empty()) {
        try {
          spec = bench::spec_from_json(json::parse(io::read_file(spec_file)), spec);
        } catch (const json::exception& e) {
          throw io::IoError(spec_file + ": " + e.what());
        }
        spec.mode = *mode;
      }
      if (!bench_c.windows.empty() || !bench_c.hops.empty()) {
        spec.cells.clear();
        if (bench_c.hops.empty()) {
          for (const bench::Cell& c : bench::comparison_grid(spec.n))
            if (std::find(bench_c.windows.begin(), bench_c.windows.end(), c.M) != bench_c.windows.end())
              spec.cells.push_back(c);
        } else {
          if (bench_c.windows.empty()) throw std::invalid_argument("--hop needs --window");
          for (int M : bench_c.windows)
            for (int R : bench_c.hops) spec.cells.push_back({M, R});
        }
      } else if (spec.cells.empty()) {
        spec.cells = bench::comparison_grid(spec.n);
      }
      if (!methods.empty()) {
        spec.methods.clear();
        for (const auto& m : methods) spec.methods.push_back(bench::parse_method(m));
      }
      spec.validate();
      std::cout << "# stlift bench " << bench::to_string(spec.mode) << " n=" << spec.n << " seed=" << spec.seed
                << " trials=" << spec.trials << " cells=" << spec.cells.size() << "\n";
      const bench::BenchResult res = bench::run(spec);
      if (bench_c.out.empty()) {
        std::cout << (bench_c.format == "csv" ? bench::rows_to_csv(res.rows)
                                              : bench::result_to_json(spec, res).dump(2) + "\n");
      } else {
        for (const auto& p : bench::emit_results(spec, res, bench_c.format, bench_c.out))
          std::cout << "# wrote " << p << "\n";
      }
    }
  } catch (const io::IoError& e) {
    std::cerr << "stlift: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "stlift: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "stlift: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "stlift: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
