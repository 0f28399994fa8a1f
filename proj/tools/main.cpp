#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "suites.hpp"
#include "tenet/attention.hpp"
#include "tenet/bench.hpp"
#include "tenet/errors.hpp"
#include "tenet/hop_pipeline.hpp"
#include "tenet/shrinkage.hpp"
#include "tenet/tensor_io.hpp"
#include "tenet/tso.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Output {
  std::ofstream file;
  std::ostream* stream = &std::cout;

  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw std::runtime_error("cannot open " + path + " for writing");
    stream = &file;
  }
  std::ostream& get() { return *stream; }
};

tenet::TsoParams params_from(int eta, double eta_prime) {
  tenet::TsoParams p;
  p.eta2 = eta;
  p.eta4 = eta;
  const tenet::EtaChoice odd = tenet::resolve_odd_eta(eta, true);
  if (odd.substituted()) {
    std::cerr << "note: order-3 eta " << odd.requested << " is not a power of 3, using " << odd.used << '\n';
  }
  p.eta3 = odd.used;
  p.eta_prime = eta_prime;
  p.validate();
  return p;
}

struct BenchArgs {
  int order = 2;
  int dim = 64;
  std::vector<int> etas{2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  int runs = 9;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
};

int run_bench(const BenchArgs& a) {
  tenet::BenchGrid grid;
  grid.r = a.order;
  grid.d = a.dim;
  grid.etas = a.etas;
  grid.runs = a.runs;
  grid.seed = a.seed;
  const auto records = tenet::bench_tso(grid);
  Output out(a.out);
  const bool fit = std::count_if(grid.etas.begin(), grid.etas.end(), [](int e) { return e > 1; }) >= 2;
  if (a.format == "json") {
    nlohmann::json j;
    j["schema_version"] = tenet::cli::kReportSchemaVersion;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records) {
      j["records"].push_back({{"op", r.op},
                              {"r", r.r},
                              {"d", r.d},
                              {"eta", r.eta},
                              {"algorithm", tenet::to_string(r.algorithm)},
                              {"wall_time_ns", r.wall_time_ns},
                              {"contraction_count", r.contraction_count}});
    }
    if (fit) {
      const auto s = tenet::summarize_bench(records);
      j["summary"] = {{"naive_slope_vs_eta", s.naive_slope},
                      {"fast_slope_vs_log2_eta", s.fast_slope},
                      {"fast_over_naive_at_max_eta", s.ratio_at_max}};
    }
    out.get() << j.dump(2) << '\n';
  } else {
    tenet::write_bench_csv(out.get(), records);
    if (fit) {
      const auto s = tenet::summarize_bench(records);
      std::cerr << "naive slope vs eta " << s.naive_slope << ", fast slope vs log2 eta " << s.fast_slope
                << ", fast/naive at max eta " << s.ratio_at_max << '\n';
    }
  }
  return kExitPass;
}

struct SuiteArgs {
  std::string name;
  std::string input;
  std::string out;
  std::string format = "json";
  tenet::cli::SuiteOptions opts;
};

int run_suites(SuiteArgs a) {
  if (!a.input.empty()) a.opts.input = tenet::load_tensor(a.input);
  std::vector<std::string> names;
  if (a.name == "all") {
    names = tenet::cli::suite_names();
  } else {
    names.push_back(a.name);
  }
  std::vector<tenet::cli::SuiteResult> results;
  bool pass = true;
  for (const auto& n : names) {
    results.push_back(tenet::cli::run_suite(n, a.opts));
    pass = pass && results.back().pass();
    for (const auto& c : results.back().checks) {
      if (!c.pass) std::cerr << "FAIL " << n << '/' << c.name << " residual " << c.residual << " > " << c.threshold << '\n';
    }
  }
  Output out(a.out);
  if (a.format == "csv") {
    tenet::cli::write_report_csv(out.get(), results);
  } else {
    tenet::cli::write_report_json(out.get(), results);
  }
  return pass ? kExitPass : kExitFailure;
}

struct TheoremArgs {
  int dim = 8;
  int eta = 7;
  int trials = 5;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
};

int run_theorems(const TheoremArgs& a) {
  const auto prob = tenet::ShrinkageProblem::make(tenet::SpectrumVector{{0.5, 0.3, 0.2}, true}, a.eta);
  const auto t1 = tenet::verify_theorem1(prob);
  const auto t2 = tenet::verify_theorem2(a.dim, a.trials, a.seed);
  Output out(a.out);
  if (a.format == "json") {
    nlohmann::json j;
    j["schema_version"] = tenet::cli::kReportSchemaVersion;
    j["theorem1"] = {{"d", t1.d},
                     {"eta", t1.eta},
                     {"closed_form", t1.closed_form},
                     {"numerical", t1.best_numerical},
                     {"distance_inf", t1.distance_inf},
                     {"stationarity", t1.stationarity},
                     {"objective_gap", t1.objective_gap},
                     {"wall_time_ms", t1.wall_time_ms}};
    j["theorem2"] = {{"d", t2.d},
                     {"trials", t2.trials},
                     {"etas", t2.etas},
                     {"deviation", t2.deviation},
                     {"monotone", t2.monotone},
                     {"final_deviation", t2.final_deviation},
                     {"wall_time_ms", t2.wall_time_ms}};
    out.get() << j.dump(2) << '\n';
  } else {
    tenet::write_theorem_csv_header(out.get());
    tenet::write_theorem_csv(out.get(), t1);
    tenet::write_theorem_csv(out.get(), t2);
  }
  const bool pass = t1.distance_inf <= 1e-4 && t1.stationarity <= 1e-6 && t2.final_deviation <= 1e-6 && t2.monotone;
  if (!pass) std::cerr << "theorem checks failed\n";
  return pass ? kExitPass : kExitFailure;
}

struct DemoArgs {
  std::uint64_t seed = 7;
  int z = 5;
  int b = 4;
  int dim = 48;
  int n = 32;
  double separation = 10.0;
  std::string split = "5:2:1";
  int eta = 7;
  double eta_prime = 200.0;
  double sigma = 0.5;
  int heads = 4;
  std::string input;
  std::string dump;
};

int run_demo(const DemoArgs& a) {
  tenet::PipelineConfig cfg;
  cfg.split = tenet::SplitConfig::parse(a.split);
  cfg.tso = params_from(a.eta, a.eta_prime);
  cfg.sigma = a.sigma;
  cfg.heads = a.heads;
  const tenet::EpisodeBatch e =
      a.input.empty() ? tenet::synth_episode(a.seed, static_cast<std::size_t>(a.z), static_cast<std::size_t>(a.b),
                                             static_cast<std::size_t>(a.dim), static_cast<std::size_t>(a.n), a.separation)
                      : tenet::EpisodeBatch::load(tenet::load_bundle(a.input));
  const auto weights = tenet::PipelineWeights::seeded(e.dim(), a.seed);
  const tenet::EpisodeOutput out = tenet::forward_episode(e, cfg, weights);

  std::cout << "episode: Z=" << e.supports.size() << " B=" << e.boxes.size() << " d=" << e.dim()
            << " split=" << cfg.split.to_string() << " eta=" << cfg.tso.eta2 << '/' << cfg.tso.eta3 << '/'
            << cfg.tso.eta4 << " eta'=" << cfg.tso.eta_prime << " sigma=" << cfg.sigma << '\n';
  std::cout << std::fixed << std::setprecision(6);
  std::cout << "\nroi  class  ranking (support:similarity)\n";
  const bool labelled = e.roi_classes.size() == e.boxes.size() && e.support_classes.size() == e.supports.size();
  std::size_t hits = 0;
  for (std::size_t b = 0; b < out.roi_hops.size(); ++b) {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t z = 0; z < out.support_hops.size(); ++z) {
      ranked.emplace_back(tenet::rbf_similarity(out.roi_hops[b], out.support_hops[z], cfg.sigma), z);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    std::cout << std::setw(3) << b << "  " << std::setw(5) << (labelled ? std::to_string(e.roi_classes[b]) : "-") << " ";
    for (const auto& [sim, z] : ranked) std::cout << ' ' << z << ':' << sim;
    if (labelled) {
      const bool hit = e.support_classes[ranked.front().second] == e.roi_classes[b];
      hits += hit ? 1 : 0;
      std::cout << (hit ? "  match" : "  miss");
    }
    std::cout << '\n';
  }
  if (labelled) std::cout << "matched class first: " << hits << '/' << out.roi_hops.size() << '\n';

  std::cout << "\nroi  |R_spatial|_F  |R_fo_ho|_2  |R_combined|_F\n";
  for (std::size_t b = 0; b < out.relations.size(); ++b) {
    const auto& r = out.relations[b];
    std::cout << std::setw(3) << b << "  " << std::setw(13) << r.spatial.norm() << "  " << std::setw(11)
              << r.fo_ho.norm() << "  " << std::setw(14) << r.combined.norm() << '\n';
  }

  if (!a.dump.empty()) {
    tenet::MatrixBundle bundle;
    e.store(bundle);
    weights.heads.store(bundle, "weights/");
    bundle.put("weights/lift", weights.lift);
    out.store(bundle);
    tenet::save_bundle(a.dump, bundle);
    std::cout << "\nwrote " << bundle.sections().size() << " sections to " << a.dump << '\n';
  }
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tenet: high-order tensor pooling checks, benchmarks and demos"};
  app.require_subcommand(1);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "time naive vs fast shrinkage paths");
  bench_cmd->add_option("--order", bench.order, "tensor order")->check(CLI::Range(2, 4));
  bench_cmd->add_option("--dim", bench.dim, "dimension d")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--eta", bench.etas, "exponents to time")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--runs", bench.runs, "timed runs per point")->check(CLI::Range(9, 1000));
  bench_cmd->add_option("--seed", bench.seed, "input seed");
  bench_cmd->add_option("--out", bench.out, "output path (default stdout)");
  bench_cmd->add_option("--format", bench.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  SuiteArgs suite;
  std::vector<std::string> suite_choices = tenet::cli::suite_names();
  suite_choices.emplace_back("all");
  auto* suite_cmd = app.add_subcommand("run-suite", "run a module invariant suite");
  suite_cmd->add_option("name", suite.name, "suite name")->required()->check(CLI::IsMember(suite_choices));
  suite_cmd->add_option("--input", suite.input, "TNSR tensor to include in the descriptors/tso suites");
  suite_cmd->add_option("--seed", suite.opts.seed, "random seed");
  suite_cmd->add_option("--eta", suite.opts.eta, "shrinkage exponent")->check(CLI::PositiveNumber);
  suite_cmd->add_option("--eta-prime", suite.opts.eta_prime, "SigmE slope")->check(CLI::Range(1.0, 1e9));
  suite_cmd->add_option("--sigma", suite.opts.sigma, "RBF bandwidth")->check(CLI::PositiveNumber);
  suite_cmd->add_option("--out", suite.out, "report path (default stdout)");
  suite_cmd->add_option("--format", suite.format, "json or csv")->check(CLI::IsMember({"csv", "json"}));

  TheoremArgs theorems;
  auto* thm_cmd = app.add_subcommand("theorems", "verify the shrinkage theorems");
  thm_cmd->add_option("--dim", theorems.dim, "matrix size for the limit check")->check(CLI::Range(2, 128));
  thm_cmd->add_option("--eta", theorems.eta, "exponent of the minimizer check")->check(CLI::Range(2, 32));
  thm_cmd->add_option("--trials", theorems.trials, "random matrices for the limit check")->check(CLI::PositiveNumber);
  thm_cmd->add_option("--seed", theorems.seed, "random seed");
  thm_cmd->add_option("--out", theorems.out, "output path (default stdout)");
  thm_cmd->add_option("--format", theorems.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  DemoArgs demo;
  auto split_check = CLI::Validator(
      [](std::string& s) {
        try {
          tenet::SplitConfig::parse(s);
        } catch (const std::exception& e) {
          return std::string(e.what());
        }
        return std::string();
      },
      "a:b:c");
  auto* demo_cmd = app.add_subcommand("demo", "run one synthetic episode through the pipeline");
  demo_cmd->add_option("--seed", demo.seed, "episode and weight seed");
  demo_cmd->add_option("--z", demo.z, "support count Z")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--b", demo.b, "box count B")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--dim", demo.dim, "channels d")->check(CLI::Range(2, 128));
  demo_cmd->add_option("--n", demo.n, "spatial size N per crop")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--separation", demo.separation, "class separation")->check(CLI::NonNegativeNumber);
  demo_cmd->add_option("--split", demo.split, "channel split a:b:c")->check(split_check);
  demo_cmd->add_option("--eta", demo.eta, "shrinkage exponent")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--eta-prime", demo.eta_prime, "SigmE slope")->check(CLI::Range(1.0, 1e9));
  demo_cmd->add_option("--sigma", demo.sigma, "RBF bandwidth")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--heads", demo.heads, "attention heads")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--input", demo.input, "episode bundle to load instead of synthesizing");
  demo_cmd->add_option("--dump", demo.dump, "write all intermediates to this bundle file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*bench_cmd) return run_bench(bench);
    if (*suite_cmd) return run_suites(suite);
    if (*thm_cmd) return run_theorems(theorems);
    if (*demo_cmd) return run_demo(demo);
  } catch (const tenet::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
