#include "bmamba_cli/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bmamba/checkpoint.hpp"
#include "bmamba/config.hpp"
#include "bmamba/dataset_io.hpp"
#include "bmamba/errors.hpp"
#include "bmamba/report.hpp"
#include "bmamba/synthetic.hpp"
#include "bmamba/tensor_file.hpp"
#include "bmamba/train.hpp"
#include "bmamba_cli/bench.hpp"

namespace bmamba::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string modalities;
};

config::RunConfig resolve_config(const CommonOptions& o) {
  config::RunConfig c = o.config.empty() ? config::RunConfig{} : config::RunConfig::load(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.modalities.empty()) c.modalities = parse_modality_list(o.modalities);
  return c;
}

struct Split {
  Dataset train;
  std::optional<Dataset> test;
};

Dataset take_dialogues(const Dataset& all, std::size_t first, std::size_t count) {
  Dataset d;
  d.classes = all.classes;
  d.widths = all.widths;
  d.dialogues.assign(all.dialogues.begin() + static_cast<std::ptrdiff_t>(first),
                     all.dialogues.begin() + static_cast<std::ptrdiff_t>(first + count));
  return d;
}

Split load_data(const config::RunConfig& c) {
  Split s;
  if (!c.train_data.empty()) {
    s.train = io::read_dataset(c.train_data, c.classes);
    if (!c.test_data.empty()) s.test = io::read_dataset(c.test_data, c.classes);
    return s;
  }
  if (c.dialogues < 1) throw ConfigError("dialogues must be positive");
  if (c.test_dialogues < 0) throw ConfigError("test_dialogues must be non-negative");
  const Dataset all = synthetic::generate(c.synthetic_spec());
  const auto n_train = static_cast<std::size_t>(c.dialogues);
  s.train = take_dialogues(all, 0, n_train);
  if (c.test_dialogues > 0) s.test = take_dialogues(all, n_train, all.dialogues.size() - n_train);
  return s;
}

void check_compatible(const model::Model& m, const Dataset& data) {
  if (data.classes != m.config.classes) throw ConfigError("dataset and checkpoint disagree on the class count");
  for (Modality mod : m.config.modalities) {
    if (data.width(mod) != m.config.input_width(mod)) {
      throw ConfigError("checkpoint expects " + std::string(to_string(mod)) + " width " +
                        std::to_string(m.config.input_width(mod)) + ", dataset has " +
                        std::to_string(data.width(mod)));
    }
  }
}

void write_metrics(const fs::path& dir, const metrics::MetricsReport& r) {
  io::write_file_atomic(dir / "metrics.csv", report::metrics_csv(r));
  io::write_file_atomic(dir / "confusion.csv", report::confusion_csv(r));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

metrics::MetricsReport train_once(const config::RunConfig& c, const Split& data, const fs::path& dir,
                                  std::ostream& out, bool quiet) {
  const auto tc = c.train_config(data.train.widths);
  fs::create_directories(dir);
  io::write_file_atomic(dir / "config.txt", c.to_text());

  const auto start = std::chrono::steady_clock::now();
  const auto observer = [&](const train::EpochRecord& r) {
    if (quiet || (r.epoch % 10 != 0 && r.epoch != 1 && r.epoch != tc.epochs)) return;
    out << "epoch " << r.epoch << "  L_norm " << r.norm << "  L_emo " << r.emotion << "  W-Acc "
        << r.weighted_accuracy << '\n';
  };
  auto result = train::train(tc, data.train, observer);
  const double train_seconds = seconds_since(start);

  io::write_file_atomic(dir / "history.csv", report::history_csv(result.history));
  io::save_checkpoint(result.model, dir / "checkpoint");

  auto fit = train::evaluate(result.model, data.train);
  fit.seconds = train_seconds;
  io::write_file_atomic(dir / "train_metrics.csv", report::metrics_csv(fit));
  auto r = data.test ? train::evaluate(result.model, *data.test) : fit;
  r.seconds = train_seconds;
  write_metrics(dir, r);
  if (!quiet) {
    out << "training accuracy " << fit.weighted_accuracy << "  W-F1 " << fit.weighted_f1 << '\n'
        << (data.test ? "held-out" : "training-set") << " metrics (" << r.samples << " utterances):\n"
        << report::metrics_table(r) << "training time: " << train_seconds << " s\n";
    if (result.clamped > 0) out << "probability floor hit " << result.clamped << " times\n";
  }
  return r;
}

int cmd_train(const CommonOptions& common, const std::string& out_dir, int repeats, bool quiet, std::ostream& out) {
  if (repeats < 1) throw ConfigError("--repeats must be at least 1");
  config::RunConfig c = resolve_config(common);
  if (repeats == 1) {
    train_once(c, load_data(c), out_dir, out, quiet);
    return kOk;
  }
  // Repeats vary the initialization only; the data stays fixed.
  if (c.data_seed < 0) c.data_seed = static_cast<Index>(c.seed);
  const Split data = load_data(c);
  std::string summary = "seed,W-Acc,W-F1\n";
  double acc = 0.0;
  double f1 = 0.0;
  for (int r = 0; r < repeats; ++r) {
    config::RunConfig cr = c;
    cr.seed = c.seed + static_cast<std::uint64_t>(r);
    out << "== run " << r + 1 << "/" << repeats << " (seed " << cr.seed << ")\n";
    const auto m = train_once(cr, data, fs::path(out_dir) / ("seed_" + std::to_string(cr.seed)), out, quiet);
    summary += std::to_string(cr.seed) + ',' + config::format_double(m.weighted_accuracy) + ',' +
               config::format_double(m.weighted_f1) + '\n';
    acc += m.weighted_accuracy;
    f1 += m.weighted_f1;
  }
  io::write_file_atomic(fs::path(out_dir) / "repeats.csv", summary);
  out << "mean over " << repeats << " runs: W-Acc " << acc / repeats << "  W-F1 " << f1 / repeats << '\n';
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& config_path,
             const std::string& out_dir, std::ostream& out) {
  const model::Model m = io::load_checkpoint(checkpoint);
  Dataset data;
  if (!dataset.empty()) {
    data = io::read_dataset(dataset, m.config.classes);
  } else {
    fs::path path = config_path;
    if (path.empty()) path = fs::path(checkpoint).parent_path() / "config.txt";
    if (!fs::exists(path)) throw ConfigError("no --dataset given and no run config found at " + path.string());
    const auto c = config::RunConfig::load(path);
    if (!c.test_data.empty()) {
      data = io::read_dataset(c.test_data, m.config.classes);
    } else {
      if (!c.train_data.empty() || c.test_dialogues < 1) {
        throw ConfigError("the run config has no held-out split; pass --dataset");
      }
      auto split = load_data(c);
      data = std::move(*split.test);
    }
  }
  check_compatible(m, data);
  const auto start = std::chrono::steady_clock::now();
  auto r = train::evaluate(m, data);
  r.seconds = seconds_since(start);
  out << report::metrics_table(r) << "evaluation time: " << r.seconds << " s\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_metrics(out_dir, r);
  }
  return kOk;
}

struct GradcheckOptions {
  std::uint64_t seed = 1;
  double eps = 1e-4;
  double tolerance = 1e-4;
  std::string discretization = "zoh";
  std::string fusion = "probability";
  std::string target = "self";
  Index layers = 1;
};

int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out) {
  auto p = train::small_problem(o.seed, ssm::parse_discretization(o.discretization), fusion::parse_fusion_mode(o.fusion),
                                model::parse_bls_target(o.target), o.layers);
  const auto r = train::grad_check(p.model, p.batch, o.eps);
  const bool pass = r.max_relative_error <= o.tolerance;
  out << (pass ? "PASS" : "FAIL") << " gradcheck: max relative error " << r.max_relative_error << " over "
      << r.checked << " scalars (worst " << r.worst_parameter << "[" << r.worst_index << "], analytic " << r.analytic
      << ", numeric " << r.numeric << ")\n";
  return pass ? kOk : kCheckFailed;
}

int cmd_gendata(const CommonOptions& common, const std::string& out_dir, std::ostream& out) {
  const auto c = resolve_config(common);
  if (!c.train_data.empty()) throw ConfigError("gendata writes synthetic data; train_data must be empty");
  const auto split = load_data(c);
  fs::create_directories(out_dir);
  io::write_file_atomic(fs::path(out_dir) / "config.txt", c.to_text());
  io::write_dataset(split.train, fs::path(out_dir) / "train");
  if (split.test) io::write_dataset(*split.test, fs::path(out_dir) / "test");
  out << "wrote " << split.train.dialogues.size() << " training dialogues";
  if (split.test) out << " and " << split.test->dialogues.size() << " held-out dialogues";
  out << " to " << out_dir << '\n';
  return kOk;
}

struct KernelOptions {
  std::vector<double> A, B, C;
  double delta = 0.0;
  double D = 0.0;
  Index length = 16;
  std::string discretization = "zoh";
  std::string out;
};

int cmd_kernel_dump(const KernelOptions& o, std::ostream& out) {
  const auto n = static_cast<Index>(o.A.size());
  if (n == 0 || o.B.size() != o.A.size() || o.C.size() != o.A.size()) {
    throw ConfigError("--A, --B and --C need the same non-zero number of entries");
  }
  if (!(o.delta >= 0.0) || !std::isfinite(o.delta)) throw ConfigError("--delta must be finite and non-negative");
  ssm::ContinuousSSM sys;
  sys.A = Eigen::Map<const Matrix>(o.A.data(), 1, n);
  sys.B = Eigen::Map<const Matrix>(o.B.data(), 1, n);
  sys.C = Eigen::Map<const Matrix>(o.C.data(), 1, n);
  sys.D = Vector::Constant(1, o.D);
  sys.log_delta = Vector::Constant(1, o.delta > 0.0 ? ssm::softplus_inverse(o.delta)
                                                   : -std::numeric_limits<double>::infinity());
  const auto disc = ssm::discretize(sys, ssm::parse_discretization(o.discretization));
  const auto kernel = ssm::materialize_kernel(disc, o.length);
  if (!o.out.empty()) io::write_tensor(o.out, io::from_matrix(kernel.taps));
  out << "kernel (" << o.length << " taps):";
  for (Index i = 0; i < std::min<Index>(o.length, 8); ++i) out << ' ' << kernel.taps(0, i);
  if (o.length > 8) out << " ...";
  out << '\n';
  return kOk;
}

int cmd_bench(const BenchConfig& bc, const std::string& out_dir, std::ostream& out) {
  const auto rows = run_scaling_bench(bc);
  const std::string csv = bench_csv(rows);
  out << csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    io::write_file_atomic(fs::path(out_dir) / "bench.csv", csv);
  }
  if (rows.size() >= 2) {
    std::vector<double> L, naive, fft, scan;
    for (const auto& r : rows) {
      L.push_back(static_cast<double>(r.length));
      naive.push_back(r.naive_ns);
      fft.push_back(r.fft_ns);
      scan.push_back(r.scan_ns);
    }
    out << "log-log slope: naive " << loglog_slope(L, naive) << ", fft " << loglog_slope(L, fft) << ", scan "
        << loglog_slope(L, scan) << '\n';
  }
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Broad Mamba: bidirectional SSM + broad learning for multi-modal emotion recognition", "bmamba"};
  app.require_subcommand(1);

  CommonOptions train_common;
  std::string train_out;
  int repeats = 1;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, history and metrics");
  train_cmd->add_option("--config", train_common.config, "run configuration file");
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--seed", train_common.seed, "override the config seed");
  train_cmd->add_option("--modalities", train_common.modalities, "modality subset, e.g. t,a");
  train_cmd->add_option("--repeats", repeats, "independent initializations (seed, seed+1, ...)");
  train_cmd->add_flag("--quiet", quiet, "no progress output");

  std::string checkpoint, dataset, eval_config, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--dataset", dataset, "dataset directory (default: held-out split of the run config)");
  eval_cmd->add_option("--config", eval_config, "run config (default: <checkpoint>/../config.txt)");
  eval_cmd->add_option("--out", eval_out, "directory for metrics.csv and confusion.csv");

  BenchConfig bench;
  std::string bench_out;
  auto* bench_cmd = app.add_subcommand("bench", "time naive vs fft convolution vs scan");
  bench_cmd->add_option("--lengths", bench.lengths, "sequence lengths")->delimiter(',');
  bench_cmd->add_option("--repeats", bench.repeats, "timed repetitions (median reported)");
  bench_cmd->add_option("--warmup", bench.warmup, "untimed warmup runs");
  bench_cmd->add_option("--seed", bench.seed, "seed for the random systems");
  bench_cmd->add_option("--out", bench_out, "directory for bench.csv");

  GradcheckOptions gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every trainable parameter");
  grad_cmd->add_option("--seed", gc.seed, "seed for the small problem");
  grad_cmd->add_option("--eps", gc.eps, "central-difference step");
  grad_cmd->add_option("--tolerance", gc.tolerance, "maximum relative error");
  grad_cmd->add_option("--discretization", gc.discretization, "zoh or taylor");
  grad_cmd->add_option("--fusion", gc.fusion, "probability, add or concat");
  grad_cmd->add_option("--bls-target", gc.target, "self or labels");
  grad_cmd->add_option("--layers", gc.layers, "BiSSM layers");

  CommonOptions gen_common;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gendata", "write the synthetic train/test split as tensor files");
  gen_cmd->add_option("--config", gen_common.config, "run configuration file");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->add_option("--seed", gen_common.seed, "override the config seed");

  KernelOptions ko;
  auto* kernel_cmd = app.add_subcommand("kernel-dump", "materialize the kernel of a one-channel system");
  kernel_cmd->add_option("--A", ko.A, "state rates, comma separated")->delimiter(',')->required();
  kernel_cmd->add_option("--B", ko.B, "input gains")->delimiter(',')->required();
  kernel_cmd->add_option("--C", ko.C, "output gains")->delimiter(',')->required();
  kernel_cmd->add_option("--delta", ko.delta, "timescale")->required();
  kernel_cmd->add_option("--D", ko.D, "skip gain (not part of the kernel)");
  kernel_cmd->add_option("--length", ko.length, "number of taps");
  kernel_cmd->add_option("--discretization", ko.discretization, "zoh or taylor");
  kernel_cmd->add_option("--out", ko.out, "tensor file to write");

  std::vector<std::string> argv_storage{"bmamba"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train_cmd) return cmd_train(train_common, train_out, repeats, quiet, out);
    if (*eval_cmd) return cmd_eval(checkpoint, dataset, eval_config, eval_out, out);
    if (*bench_cmd) return cmd_bench(bench, bench_out, out);
    if (*grad_cmd) return cmd_gradcheck(gc, out);
    if (*gen_cmd) return cmd_gendata(gen_common, gen_out, out);
    if (*kernel_cmd) return cmd_kernel_dump(ko, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParameterError& e) {
    err << "invalid parameter: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
  return kConfigError;
}

}  // namespace bmamba::cli
