#include "bmamba_cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "bmamba/config.hpp"
#include "bmamba/errors.hpp"
#include "bmamba/ssm.hpp"

namespace bmamba::cli {

namespace {

template <class F>
double median_ns(int warmup, int repeats, F&& f) {
  for (int i = 0; i < warmup; ++i) f();
  std::vector<double> samples;
  for (int i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    f();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(stop - start).count());
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

// Keeps the optimizer from discarding a result.
volatile double g_sink = 0.0;

}  // namespace

std::vector<BenchRow> run_scaling_bench(const BenchConfig& config) {
  if (config.repeats < 1 || config.warmup < 0) throw ConfigError("repeats must be >= 1 and warmup >= 0");
  if (config.lengths.empty()) throw ConfigError("no lengths given");
  std::vector<BenchRow> rows;
  Rng rng(derive_seed(config.seed, 11));
  for (long L : config.lengths) {
    if (L < 1) throw ConfigError("lengths must be positive");
    const auto sys = ssm::random_system(config.channels, config.state, rng);
    const auto disc = ssm::discretize_zoh(sys);
    const auto kernel = ssm::materialize_kernel(disc, L);
    Matrix x(L, config.channels);
    fill_normal(x, 1.0, rng);

    BenchRow row;
    row.length = L;
    const MatrixF xf = x.cast<float>();
    const MatrixF naive_f = ssm::causal_conv_naive(xf, kernel, disc.D);
    const MatrixF fft_f = ssm::causal_conv_fft(xf, kernel, disc.D);
    row.max_deviation = static_cast<double>((naive_f - fft_f).cwiseAbs().maxCoeff());
    if (!(row.max_deviation <= config.gate_tolerance)) {
      throw Error("fft/naive mismatch at L=" + std::to_string(L) + ": " + config::format_double(row.max_deviation));
    }

    row.naive_ns = median_ns(config.warmup, config.repeats,
                             [&] { g_sink = ssm::causal_conv_naive(x, kernel, disc.D)(L - 1, 0); });
    row.fft_ns = median_ns(config.warmup, config.repeats,
                           [&] { g_sink = ssm::causal_conv_fft(x, kernel, disc.D)(L - 1, 0); });
    row.scan_ns = median_ns(config.warmup, config.repeats, [&] { g_sink = ssm::scan(disc, x)(L - 1, 0); });
    rows.push_back(row);
  }
  return rows;
}

std::string bench_csv(std::span<const BenchRow> rows) {
  std::string out = "L,naive_ns,fft_ns,scan_ns\n";
  for (const auto& r : rows) {
    out += std::to_string(r.length) + ',' + config::format_double(r.naive_ns) + ',' +
           config::format_double(r.fft_ns) + ',' + config::format_double(r.scan_ns) + '\n';
  }
  return out;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit needs at least two points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace bmamba::cli
