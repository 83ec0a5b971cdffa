#include "bmamba/ssm.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <string>

#include "bmamba/errors.hpp"

namespace bmamba::ssm {

std::string_view to_string(Discretization d) { return d == Discretization::zoh ? "zoh" : "taylor"; }

Discretization parse_discretization(std::string_view name) {
  if (name == "zoh") return Discretization::zoh;
  if (name == "taylor") return Discretization::taylor;
  throw ConfigError("unknown discretization '" + std::string(name) + "' (expected zoh or taylor)");
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw ParameterError("softplus_inverse requires a positive argument");
  // log(exp(y) - 1) = y + log(1 - exp(-y))
  return y + std::log(-std::expm1(-y));
}

void ContinuousSSM::validate() const {
  const Index d = A.rows();
  const Index n = A.cols();
  if (d < 1 || n < 1) throw ConfigError("state space system needs at least one channel and one state");
  if (B.rows() != d || B.cols() != n || C.rows() != d || C.cols() != n) {
    throw ConfigError("A, B and C must share the (channels x state) shape");
  }
  if (D.size() != d || log_delta.size() != d) throw ConfigError("D and log_delta need one entry per channel");
  for (Index c = 0; c < d; ++c) {
    if (std::isnan(log_delta[c])) throw ParameterError("log_delta is NaN");
    const double delta = softplus(log_delta[c]);
    if (!std::isfinite(delta)) throw ParameterError("timescale is not finite");
  }
}

namespace {

void check_rates(const ContinuousSSM& sys, bool allow_zero) {
  for (Index i = 0; i < sys.A.size(); ++i) {
    const double a = sys.A.data()[i];
    if (std::isnan(a) || a > 0.0) throw ParameterError("state matrix entries must be negative");
    if (a == 0.0 && !allow_zero) {
      throw DegenerateRateError("zero-order hold is undefined for A = 0; use the taylor rule");
    }
  }
}

}  // namespace

DiscreteSSM discretize_zoh(const ContinuousSSM& sys) {
  sys.validate();
  check_rates(sys, false);
  DiscreteSSM out{Matrix(sys.A.rows(), sys.A.cols()), Matrix(sys.A.rows(), sys.A.cols()), sys.C, sys.D};
  for (Index c = 0; c < sys.channels(); ++c) {
    const double delta = sys.delta(c);
    for (Index n = 0; n < sys.state_size(); ++n) {
      const double a = sys.A(c, n);
      out.Abar(c, n) = std::exp(delta * a);
      out.Bbar(c, n) = std::expm1(delta * a) / a * sys.B(c, n);
    }
  }
  return out;
}

DiscreteSSM discretize_taylor(const ContinuousSSM& sys) {
  sys.validate();
  check_rates(sys, true);
  DiscreteSSM out{Matrix(sys.A.rows(), sys.A.cols()), Matrix(sys.A.rows(), sys.A.cols()), sys.C, sys.D};
  for (Index c = 0; c < sys.channels(); ++c) {
    const double delta = sys.delta(c);
    for (Index n = 0; n < sys.state_size(); ++n) {
      out.Abar(c, n) = std::exp(delta * sys.A(c, n));
      out.Bbar(c, n) = delta * sys.B(c, n);
    }
  }
  return out;
}

DiscreteSSM discretize(const ContinuousSSM& sys, Discretization rule) {
  return rule == Discretization::zoh ? discretize_zoh(sys) : discretize_taylor(sys);
}

Matrix scan(const DiscreteSSM& disc, const Matrix& x, const Matrix& h0) {
  const Index d = disc.channels();
  const Index n = disc.state_size();
  if (x.cols() != d && x.rows() > 0) throw ConfigError("input width does not match channel count");
  if (h0.rows() != d || h0.cols() != n) throw ConfigError("initial state must be channels x state");
  Matrix y(x.rows(), d);
  Vector h(n);
  for (Index c = 0; c < d; ++c) {
    h = h0.row(c).transpose();
    for (Index t = 0; t < x.rows(); ++t) {
      const double xt = x(t, c);
      double acc = 0.0;
      for (Index s = 0; s < n; ++s) {
        h[s] = disc.Abar(c, s) * h[s] + disc.Bbar(c, s) * xt;
        acc += disc.C(c, s) * h[s];
      }
      y(t, c) = acc + disc.D[c] * xt;
    }
  }
  return y;
}

Matrix scan(const DiscreteSSM& disc, const Matrix& x) {
  return scan(disc, x, Matrix::Zero(disc.channels(), disc.state_size()));
}

ConvKernel materialize_kernel(const DiscreteSSM& disc, Index length) {
  if (length < 1) throw ParameterError("kernel length must be positive");
  const Index d = disc.channels();
  const Index n = disc.state_size();
  ConvKernel k{Matrix(d, length)};
  Vector power(n);
  for (Index c = 0; c < d; ++c) {
    power = disc.Bbar.row(c).transpose();
    for (Index i = 0; i < length; ++i) {
      double acc = 0.0;
      for (Index s = 0; s < n; ++s) {
        acc += disc.C(c, s) * power[s];
        power[s] *= disc.Abar(c, s);
        // Subnormal tails are numerically zero but cost ~100x per multiply downstream.
        if (std::abs(power[s]) < std::numeric_limits<double>::min()) power[s] = 0.0;
      }
      k.taps(c, i) = std::abs(acc) < std::numeric_limits<double>::min() ? 0.0 : acc;
    }
  }
  return k;
}

namespace {

void check_conv_shapes(const Matrix& x, const ConvKernel& kernel, const Vector& D) {
  if (x.rows() == 0) return;
  if (x.cols() != kernel.channels()) throw ConfigError("input width does not match kernel channels");
  if (D.size() != kernel.channels()) throw ConfigError("skip vector does not match kernel channels");
}

// fftw's planner is not reentrant; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (plan_ == nullptr) throw Error("fftw failed to create a plan");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  fftw_plan get() const { return plan_; }

 private:
  fftw_plan plan_;
};

Index next_pow2(Index v) {
  Index p = 1;
  while (p < v) p <<= 1;
  return p;
}

}  // namespace

Matrix causal_conv_naive(const Matrix& x, const ConvKernel& kernel, const Vector& D) {
  check_conv_shapes(x, kernel, D);
  const Index T = x.rows();
  const Index d = x.cols();
  Matrix y(T, d);
  Vector reversed(T);
  Vector taps(kernel.length());
  for (Index c = 0; c < d; ++c) {
    // x(j-k) == reversed(T-1-j+k), so each output is a contiguous dot product.
    for (Index t = 0; t < T; ++t) reversed[t] = x(T - 1 - t, c);
    taps = kernel.taps.row(c).transpose();
    for (Index j = 0; j < T; ++j) {
      const Index m = std::min(j + 1, kernel.length());
      y(j, c) = taps.head(m).dot(reversed.segment(T - 1 - j, m)) + D[c] * x(j, c);
    }
  }
  return y;
}

Matrix causal_conv_fft(const Matrix& x, const ConvKernel& kernel, const Vector& D) {
  check_conv_shapes(x, kernel, D);
  const Index T = x.rows();
  const Index d = x.cols();
  Matrix y(T, d);
  if (T == 0) return y;
  const Index taps = std::min(kernel.length(), T);
  const Index n = next_pow2(T + taps - 1);
  const Index bins = n / 2 + 1;

  auto real = fftw_buffer<double>(static_cast<std::size_t>(n));
  auto signal = fftw_buffer<fftw_complex>(static_cast<std::size_t>(bins));
  auto response = fftw_buffer<fftw_complex>(static_cast<std::size_t>(bins));

  std::unique_ptr<Plan> forward_signal, forward_response, inverse;
  {
    std::lock_guard lock(planner_mutex());
    forward_signal = std::make_unique<Plan>(
        fftw_plan_dft_r2c_1d(static_cast<int>(n), real.get(), signal.get(), FFTW_ESTIMATE));
    forward_response = std::make_unique<Plan>(
        fftw_plan_dft_r2c_1d(static_cast<int>(n), real.get(), response.get(), FFTW_ESTIMATE));
    inverse = std::make_unique<Plan>(
        fftw_plan_dft_c2r_1d(static_cast<int>(n), signal.get(), real.get(), FFTW_ESTIMATE));
  }

  const double scale = 1.0 / static_cast<double>(n);
  for (Index c = 0; c < d; ++c) {
    std::fill(real.get(), real.get() + n, 0.0);
    for (Index t = 0; t < T; ++t) real[t] = x(t, c);
    fftw_execute(forward_signal->get());

    std::fill(real.get(), real.get() + n, 0.0);
    for (Index i = 0; i < taps; ++i) real[i] = kernel.taps(c, i);
    fftw_execute(forward_response->get());

    for (Index b = 0; b < bins; ++b) {
      const double re = signal[b][0] * response[b][0] - signal[b][1] * response[b][1];
      const double im = signal[b][0] * response[b][1] + signal[b][1] * response[b][0];
      signal[b][0] = re;
      signal[b][1] = im;
    }
    fftw_execute(inverse->get());
    for (Index t = 0; t < T; ++t) y(t, c) = real[t] * scale + D[c] * x(t, c);
  }
  return y;
}

MatrixF causal_conv_naive(const MatrixF& x, const ConvKernel& kernel, const Vector& D) {
  return causal_conv_naive(Matrix(x.cast<double>()), kernel, D).cast<float>();
}

MatrixF causal_conv_fft(const MatrixF& x, const ConvKernel& kernel, const Vector& D) {
  return causal_conv_fft(Matrix(x.cast<double>()), kernel, D).cast<float>();
}

Matrix causal_conv(const Matrix& x, const ConvKernel& kernel, const Vector& D, ConvPath path) {
  switch (path) {
    case ConvPath::naive:
      return causal_conv_naive(x, kernel, D);
    case ConvPath::fft:
      return causal_conv_fft(x, kernel, D);
    case ConvPath::automatic:
      break;
  }
  return x.rows() <= kDirectConvMaxLength ? causal_conv_naive(x, kernel, D) : causal_conv_fft(x, kernel, D);
}

ContinuousSSM random_system(Index channels, Index state, Rng& rng) {
  if (channels < 1 || state < 1) throw ConfigError("system needs at least one channel and one state");
  std::uniform_real_distribution<double> rate(std::log(0.5), std::log(8.0));
  std::uniform_real_distribution<double> step(0.001, 0.1);
  ContinuousSSM sys;
  sys.A.resize(channels, state);
  for (Index i = 0; i < sys.A.size(); ++i) sys.A.data()[i] = -std::exp(rate(rng));
  sys.log_delta.resize(channels);
  for (Index c = 0; c < channels; ++c) sys.log_delta[c] = softplus_inverse(step(rng));
  const double sd = 1.0 / std::sqrt(static_cast<double>(state));
  sys.B.resize(channels, state);
  sys.C.resize(channels, state);
  fill_normal(sys.B, sd, rng);
  fill_normal(sys.C, sd, rng);
  sys.D = Vector::Ones(channels);
  return sys;
}

}  // namespace bmamba::ssm
