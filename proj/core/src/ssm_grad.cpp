#include <algorithm>
#include <cmath>

#include "bmamba/errors.hpp"
#include "bmamba/ssm.hpp"

namespace bmamba::ssm {

Matrix conv_kernel_grad(const Matrix& x, const Matrix& upstream, Index length) {
  if (x.rows() != upstream.rows() || x.cols() != upstream.cols()) {
    throw ConfigError("conv_kernel_grad: input and upstream shapes differ");
  }
  const Index T = x.rows();
  Matrix grad = Matrix::Zero(x.cols(), length);
  for (Index c = 0; c < x.cols(); ++c) {
    for (Index k = 0; k < std::min(length, T); ++k) {
      double acc = 0.0;
      for (Index j = k; j < T; ++j) acc += upstream(j, c) * x(j - k, c);
      grad(c, k) = acc;
    }
  }
  return grad;
}

Matrix conv_input_grad(const Matrix& upstream, const ConvKernel& kernel) {
  const Index T = upstream.rows();
  if (T > 0 && upstream.cols() != kernel.channels()) throw ConfigError("conv_input_grad: width mismatch");
  Matrix grad(T, upstream.cols());
  for (Index c = 0; c < upstream.cols(); ++c) {
    for (Index l = 0; l < T; ++l) {
      const Index last = std::min(T, l + kernel.length());
      double acc = 0.0;
      for (Index j = l; j < last; ++j) acc += kernel.taps(c, j - l) * upstream(j, c);
      grad(l, c) = acc;
    }
  }
  return grad;
}

DiscreteGradients kernel_backward(const DiscreteSSM& disc, const Matrix& tap_grad) {
  const Index d = disc.channels();
  const Index n = disc.state_size();
  if (tap_grad.rows() != d) throw ConfigError("kernel_backward: tap gradient has wrong channel count");
  DiscreteGradients out{Matrix(d, n), Matrix(d, n), Matrix(d, n)};
  for (Index c = 0; c < d; ++c) {
    for (Index s = 0; s < n; ++s) {
      const double a = disc.Abar(c, s);
      // weighted = sum_i g_i a^i, slope = sum_i g_i i a^(i-1)
      double weighted = 0.0;
      double slope = 0.0;
      double power = 1.0;
      double previous = 0.0;
      for (Index i = 0; i < tap_grad.cols(); ++i) {
        const double g = tap_grad(c, i);
        weighted += g * power;
        if (i > 0) slope += g * static_cast<double>(i) * previous;
        previous = power;
        power *= a;
      }
      out.C(c, s) = weighted * disc.Bbar(c, s);
      out.Bbar(c, s) = disc.C(c, s) * weighted;
      out.Abar(c, s) = disc.C(c, s) * disc.Bbar(c, s) * slope;
    }
  }
  return out;
}

ContinuousGradients discretize_backward(const ContinuousSSM& sys, Discretization rule, const Matrix& dAbar,
                                        const Matrix& dBbar) {
  const Index d = sys.channels();
  const Index n = sys.state_size();
  ContinuousGradients out{Matrix(d, n), Matrix(d, n), Vector(d)};
  for (Index c = 0; c < d; ++c) {
    const double ld = sys.log_delta[c];
    const double delta = softplus(ld);
    const double dsoftplus = ld >= 0.0 ? 1.0 / (1.0 + std::exp(-ld)) : std::exp(ld) / (1.0 + std::exp(ld));
    double ddelta = 0.0;
    for (Index s = 0; s < n; ++s) {
      const double a = sys.A(c, s);
      const double b = sys.B(c, s);
      const double abar = std::exp(delta * a);
      const double ga = dAbar(c, s);
      const double gb = dBbar(c, s);
      if (rule == Discretization::zoh) {
        const double em1 = std::expm1(delta * a);
        out.A(c, s) = ga * delta * abar + gb * b * (delta * abar / a - em1 / (a * a));
        out.B(c, s) = gb * em1 / a;
        ddelta += ga * a * abar + gb * b * abar;
      } else {
        out.A(c, s) = ga * delta * abar;
        out.B(c, s) = gb * delta;
        ddelta += ga * a * abar + gb * b;
      }
    }
    out.log_delta[c] = ddelta * dsoftplus;
  }
  return out;
}

}  // namespace bmamba::ssm
