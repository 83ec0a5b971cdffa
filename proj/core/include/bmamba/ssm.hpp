#pragma once

// Diagonal linear time-invariant state space systems: discretization,
// sequential scan, kernel materialization and causal convolution.
//
// Every channel is an independent single-input single-output system with a
// diagonal state matrix, so all per-channel parameters are stored as rows of
// a (channels x state) matrix.

#include "bmamba/types.hpp"

namespace bmamba::ssm {

enum class Discretization : std::uint8_t { zoh, taylor };

std::string_view to_string(Discretization d);
Discretization parse_discretization(std::string_view name);

/// Numerically stable log(1 + exp(x)). softplus(-inf) == 0.
double softplus(double x);
/// Inverse of softplus for y > 0.
double softplus_inverse(double y);

struct ContinuousSSM {
  Matrix A;          // channels x state, entries < 0
  Matrix B;          // channels x state
  Matrix C;          // channels x state
  Vector D;          // channels, skip gain
  Vector log_delta;  // channels, timescale = softplus(log_delta)

  Index channels() const { return A.rows(); }
  Index state_size() const { return A.cols(); }
  double delta(Index channel) const { return softplus(log_delta[channel]); }

  /// Checks shapes and that every timescale is finite and non-negative.
  /// Sign checks on A are left to the discretization rule.
  void validate() const;
};

struct DiscreteSSM {
  Matrix Abar;  // channels x state
  Matrix Bbar;  // channels x state
  Matrix C;     // channels x state
  Vector D;     // channels

  Index channels() const { return Abar.rows(); }
  Index state_size() const { return Abar.cols(); }
};

/// Impulse response, one row of taps per channel.
struct ConvKernel {
  Matrix taps;  // channels x length

  Index channels() const { return taps.rows(); }
  Index length() const { return taps.cols(); }
};

/// Zero-order hold: Abar = exp(delta*A), Bbar = expm1(delta*A) / A * B.
/// Throws DegenerateRateError if any A entry is exactly zero and
/// ParameterError if any A entry is positive.
DiscreteSSM discretize_zoh(const ContinuousSSM& sys);

/// First-order rule: Abar = exp(delta*A), Bbar = delta*B. Accepts A <= 0.
DiscreteSSM discretize_taylor(const ContinuousSSM& sys);

DiscreteSSM discretize(const ContinuousSSM& sys, Discretization rule);

/// Sequential recurrence h_t = Abar h_{t-1} + Bbar x_t, y_t = C h_t + D x_t.
/// `h0` is channels x state. A zero-length input yields a zero-length output.
Matrix scan(const DiscreteSSM& disc, const Matrix& x, const Matrix& h0);
Matrix scan(const DiscreteSSM& disc, const Matrix& x);

/// taps(c, i) = sum_n C(c,n) * Abar(c,n)^i * Bbar(c,n) for i in [0, length).
ConvKernel materialize_kernel(const DiscreteSSM& disc, Index length);

/// Direct O(T^2) causal convolution plus skip:
///   y(j,c) = sum_{k=0}^{j} taps(c,k) * x(j-k,c) + D[c] * x(j,c).
/// Taps beyond the kernel length count as zero.
Matrix causal_conv_naive(const Matrix& x, const ConvKernel& kernel, const Vector& D);

/// Same result through a zero-padded FFT linear convolution, O(T log T).
Matrix causal_conv_fft(const Matrix& x, const ConvKernel& kernel, const Vector& D);

/// Single-precision storage variants; arithmetic is carried out in double.
MatrixF causal_conv_naive(const MatrixF& x, const ConvKernel& kernel, const Vector& D);
MatrixF causal_conv_fft(const MatrixF& x, const ConvKernel& kernel, const Vector& D);

enum class ConvPath : std::uint8_t { automatic, naive, fft };

/// Sequences up to this length use the direct path under ConvPath::automatic.
inline constexpr Index kDirectConvMaxLength = 128;

Matrix causal_conv(const Matrix& x, const ConvKernel& kernel, const Vector& D,
                   ConvPath path = ConvPath::automatic);

/// Random stable system: A = -exp(u), u ~ U(log 0.5, log 8); softplus(log_delta)
/// ~ U(0.001, 0.1); B, C ~ N(0, 1/state); D = 1.
ContinuousSSM random_system(Index channels, Index state, Rng& rng);

// ---- adjoints -------------------------------------------------------------

/// Gradient of sum_{j,c} g(j,c) * y(j,c) with respect to the taps of the
/// causal convolution y = x * taps. Result is channels x `length`.
Matrix conv_kernel_grad(const Matrix& x, const Matrix& upstream, Index length);

/// Gradient with respect to x of the causal convolution (no skip term).
Matrix conv_input_grad(const Matrix& upstream, const ConvKernel& kernel);

struct DiscreteGradients {
  Matrix Abar;
  Matrix Bbar;
  Matrix C;
};

/// Pulls a tap gradient (channels x length) back onto Abar, Bbar and C.
DiscreteGradients kernel_backward(const DiscreteSSM& disc, const Matrix& tap_grad);

struct ContinuousGradients {
  Matrix A;
  Matrix B;
  Vector log_delta;
};

/// Pulls Abar/Bbar gradients back through the discretization rule.
ContinuousGradients discretize_backward(const ContinuousSSM& sys, Discretization rule,
                                        const Matrix& dAbar, const Matrix& dBbar);

}  // namespace bmamba::ssm
