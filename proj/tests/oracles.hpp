#pragma once
// Reference implementations written without the library's code paths:
// explicit loops, textbook elimination and arbitrary-precision scalars.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "bmamba/ssm.hpp"
#include "bmamba/types.hpp"

namespace oracle {

using bmamba::Index;
using bmamba::Matrix;
using bmamba::Vector;
using HighPrecision = boost::multiprecision::cpp_dec_float_50;

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Vector random_vector(Index size, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(size);
  for (Index i = 0; i < size; ++i) v[i] = n(rng);
  return v;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  double m = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

// Bbar of the zero-order hold, (exp(delta a) - 1) / a * b, in 50 digits.
inline double zoh_bbar(double a, double b, double delta) {
  const HighPrecision A(a), B(b), D(delta);
  const HighPrecision r = (boost::multiprecision::exp(D * A) - 1) / A * B;
  return r.convert_to<double>();
}

inline double zoh_abar(double a, double delta) {
  const HighPrecision r = boost::multiprecision::exp(HighPrecision(delta) * HighPrecision(a));
  return r.convert_to<double>();
}

// taps(c, i) with the state power carried explicitly, one multiply per step.
inline Matrix kernel_by_state_power(const bmamba::ssm::DiscreteSSM& d, Index length) {
  Matrix taps = Matrix::Zero(d.Abar.rows(), length);
  for (Index c = 0; c < d.Abar.rows(); ++c) {
    std::vector<double> power(static_cast<std::size_t>(d.Abar.cols()), 1.0);
    for (Index i = 0; i < length; ++i) {
      double acc = 0.0;
      for (Index n = 0; n < d.Abar.cols(); ++n) {
        acc += d.C(c, n) * power[static_cast<std::size_t>(n)] * d.Bbar(c, n);
        power[static_cast<std::size_t>(n)] *= d.Abar(c, n);
      }
      taps(c, i) = acc;
    }
  }
  return taps;
}

// y_j = sum_{l <= j} taps[j - l] x_l + D x_j, missing taps treated as zero.
inline Matrix causal_conv(const Matrix& x, const Matrix& taps, const Vector& D) {
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c)
    for (Index j = 0; j < x.rows(); ++j) {
      double acc = D[c] * x(j, c);
      for (Index l = 0; l <= j; ++l)
        if (j - l < taps.cols()) acc += taps(c, j - l) * x(l, c);
      y(j, c) = acc;
    }
  return y;
}

struct LiteralSystem {
  Matrix A, B, C;     // channels x state
  Vector delta;       // channels
};

// Kernel of a continuous diagonal system under ZOH, from std::exp/std::expm1
// and a repeated product.
inline Matrix zoh_kernel(const LiteralSystem& s, Index length) {
  Matrix taps(s.A.rows(), length);
  for (Index c = 0; c < s.A.rows(); ++c)
    for (Index i = 0; i < length; ++i) {
      double acc = 0.0;
      for (Index n = 0; n < s.A.cols(); ++n) {
        const double a = std::exp(s.delta[c] * s.A(c, n));
        const double b = std::expm1(s.delta[c] * s.A(c, n)) / s.A(c, n) * s.B(c, n);
        double p = 1.0;
        for (Index k = 0; k < i; ++k) p *= a;
        acc += s.C(c, n) * p * b;
      }
      taps(c, i) = acc;
    }
  return taps;
}

// Bidirectional block written as the two sums plus the skip, both sums
// including l == j.
inline Matrix bissm_literal(const Matrix& kf, const Matrix& kb, const Vector& skip, const Matrix& x) {
  const Index T = x.rows();
  Matrix y(T, x.cols());
  for (Index c = 0; c < x.cols(); ++c)
    for (Index j = 0; j < T; ++j) {
      double acc = 0.0;
      for (Index l = 0; l <= j; ++l) acc += kf(c, j - l) * x(l, c);
      for (Index l = j; l < T; ++l) acc += kb(c, l - j) * x(l, c);
      y(j, c) = acc + skip[c] * x(j, c);
    }
  return y;
}

// Gaussian elimination with partial pivoting on the normal equations
// (F'F + lambda I) W = F' target, all products by explicit loops.
inline Matrix ridge_by_elimination(const Matrix& F, const Matrix& target, double lambda) {
  const Index p = F.cols();
  const Index q = target.cols();
  std::vector<std::vector<double>> a(static_cast<std::size_t>(p), std::vector<double>(static_cast<std::size_t>(p + q)));
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      double s = 0.0;
      for (Index t = 0; t < F.rows(); ++t) s += F(t, i) * F(t, j);
      a[i][j] = s + (i == j ? lambda : 0.0);
    }
    for (Index k = 0; k < q; ++k) {
      double s = 0.0;
      for (Index t = 0; t < F.rows(); ++t) s += F(t, i) * target(t, k);
      a[i][p + k] = s;
    }
  }
  for (Index col = 0; col < p; ++col) {
    Index pivot = col;
    for (Index r = col + 1; r < p; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    for (Index r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (Index k = col; k < p + q; ++k) a[r][k] -= f * a[col][k];
    }
  }
  Matrix W(p, q);
  for (Index i = 0; i < p; ++i)
    for (Index k = 0; k < q; ++k) W(i, k) = a[i][p + k] / a[i][i];
  return W;
}

inline std::vector<double> softmax_high_precision(const std::vector<double>& logits) {
  std::vector<HighPrecision> e;
  HighPrecision sum = 0;
  for (double z : logits) {
    e.push_back(boost::multiprecision::exp(HighPrecision(z)));
    sum += e.back();
  }
  std::vector<double> out;
  for (const auto& v : e) out.push_back(HighPrecision(v / sum).convert_to<double>());
  return out;
}

// "same"-padded convolution along time; weight row k * d + i is (tap k, input i).
inline Matrix conv1d(const Matrix& x, const Matrix& weight, const Vector& bias, Index width) {
  const Index T = x.rows();
  const Index d = x.cols();
  Matrix y(T, weight.cols());
  for (Index t = 0; t < T; ++t)
    for (Index o = 0; o < weight.cols(); ++o) {
      double acc = bias[o];
      for (Index k = 0; k < width; ++k) {
        const Index src = t + k - width / 2;
        if (src < 0 || src >= T) continue;
        for (Index i = 0; i < d; ++i) acc += weight(k * d + i, o) * x(src, i);
      }
      y(t, o) = acc;
    }
  return y;
}

inline Matrix positional_encoding(Index T, Index D) {
  Matrix pe(T, D);
  for (Index pos = 0; pos < T; ++pos)
    for (Index i = 0; 2 * i < D; ++i) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, 2.0 * static_cast<double>(i) / D);
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  return pe;
}

// Metrics from a K x K count table, nothing shared with the evaluator.
struct Tally {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<double> f1;
  std::vector<std::vector<long>> table;
};

inline Tally tally(const std::vector<int>& truth, const std::vector<int>& pred, int K) {
  Tally out;
  out.table.assign(static_cast<std::size_t>(K), std::vector<long>(static_cast<std::size_t>(K), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++out.table[truth[i]][pred[i]];
  long correct = 0;
  for (int c = 0; c < K; ++c) correct += out.table[c][c];
  const double N = static_cast<double>(truth.size());
  out.accuracy = static_cast<double>(correct) / N;
  for (int c = 0; c < K; ++c) {
    long row = 0, col = 0;
    for (int k = 0; k < K; ++k) {
      row += out.table[c][k];
      col += out.table[k][c];
    }
    const double P = col > 0 ? static_cast<double>(out.table[c][c]) / col : 0.0;
    const double R = row > 0 ? static_cast<double>(out.table[c][c]) / row : 0.0;
    const double f = P + R > 0.0 ? 2.0 * P * R / (P + R) : 0.0;
    out.f1.push_back(f);
    out.weighted_f1 += static_cast<double>(row) / N * f;
  }
  return out;
}

// Least-squares slope of log y against log x.
inline double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace oracle
