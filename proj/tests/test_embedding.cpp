#include <gtest/gtest.h>

#include <cmath>

#include "bmamba/embedding.hpp"
#include "bmamba/errors.hpp"
#include "oracles.hpp"

using namespace bmamba;
using namespace bmamba::embedding;

namespace {

Conv1DLayer layer_with(Index width, const Matrix& weight, const Vector& bias) {
  Conv1DLayer l;
  l.modality = Modality::audio;
  l.kernel_width = width;
  l.weight = weight;
  l.bias = bias;
  return l;
}

}  // namespace

TEST(Conv1D, IdentityConfiguration) {
  std::mt19937_64 rng(1);
  const Matrix x = oracle::random_matrix(7, 4, rng);
  const auto l = layer_with(1, Matrix::Identity(4, 4), Vector::Zero(4));
  EXPECT_EQ(conv1d(l, {Modality::audio, x}).data, x);
}

TEST(Conv1D, CentreTapOnlyIsPerPositionMap) {
  std::mt19937_64 rng(2);
  const Matrix x = oracle::random_matrix(6, 3, rng);
  const Matrix M = oracle::random_matrix(3, 5, rng);
  Matrix w = Matrix::Zero(9, 5);
  w.middleRows(3, 3) = M;
  const auto l = layer_with(3, w, Vector::Zero(5));
  EXPECT_LE(oracle::max_abs_diff(conv1d(l, {Modality::audio, x}).data, x * M), 1e-14);
}

TEST(Conv1D, MatchesTripleLoop) {
  std::mt19937_64 rng(3);
  const auto l = make_conv1d(Modality::audio, 4, 6, 3, rng);
  const Matrix x = oracle::random_matrix(5, 4, rng);
  Conv1DLayer biased = l;
  biased.bias = oracle::random_vector(6, rng);
  EXPECT_LE(oracle::max_abs_diff(conv1d(biased, {Modality::audio, x}).data,
                                 oracle::conv1d(x, biased.weight, biased.bias, 3)),
            1e-14);
}

TEST(Conv1D, Errors) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(make_conv1d(Modality::text, 3, 4, 2, rng), ConfigError);
  const auto l = make_conv1d(Modality::text, 3, 4, 3, rng);
  EXPECT_THROW(conv1d(l, {Modality::text, Matrix::Zero(4, 5)}), ConfigError);
  EXPECT_THROW(conv1d(l, {Modality::video, Matrix::Zero(4, 3)}), ConfigError);
}

TEST(Conv1D, InitialisationVariance) {
  std::mt19937_64 rng(5);
  const auto l = make_conv1d(Modality::text, 40, 50, 3, rng);
  const double var = l.weight.squaredNorm() / static_cast<double>(l.weight.size());
  EXPECT_NEAR(var, 1.0 / 120.0, 0.1 / 120.0);
  EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PositionalEncoding, ZeroPosition) {
  const Matrix pe = positional_encoding(3, 8);
  for (Index i = 0; i < 8; ++i) EXPECT_EQ(pe(0, i), i % 2 == 0 ? 0.0 : 1.0);
}

TEST(PositionalEncoding, FirstPairAtPositionOne) {
  const Matrix pe = positional_encoding(2, 6);
  EXPECT_NEAR(pe(1, 0), 0.841471, 1e-6);
  EXPECT_NEAR(pe(1, 0), std::sin(1.0), 1e-15);
}

TEST(PositionalEncoding, PairsLieOnUnitCircleAndMatchOracle) {
  const Matrix pe = positional_encoding(50, 16);
  for (Index p = 0; p < 50; ++p)
    for (Index i = 0; i < 8; ++i) EXPECT_NEAR(pe(p, 2 * i) * pe(p, 2 * i) + pe(p, 2 * i + 1) * pe(p, 2 * i + 1), 1.0, 1e-14);
  EXPECT_LE(oracle::max_abs_diff(pe, oracle::positional_encoding(50, 16)), 1e-14);
  EXPECT_EQ(positional_encoding(50, 16), pe);
}

TEST(PositionalEncoding, OddWidthRejected) { EXPECT_THROW(positional_encoding(4, 5), ConfigError); }

TEST(Embed, ZeroConvGivesPositionCode) {
  const auto l = layer_with(3, Matrix::Zero(9, 4), Vector::Zero(4));
  std::mt19937_64 rng(6);
  const auto y = embed(l, {Modality::audio, oracle::random_matrix(5, 3, rng)});
  EXPECT_EQ(y.data, positional_encoding(5, 4));
}

TEST(Embed, KnownRowAtPositionZero) {
  Matrix w = Matrix::Zero(4, 4);
  w.setIdentity();
  const auto l = layer_with(1, w, Vector::Zero(4));
  const Matrix x{{0.5, -1.0, 2.0, 3.0}};
  const auto y = embed(l, {Modality::audio, x});
  EXPECT_EQ(y.data, (Matrix{{0.5, 0.0, 2.0, 4.0}}));
}

TEST(Embed, ComposesOracles) {
  std::mt19937_64 rng(7);
  auto l = make_conv1d(Modality::audio, 6, 4, 3, rng);
  l.bias = oracle::random_vector(4, rng);
  const Matrix x = oracle::random_matrix(7, 6, rng);
  const Matrix expect = oracle::conv1d(x, l.weight, l.bias, 3) + oracle::positional_encoding(7, 4);
  EXPECT_LE(oracle::max_abs_diff(embed(l, {Modality::audio, x}).data, expect), 1e-14);
}

TEST(Embed, PositionCodeCancelsInDifferences) {
  std::mt19937_64 rng(8);
  const auto l = make_conv1d(Modality::audio, 3, 4, 3, rng);
  const Matrix x = oracle::random_matrix(6, 3, rng);
  const Matrix diff = embed(l, {Modality::audio, x}).data - embed(l, {Modality::audio, Matrix::Zero(6, 3)}).data;
  EXPECT_LE(oracle::max_abs_diff(diff, conv1d(l, {Modality::audio, x}).data - conv1d(l, {Modality::audio, Matrix::Zero(6, 3)}).data), 1e-14);
}

TEST(Conv1DBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  auto l = make_conv1d(Modality::audio, 3, 4, 3, rng);
  l.bias = oracle::random_vector(4, rng);
  Matrix x = oracle::random_matrix(5, 3, rng);
  const Matrix g = oracle::random_matrix(5, 4, rng);
  const auto grads = conv1d_backward(l, x, g);
  const auto loss = [&] { return (conv1d(l, {Modality::audio, x}).data.array() * g.array()).sum(); };
  const double eps = 1e-6;
  auto check = [&](double& v, double analytic) {
    const double saved = v;
    v = saved + eps;
    const double up = loss();
    v = saved - eps;
    const double down = loss();
    v = saved;
    EXPECT_NEAR((up - down) / (2 * eps), analytic, 1e-8);
  };
  for (Index i = 0; i < l.weight.rows(); ++i)
    for (Index j = 0; j < l.weight.cols(); ++j) check(l.weight(i, j), grads.weight(i, j));
  for (Index j = 0; j < 4; ++j) check(l.bias[j], grads.bias[j]);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 3; ++j) check(x(i, j), grads.input(i, j));
}
