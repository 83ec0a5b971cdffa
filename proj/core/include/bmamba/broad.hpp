#pragma once

// Broad learning system on top of the BiSSM output: frozen random feature
// nodes Z_i = u W_zi + b_zi (no activation), ReLU enhancement nodes
// H_j = max(0, Z W_hj + b_hj), and the ridge-regularized output map.

#include <cstdint>

#include "bmamba/types.hpp"

namespace bmamba::broad {

struct BroadConfig {
  Index feature_groups = 10;      // n
  Index enhancement_groups = 30;  // m
  Index feature_width = 16;       // d_z
  Index enhancement_width = 16;   // d_h
  double lambda = 1e-2;
};

/// Group weights are stored side by side: feature_weights is
/// input_width x (n * d_z), enhancement_weights is (n * d_z) x (m * d_h).
/// Column block i of feature_weights is W_z[i]; the same for W_h[j].
struct BroadSpace {
  BroadConfig config;
  Matrix feature_weights;
  Vector feature_bias;
  Matrix enhancement_weights;
  Vector enhancement_bias;

  Index input_width() const { return feature_weights.rows(); }
  Index feature_cols() const { return config.feature_groups * config.feature_width; }
  Index enhancement_cols() const { return config.enhancement_groups * config.enhancement_width; }
  Index broad_width() const { return feature_cols() + enhancement_cols(); }
};

/// Gaussian weights and biases with variance 1/fan-in, drawn from a
/// generator seeded with `seed` only, so equal seeds give equal spaces.
BroadSpace make_broad_space(Index input_width, const BroadConfig& config, std::uint64_t seed);

struct BroadFeatures {
  Matrix Z;  // T x (n * d_z)
  Matrix H;  // T x (m * d_h), entries >= 0
  Matrix Y;  // [Z | H]
};

Matrix feature_nodes(const BroadSpace& space, const Matrix& u);
Matrix enhancement_nodes(const BroadSpace& space, const Matrix& Z);
BroadFeatures broad_features(const BroadSpace& space, const Matrix& u);

/// Solves (F'F + lambda I) W = F' target. Throws ParameterError for lambda <= 0.
Matrix ridge_solve(const Matrix& F, const Matrix& target, double lambda);

/// Self-target ridge map in factored form. With F F' + lambda I = L L' and
/// U = L^-1 F, the push-through identity gives
///   W = (F'F + lambda I)^-1 F'F = F'(F F' + lambda I)^-1 F = U'U,
/// so only a rows x rows system is factored.
Matrix ridge_self_factor(const Matrix& F, double lambda);

/// ||F W - target||^2 + lambda ||W||^2 (squared Frobenius norms).
double norm_loss(const Matrix& F, const Matrix& target, const Matrix& W, double lambda);

/// Self-reconstruction form: F = target = features.Y, lambda from the space.
double bls_norm_loss(const BroadSpace& space, const BroadFeatures& features, const Matrix& W);

/// Adjoint of broad_features: given dL/dY, returns dL/du. The random maps
/// are frozen, so no parameter gradients are produced.
Matrix broad_backward(const BroadSpace& space, const BroadFeatures& features, const Matrix& dY);

}  // namespace bmamba::broad
