#pragma once

// Probability-guided fusion and the emotion classifier.
//
// Each modality gets a scorer MLP whose sigmoid output is a per-utterance
// scalar weight; the fused vector is the weighted sum of the broad
// representations, and a second MLP classifies it.

#include <cstddef>
#include <span>
#include <vector>

#include "bmamba/types.hpp"

namespace bmamba::fusion {

enum class FusionMode : std::uint8_t { probability, add, concat };

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);

/// One hidden ReLU layer: out = relu(X W1 + b1) W2 + b2.
struct Mlp {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;

  Index in_width() const { return W1.rows(); }
  Index hidden_width() const { return W1.cols(); }
  Index out_width() const { return W2.cols(); }
};

/// Weights ~ N(0, 1/fan_in), zero biases.
Mlp make_mlp(Index in_width, Index hidden_width, Index out_width, Rng& rng);

struct MlpTrace {
  Matrix hidden;  // post-activation
  Matrix output;
};

MlpTrace mlp_forward(const Mlp& mlp, const Matrix& X);

struct MlpGradients {
  Mlp parameters;
  Matrix input;
};

MlpGradients mlp_backward(const Mlp& mlp, const Matrix& X, const MlpTrace& trace, const Matrix& dout);

struct FusionHead {
  FusionMode mode = FusionMode::probability;
  std::vector<Modality> modalities;
  std::vector<Mlp> scorers;  // one per modality in probability mode, empty otherwise
  Mlp classifier;
};

/// `broad_width` is the width of one modality representation. In concat mode
/// the classifier input is modalities.size() * broad_width.
FusionHead make_head(const std::vector<Modality>& modalities, Index broad_width, Index classes,
                     Index hidden_fusion, Index hidden_classifier, FusionMode mode, Rng& rng);

/// Logistic function saturating at the nearest doubles inside (0, 1).
double sigmoid(double x);

/// Per-utterance weight sigmoid(MLP(Y)), strictly inside (0, 1).
Vector modality_weight(const Mlp& scorer, const Matrix& Y);

/// h = w_t * Y_t + w_a * Y_a + w_v * Y_v, weights broadcast along each row.
Matrix fuse(const Matrix& Yt, const Matrix& Ya, const Matrix& Yv, const Vector& wt, const Vector& wa,
            const Vector& wv);
Matrix fuse(std::span<const Matrix> Y, std::span<const Vector> weights);

/// add: plain sum; concat: column concatenation; probability: fuse().
/// `weights` is only read in probability mode.
Matrix fuse_modalities(FusionMode mode, std::span<const Matrix> Y, std::span<const Vector> weights);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

struct Classification {
  Matrix probabilities;     // T x K, rows sum to one
  std::vector<int> labels;  // argmax, lowest index on ties
};

Classification classify(const Mlp& classifier, const Matrix& fused);
std::vector<int> argmax_rows(const Matrix& probabilities);

inline constexpr double kProbabilityFloor = 1e-12;

struct EmotionLoss {
  double value = 0.0;
  std::size_t clamped = 0;  // true-class probabilities raised to kProbabilityFloor
};

/// Mean over the batch of -log p(true class).
EmotionLoss emotion_loss(const Matrix& probabilities, std::span<const int> labels);

inline double total_loss(double norm_loss, double emotion_loss) { return norm_loss + emotion_loss; }

}  // namespace bmamba::fusion
