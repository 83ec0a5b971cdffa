#pragma once

// The full pipeline for one dialogue:
//   embed -> BiSSM layers -> broad features Y_m    (per modality)
//   -> fusion -> classifier -> softmax
// plus the two loss terms and their hand-written adjoints.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bmamba/bissm.hpp"
#include "bmamba/broad.hpp"
#include "bmamba/data.hpp"
#include "bmamba/embedding.hpp"
#include "bmamba/fusion.hpp"

namespace bmamba::model {

/// What the ridge map reconstructs: the broad features themselves, or
/// one-hot labels.
enum class BlsTarget : std::uint8_t { self, labels };

std::string_view to_string(BlsTarget t);
BlsTarget parse_bls_target(std::string_view name);

struct ModelConfig {
  int classes = 4;
  std::vector<Modality> modalities{Modality::text, Modality::audio, Modality::video};
  std::array<Index, 3> input_widths{32, 24, 16};
  Index d_m = 32;
  Index state_size = 16;
  Index layers = 1;
  Index conv_width = 3;
  broad::BroadConfig broad;
  Index hidden_fusion = 64;
  Index hidden_classifier = 128;
  ssm::Discretization discretization = ssm::Discretization::zoh;
  fusion::FusionMode fusion = fusion::FusionMode::probability;
  BlsTarget bls_target = BlsTarget::self;
  std::uint64_t seed = 1;

  Index input_width(Modality m) const { return input_widths[static_cast<std::size_t>(m)]; }
  void validate() const;
};

struct ModalityEncoder {
  Modality modality = Modality::text;
  embedding::Conv1DLayer conv;
  std::vector<bissm::BiSSMBlock> blocks;
  broad::BroadSpace broad;  // frozen
};

struct Model {
  ModelConfig config;
  std::vector<ModalityEncoder> encoders;  // one per configured modality
  fusion::FusionHead head;
};

Model make_model(const ModelConfig& config);

/// Calls f(name, tensor, trainable) for every tensor in a fixed order.
/// `tensor` is a Matrix or Vector (const when the model is const).
template <class M, class F>
void visit_tensors(M& model, F&& f) {
  for (auto& enc : model.encoders) {
    const std::string p(to_string(enc.modality));
    f(p + ".conv.weight", enc.conv.weight, true);
    f(p + ".conv.bias", enc.conv.bias, true);
    for (std::size_t b = 0; b < enc.blocks.size(); ++b) {
      auto& block = enc.blocks[b];
      const std::string q = p + ".block" + std::to_string(b);
      auto visit_system = [&](const std::string& s, auto& sys) {
        f(s + ".a_log", sys.a_log, true);
        f(s + ".log_delta", sys.log_delta, true);
        f(s + ".B", sys.B, true);
        f(s + ".C", sys.C, true);
      };
      visit_system(q + ".fwd", block.forward);
      visit_system(q + ".bwd", block.backward);
      f(q + ".skip", block.skip, true);
    }
    f(p + ".broad.feature_weights", enc.broad.feature_weights, false);
    f(p + ".broad.feature_bias", enc.broad.feature_bias, false);
    f(p + ".broad.enhancement_weights", enc.broad.enhancement_weights, false);
    f(p + ".broad.enhancement_bias", enc.broad.enhancement_bias, false);
  }
  auto visit_mlp = [&](const std::string& s, auto& mlp) {
    f(s + ".W1", mlp.W1, true);
    f(s + ".b1", mlp.b1, true);
    f(s + ".W2", mlp.W2, true);
    f(s + ".b2", mlp.b2, true);
  };
  for (std::size_t i = 0; i < model.head.scorers.size(); ++i) {
    visit_mlp("head.scorer." + std::string(to_string(model.head.modalities[i])), model.head.scorers[i]);
  }
  visit_mlp(std::string("head.classifier"), model.head.classifier);
}

struct ParameterView {
  std::string name;
  double* data = nullptr;
  Index rows = 0;
  Index cols = 0;
  bool trainable = true;

  Index size() const { return rows * cols; }
  std::span<double> values() const { return {data, static_cast<std::size_t>(size())}; }
};

/// Views into the model's storage; valid until the model is resized or destroyed.
std::vector<ParameterView> parameter_views(Model& model, bool trainable_only = true);

/// Number of trainable scalars.
std::size_t parameter_count(const Model& model);
/// Number of frozen scalars (the random broad maps).
std::size_t frozen_count(const Model& model);

/// Same structure as `model` with every trainable tensor zeroed; the frozen
/// broad maps are left empty. Used for gradients.
Model zeros_like(const Model& model);

/// Ridge maps fitted on probe data, one per modality, held constant
/// during a backward pass.
///
/// Self target: W_b = U'U (see broad::ridge_self_factor) is never formed.
/// With U U' = P diag(s) P' and V = U'P, W_b = V V' and
///   Y (W_b - I)(W_b - I)' = Y + (Y V) diag(s - 2) V'.
/// Labels target: W_b is stored directly.
struct NormTargets {
  std::vector<Matrix> W_b;       // labels target only
  std::vector<Matrix> basis;     // V, self target only
  std::vector<Vector> spectrum;  // s, self target only
  std::vector<double> penalty;   // lambda * ||W_b||^2

  /// The ridge map of modality i, formed explicitly (for inspection and tests).
  Matrix ridge_map(std::size_t i) const;
};

struct EncoderTrace {
  Matrix embedded;
  std::vector<Matrix> block_outputs;
  broad::BroadFeatures features;

  const Matrix& encoded() const { return block_outputs.empty() ? embedded : block_outputs.back(); }
};

struct ForwardTrace {
  std::vector<EncoderTrace> encoders;
  std::vector<fusion::MlpTrace> scorers;
  std::vector<Vector> weights;
  Matrix fused;
  fusion::MlpTrace classifier;
  Matrix probabilities;
};

/// Encoder stack for one modality, returning its broad features.
EncoderTrace encode(const Model& model, std::size_t encoder, const Matrix& features);

ForwardTrace forward(const Model& model, const EmotionBatch& batch);

std::vector<int> predict(const Model& model, const EmotionBatch& batch);

/// Solves the ridge map per modality on the broad features of `probe`.
/// Dialogues are encoded whole; at most `max_rows` leading utterances enter
/// the solve (all of them when max_rows < 0).
NormTargets fit_norm_targets(const Model& model, std::span<const EmotionBatch> probe, Index max_rows = -1);

struct Losses {
  double norm = 0.0;
  double emotion = 0.0;
  double total = 0.0;
  std::size_t clamped = 0;
};

Losses compute_losses(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch,
                      const NormTargets& targets);

/// Gradient of compute_losses(...).total with respect to every trainable
/// tensor, shaped by zeros_like.
Model backward(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch, const NormTargets& targets);

struct Step {
  Losses losses;
  Model gradient;
};

/// compute_losses and backward together, sharing the norm-term products.
/// The norm value here comes from sum(Y .* Y G), which is cheaper but
/// loses a few digits against compute_losses when Y W is close to Y.
Step loss_and_gradient(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch,
                       const NormTargets& targets);

}  // namespace bmamba::model
