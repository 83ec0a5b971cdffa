#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bmamba/data.hpp"
#include "bmamba/metrics.hpp"
#include "bmamba/model.hpp"
#include "bmamba/optim.hpp"

namespace bmamba::train {

struct TrainConfig {
  model::ModelConfig model;
  optim::AdamWConfig optimizer;
  int epochs = 200;
  Index probe_utterances = 256;  // rows used for the per-epoch ridge solve
  bool track_metrics = true;     // W-Acc / W-F1 of the predictions made while training, per epoch
};

struct EpochRecord {
  int epoch = 0;
  double norm = 0.0;     // mean over dialogues
  double emotion = 0.0;  // mean over dialogues
  double total = 0.0;
  double weighted_accuracy = 0.0;
  double weighted_f1 = 0.0;
};

struct TrainResult {
  model::Model model;
  std::vector<EpochRecord> history;
  std::size_t clamped = 0;  // probability-floor hits in the emotion loss
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// One gradient step per dialogue, dialogues shuffled each epoch; the ridge
/// maps are re-fitted at the start of every epoch on the leading
/// probe_utterances of the training set. Deterministic for a fixed seed.
/// Throws NumericError on a non-finite loss or gradient, or when a state
/// rate collapses to zero. Subnormals are flushed to zero while it runs.
TrainResult train(const TrainConfig& config, const Dataset& data, const EpochObserver& observer = {});

/// Continues from an existing model (its config overrides config.model).
TrainResult train(const TrainConfig& config, model::Model initial, const Dataset& data,
                  const EpochObserver& observer = {});

metrics::MetricsReport evaluate(const model::Model& model, const Dataset& data);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, kGradFloor) per scalar.
inline constexpr double kGradFloor = 1e-6;

/// Central differences of `loss` against the analytic gradient, scalar by
/// scalar. `params[i]` and `grads[i]` must describe the same tensor.
GradCheckReport check_gradients(const std::vector<model::ParameterView>& params,
                                const std::vector<model::ParameterView>& grads,
                                const std::function<double()>& loss, double eps);

/// Finite-difference check of every trainable tensor of the model on the
/// total loss, with the ridge maps fitted on `batch` and then held fixed.
GradCheckReport grad_check(model::Model& model, const EmotionBatch& batch, double eps = 1e-4);

/// Smallest distance of any ReLU pre-activation (enhancement nodes and MLP
/// hidden layers) from its kink, for one dialogue.
double relu_margin(const model::Model& model, const EmotionBatch& batch);

/// Finite differences are only meaningful away from ReLU kinks; small
/// problems are redrawn until every pre-activation is this far from zero.
inline constexpr double kSmallProblemMargin = 1e-3;

/// Small model used by the gradient suite and `bmamba gradcheck`:
/// widths <= 8, T = 6. Deterministic in the arguments; if the first draw
/// violates kSmallProblemMargin, further draws use derived seeds.
struct SmallProblem {
  model::Model model;
  EmotionBatch batch;
};
SmallProblem small_problem(std::uint64_t seed, ssm::Discretization rule = ssm::Discretization::zoh,
                           fusion::FusionMode mode = fusion::FusionMode::probability,
                           model::BlsTarget target = model::BlsTarget::self, Index layers = 1);

/// Fusion for ablations over the three modalities. `head` supplies the
/// scorer MLPs in probability mode and is ignored otherwise.
Matrix ablation_fuse(fusion::FusionMode mode, const Matrix& Yt, const Matrix& Ya, const Matrix& Yv,
                     const fusion::FusionHead* head = nullptr);

}  // namespace bmamba::train
