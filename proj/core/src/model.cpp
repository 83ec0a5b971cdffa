#include "bmamba/model.hpp"

#include <algorithm>
#include <string>

#include "bmamba/errors.hpp"

namespace bmamba::model {

std::string_view to_string(BlsTarget t) { return t == BlsTarget::self ? "self" : "labels"; }

BlsTarget parse_bls_target(std::string_view name) {
  if (name == "self") return BlsTarget::self;
  if (name == "labels") return BlsTarget::labels;
  throw ConfigError("unknown bls_target '" + std::string(name) + "' (expected self or labels)");
}

void ModelConfig::validate() const {
  if (classes < 2) throw ConfigError("classes must be at least 2");
  if (modalities.empty()) throw ConfigError("at least one modality is required");
  for (Modality m : modalities) {
    if (input_width(m) < 1) throw ConfigError("missing input width for " + std::string(bmamba::to_string(m)));
  }
  if (d_m < 2 || d_m % 2 != 0) throw ConfigError("d_m must be even and at least 2");
  if (state_size < 1) throw ConfigError("state_size must be positive");
  if (layers < 0) throw ConfigError("layers must be non-negative");
  if (conv_width < 1 || conv_width % 2 == 0) throw ConfigError("conv_width must be odd");
  if (broad.feature_groups < 1 || broad.enhancement_groups < 1) {
    throw ConfigError("n_feature_nodes and m_enhance_nodes must be positive");
  }
  if (broad.feature_width < 1 || broad.enhancement_width < 1) throw ConfigError("d_z and d_h must be positive");
  if (!(broad.lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (hidden_fusion < 1 || hidden_classifier < 1) throw ConfigError("hidden widths must be positive");
}

Model make_model(const ModelConfig& config) {
  config.validate();
  Model model;
  model.config = config;
  Rng rng(derive_seed(config.seed, 0));
  for (Modality m : config.modalities) {
    ModalityEncoder enc;
    enc.modality = m;
    enc.conv = embedding::make_conv1d(m, config.input_width(m), config.d_m, config.conv_width, rng);
    for (Index b = 0; b < config.layers; ++b) {
      enc.blocks.push_back(bissm::make_block(config.d_m, config.state_size, config.discretization, rng));
    }
    enc.broad = broad::make_broad_space(config.d_m, config.broad,
                                        derive_seed(config.seed, 100 + static_cast<std::uint64_t>(m)));
    model.encoders.push_back(std::move(enc));
  }
  const Index width = model.encoders.front().broad.broad_width();
  model.head = fusion::make_head(config.modalities, width, config.classes, config.hidden_fusion,
                                 config.hidden_classifier, config.fusion, rng);
  return model;
}

std::vector<ParameterView> parameter_views(Model& model, bool trainable_only) {
  std::vector<ParameterView> views;
  visit_tensors(model, [&](const std::string& name, auto& t, bool trainable) {
    if (trainable_only && !trainable) return;
    views.push_back({name, t.data(), t.rows(), t.cols(), trainable});
  });
  return views;
}

std::size_t parameter_count(const Model& model) {
  std::size_t n = 0;
  visit_tensors(model, [&](const std::string&, const auto& t, bool trainable) {
    if (trainable) n += static_cast<std::size_t>(t.size());
  });
  return n;
}

std::size_t frozen_count(const Model& model) {
  std::size_t n = 0;
  visit_tensors(model, [&](const std::string&, const auto& t, bool trainable) {
    if (!trainable) n += static_cast<std::size_t>(t.size());
  });
  return n;
}

Model zeros_like(const Model& model) {
  Model z;
  z.config = model.config;
  z.head = model.head;
  for (const auto& enc : model.encoders) {
    ModalityEncoder e;
    e.modality = enc.modality;
    e.conv = enc.conv;
    e.blocks = enc.blocks;
    e.broad.config = enc.broad.config;
    z.encoders.push_back(std::move(e));
  }
  visit_tensors(z, [](const std::string&, auto& t, bool) { t.setZero(); });
  return z;
}

Matrix NormTargets::ridge_map(std::size_t i) const {
  if (i < W_b.size() && W_b[i].size() > 0) return W_b[i];
  return basis.at(i) * basis.at(i).transpose();
}

EncoderTrace encode(const Model& model, std::size_t encoder, const Matrix& features) {
  const auto& enc = model.encoders.at(encoder);
  EncoderTrace trace;
  trace.embedded = embedding::embed(enc.conv, {enc.modality, features}).data;
  const Matrix* input = &trace.embedded;
  trace.block_outputs.reserve(enc.blocks.size());
  for (const auto& block : enc.blocks) {
    trace.block_outputs.push_back(bissm::bissm(block, *input));
    input = &trace.block_outputs.back();
  }
  trace.features = broad::broad_features(enc.broad, *input);
  return trace;
}

ForwardTrace forward(const Model& model, const EmotionBatch& batch) {
  batch.validate(model.config.modalities);
  ForwardTrace trace;
  std::vector<Matrix> Y;
  for (std::size_t i = 0; i < model.encoders.size(); ++i) {
    trace.encoders.push_back(encode(model, i, batch.feature(model.encoders[i].modality)));
    Y.push_back(trace.encoders.back().features.Y);
  }
  if (model.head.mode == fusion::FusionMode::probability) {
    for (std::size_t i = 0; i < Y.size(); ++i) {
      trace.scorers.push_back(fusion::mlp_forward(model.head.scorers[i], Y[i]));
      const auto& s = trace.scorers.back().output;
      Vector w(s.rows());
      for (Index t = 0; t < s.rows(); ++t) w[t] = fusion::sigmoid(s(t, 0));
      trace.weights.push_back(std::move(w));
    }
  }
  trace.fused = fusion::fuse_modalities(model.head.mode, Y, trace.weights);
  trace.classifier = fusion::mlp_forward(model.head.classifier, trace.fused);
  trace.probabilities = fusion::softmax_rows(trace.classifier.output);
  return trace;
}

std::vector<int> predict(const Model& model, const EmotionBatch& batch) {
  return fusion::argmax_rows(forward(model, batch).probabilities);
}

namespace {

Matrix one_hot(std::span<const int> labels, int classes) {
  Matrix m = Matrix::Zero(static_cast<Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<Index>(i), labels[i]) = 1.0;
  return m;
}

}  // namespace

NormTargets fit_norm_targets(const Model& model, std::span<const EmotionBatch> probe, Index max_rows) {
  if (probe.empty()) throw ConfigError("probe set for the ridge map is empty");
  Index rows = 0;
  for (const auto& b : probe) rows += b.length();
  if (max_rows >= 0) rows = std::min(rows, max_rows);
  if (rows < 1) throw ConfigError("probe set for the ridge map is empty");
  NormTargets targets;
  for (std::size_t i = 0; i < model.encoders.size(); ++i) {
    const auto& enc = model.encoders[i];
    Matrix F(rows, enc.broad.broad_width());
    Matrix labels = Matrix::Zero(rows, model.config.classes);
    Index r = 0;
    for (const auto& b : probe) {
      if (r == rows) break;
      b.validate(model.config.modalities);
      const Index take = std::min(b.length(), rows - r);
      F.middleRows(r, take) = encode(model, i, b.feature(enc.modality)).features.Y.topRows(take);
      labels.middleRows(r, take) = one_hot(b.labels, model.config.classes).topRows(take);
      r += take;
    }
    const double lambda = enc.broad.config.lambda;
    if (model.config.bls_target == BlsTarget::self) {
      const Matrix U = broad::ridge_self_factor(F, lambda);
      const Eigen::SelfAdjointEigenSolver<Matrix> eig(U * U.transpose());
      if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the ridge factor failed");
      // ||W_b||^2 = sum s^2
      targets.penalty.push_back(lambda * eig.eigenvalues().squaredNorm());
      targets.basis.push_back(U.transpose() * eig.eigenvectors());
      targets.spectrum.push_back(eig.eigenvalues());
      targets.W_b.emplace_back();
    } else {
      Matrix W = broad::ridge_solve(F, labels, lambda);
      targets.penalty.push_back(lambda * W.squaredNorm());
      targets.W_b.push_back(std::move(W));
      targets.basis.emplace_back();
      targets.spectrum.emplace_back();
    }
  }
  return targets;
}

namespace {

// Value of the norm term and/or its gradient with respect to each Y_m.
struct NormTerms {
  double value = 0.0;
  std::vector<Matrix> dY;
};

enum class NormWork { precise_value, gradient, fast_both };

NormTerms norm_terms(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch,
                     const NormTargets& targets, NormWork work) {
  NormTerms out;
  const bool want_value = work != NormWork::gradient;
  const bool want_grad = work != NormWork::precise_value;
  for (std::size_t i = 0; i < trace.encoders.size(); ++i) {
    const Matrix& Y = trace.encoders[i].features.Y;
    if (model.config.bls_target == BlsTarget::self) {
      const Matrix& V = targets.basis[i];
      Matrix A = Y * V;
      if (work == NormWork::precise_value) {
        // R = Y W - Y is small next to Y; ||R||^2 avoids the cancellation
        // in sum(Y .* Y G), which matters for finite differences.
        out.value += (A * V.transpose() - Y).squaredNorm();
      } else {
        A *= (targets.spectrum[i].array() - 2.0).matrix().asDiagonal();
        Matrix YG = Y;
        YG.noalias() += A * V.transpose();
        if (want_value) out.value += (Y.array() * YG.array()).sum();
        out.dY.push_back(2.0 * YG);
      }
    } else {
      const Matrix& W = targets.W_b[i];
      const Matrix R = Y * W - one_hot(batch.labels, model.config.classes);
      if (want_value) out.value += R.squaredNorm();
      if (want_grad) out.dY.push_back(2.0 * R * W.transpose());
    }
    out.value += targets.penalty[i];
  }
  return out;
}

Losses combine(double norm, const ForwardTrace& trace, const EmotionBatch& batch) {
  Losses out;
  out.norm = norm;
  const auto emo = fusion::emotion_loss(trace.probabilities, batch.labels);
  out.emotion = emo.value;
  out.clamped = emo.clamped;
  out.total = fusion::total_loss(out.norm, out.emotion);
  return out;
}

Model backward_impl(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch,
                    std::vector<Matrix> norm_dY);

}  // namespace

Losses compute_losses(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch,
                      const NormTargets& targets) {
  return combine(norm_terms(model, trace, batch, targets, NormWork::precise_value).value, trace, batch);
}

Model backward(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch,
               const NormTargets& targets) {
  return backward_impl(model, trace, batch, norm_terms(model, trace, batch, targets, NormWork::gradient).dY);
}

Step loss_and_gradient(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch,
                       const NormTargets& targets) {
  auto terms = norm_terms(model, trace, batch, targets, NormWork::fast_both);
  Step step{combine(terms.value, trace, batch), {}};
  step.gradient = backward_impl(model, trace, batch, std::move(terms.dY));
  return step;
}

namespace {

Model backward_impl(const Model& model, const ForwardTrace& trace, const EmotionBatch& batch,
                    std::vector<Matrix> norm_dY) {
  Model grad = zeros_like(model);
  const Index T = batch.length();
  const std::size_t count = model.encoders.size();

  Matrix dlogits = trace.probabilities;
  for (Index t = 0; t < T; ++t) dlogits(t, batch.labels[static_cast<std::size_t>(t)]) -= 1.0;
  dlogits /= static_cast<double>(T);

  auto cg = fusion::mlp_backward(model.head.classifier, trace.fused, trace.classifier, dlogits);
  grad.head.classifier = std::move(cg.parameters);
  const Matrix& dfused = cg.input;

  for (std::size_t i = 0; i < count; ++i) {
    const auto& enc = model.encoders[i];
    const auto& et = trace.encoders[i];
    const Matrix& Y = et.features.Y;
    Matrix dY;
    switch (model.head.mode) {
      case fusion::FusionMode::probability: {
        const Vector& w = trace.weights[i];
        dY = dfused.array().colwise() * w.array();
        Matrix dscore(T, 1);
        for (Index t = 0; t < T; ++t) {
          const double dw = dfused.row(t).dot(Y.row(t));
          dscore(t, 0) = dw * w[t] * (1.0 - w[t]);
        }
        auto sg = fusion::mlp_backward(model.head.scorers[i], Y, trace.scorers[i], dscore);
        grad.head.scorers[i] = std::move(sg.parameters);
        dY += sg.input;
        break;
      }
      case fusion::FusionMode::add:
        dY = dfused;
        break;
      case fusion::FusionMode::concat:
        dY = dfused.middleCols(static_cast<Index>(i) * Y.cols(), Y.cols());
        break;
    }

    dY += norm_dY[i];

    Matrix du = broad::broad_backward(enc.broad, et.features, dY);
    auto& genc = grad.encoders[i];
    for (std::size_t b = enc.blocks.size(); b-- > 0;) {
      const Matrix& input = b == 0 ? et.embedded : et.block_outputs[b - 1];
      auto bg = bissm::bissm_gradients(enc.blocks[b], input, du);
      genc.blocks[b] = std::move(bg.parameters);
      du = std::move(bg.input);
    }
    auto conv = embedding::conv1d_backward(enc.conv, batch.feature(enc.modality), du);
    genc.conv.weight = std::move(conv.weight);
    genc.conv.bias = std::move(conv.bias);
  }
  return grad;
}

}  // namespace

}  // namespace bmamba::model
