#include "bmamba/fusion.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bmamba/errors.hpp"

namespace bmamba::fusion {

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::probability:
      return "probability";
    case FusionMode::add:
      return "add";
    case FusionMode::concat:
      return "concat";
  }
  return "unknown";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "probability") return FusionMode::probability;
  if (name == "add") return FusionMode::add;
  if (name == "concat") return FusionMode::concat;
  throw ConfigError("unknown fusion mode '" + std::string(name) + "' (expected probability, add or concat)");
}

Mlp make_mlp(Index in_width, Index hidden_width, Index out_width, Rng& rng) {
  if (in_width < 1 || hidden_width < 1 || out_width < 1) throw ConfigError("MLP widths must be positive");
  Mlp mlp;
  mlp.W1.resize(in_width, hidden_width);
  mlp.W2.resize(hidden_width, out_width);
  fill_normal(mlp.W1, 1.0 / std::sqrt(static_cast<double>(in_width)), rng);
  fill_normal(mlp.W2, 1.0 / std::sqrt(static_cast<double>(hidden_width)), rng);
  mlp.b1 = Vector::Zero(hidden_width);
  mlp.b2 = Vector::Zero(out_width);
  return mlp;
}

MlpTrace mlp_forward(const Mlp& mlp, const Matrix& X) {
  if (X.cols() != mlp.in_width()) throw ConfigError("MLP input width mismatch");
  MlpTrace t;
  t.hidden = X * mlp.W1;
  t.hidden.rowwise() += mlp.b1.transpose();
  t.hidden = t.hidden.cwiseMax(0.0);
  t.output = t.hidden * mlp.W2;
  t.output.rowwise() += mlp.b2.transpose();
  return t;
}

MlpGradients mlp_backward(const Mlp& mlp, const Matrix& X, const MlpTrace& trace, const Matrix& dout) {
  MlpGradients g;
  g.parameters.W2 = trace.hidden.transpose() * dout;
  g.parameters.b2 = dout.colwise().sum().transpose();
  const Matrix dhidden = (trace.hidden.array() > 0.0).select(dout * mlp.W2.transpose(), 0.0);
  g.parameters.W1 = X.transpose() * dhidden;
  g.parameters.b1 = dhidden.colwise().sum().transpose();
  g.input = dhidden * mlp.W1.transpose();
  return g;
}

FusionHead make_head(const std::vector<Modality>& modalities, Index broad_width, Index classes,
                     Index hidden_fusion, Index hidden_classifier, FusionMode mode, Rng& rng) {
  if (modalities.empty()) throw ConfigError("fusion head needs at least one modality");
  if (classes < 2) throw ConfigError("classifier needs at least two classes");
  FusionHead head;
  head.mode = mode;
  head.modalities = modalities;
  if (mode == FusionMode::probability) {
    for (std::size_t i = 0; i < modalities.size(); ++i) {
      head.scorers.push_back(make_mlp(broad_width, hidden_fusion, 1, rng));
    }
  }
  const Index in = mode == FusionMode::concat ? broad_width * static_cast<Index>(modalities.size()) : broad_width;
  head.classifier = make_mlp(in, hidden_classifier, classes, rng);
  return head;
}

double sigmoid(double x) {
  static const double lo = std::numeric_limits<double>::min();
  static const double hi = std::nextafter(1.0, 0.0);
  const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(s, lo, hi);
}

Vector modality_weight(const Mlp& scorer, const Matrix& Y) {
  if (scorer.out_width() != 1) throw ConfigError("modality scorer must have a single output");
  const MlpTrace t = mlp_forward(scorer, Y);
  Vector w(Y.rows());
  for (Index i = 0; i < Y.rows(); ++i) w[i] = sigmoid(t.output(i, 0));
  return w;
}

Matrix fuse(std::span<const Matrix> Y, std::span<const Vector> weights) {
  if (Y.empty() || Y.size() != weights.size()) throw ConfigError("fuse: one weight vector per modality required");
  Matrix h = Matrix::Zero(Y[0].rows(), Y[0].cols());
  for (std::size_t m = 0; m < Y.size(); ++m) {
    if (Y[m].rows() != h.rows() || Y[m].cols() != h.cols() || weights[m].size() != h.rows()) {
      throw ConfigError("fuse: modality shapes differ");
    }
    h.array() += Y[m].array().colwise() * weights[m].array();
  }
  return h;
}

Matrix fuse(const Matrix& Yt, const Matrix& Ya, const Matrix& Yv, const Vector& wt, const Vector& wa,
            const Vector& wv) {
  const Matrix Y[] = {Yt, Ya, Yv};
  const Vector w[] = {wt, wa, wv};
  return fuse(std::span<const Matrix>(Y), std::span<const Vector>(w));
}

Matrix fuse_modalities(FusionMode mode, std::span<const Matrix> Y, std::span<const Vector> weights) {
  if (Y.empty()) throw ConfigError("fusion needs at least one modality");
  switch (mode) {
    case FusionMode::probability:
      return fuse(Y, weights);
    case FusionMode::add: {
      Matrix h = Y[0];
      for (std::size_t m = 1; m < Y.size(); ++m) {
        if (Y[m].rows() != h.rows() || Y[m].cols() != h.cols()) throw ConfigError("add fusion needs equal widths");
        h += Y[m];
      }
      return h;
    }
    case FusionMode::concat: {
      Index width = 0;
      for (const auto& y : Y) {
        if (y.rows() != Y[0].rows()) throw ConfigError("concat fusion needs equal lengths");
        width += y.cols();
      }
      Matrix h(Y[0].rows(), width);
      Index col = 0;
      for (const auto& y : Y) {
        h.middleCols(col, y.cols()) = y;
        col += y.cols();
      }
      return h;
    }
  }
  throw ConfigError("unknown fusion mode");
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Index k = 0; k < logits.cols(); ++k) {
      p(i, k) = std::exp(logits(i, k) - top);
      sum += p(i, k);
    }
    p.row(i) /= sum;
  }
  return p;
}

std::vector<int> argmax_rows(const Matrix& probabilities) {
  std::vector<int> labels(static_cast<std::size_t>(probabilities.rows()));
  for (Index i = 0; i < probabilities.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < probabilities.cols(); ++k) {
      if (probabilities(i, k) > probabilities(i, best)) best = k;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

Classification classify(const Mlp& classifier, const Matrix& fused) {
  Classification c;
  c.probabilities = softmax_rows(mlp_forward(classifier, fused).output);
  c.labels = argmax_rows(c.probabilities);
  return c;
}

EmotionLoss emotion_loss(const Matrix& probabilities, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != probabilities.rows()) {
    throw ConfigError("emotion_loss: one label per row required");
  }
  EmotionLoss out;
  if (labels.empty()) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= probabilities.cols()) throw ConfigError("emotion_loss: label out of range");
    double p = probabilities(static_cast<Index>(i), y);
    if (!(p >= kProbabilityFloor)) {
      p = kProbabilityFloor;
      ++out.clamped;
    }
    sum -= std::log(p);
  }
  out.value = sum / static_cast<double>(labels.size());
  return out;
}

}  // namespace bmamba::fusion
