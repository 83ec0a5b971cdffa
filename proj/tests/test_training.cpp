#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

#include "bmamba/errors.hpp"
#include "bmamba/metrics.hpp"
#include "bmamba/synthetic.hpp"
#include "bmamba/train.hpp"
#include "oracles.hpp"

using namespace bmamba;

namespace {

model::ModelConfig tiny_model(int classes, std::array<Index, 3> widths) {
  model::ModelConfig c;
  c.classes = classes;
  c.input_widths = widths;
  c.d_m = 4;
  c.state_size = 3;
  c.broad.feature_groups = 2;
  c.broad.feature_width = 3;
  c.broad.enhancement_groups = 2;
  c.broad.enhancement_width = 4;
  c.broad.lambda = 0.1;
  c.hidden_fusion = 5;
  c.hidden_classifier = 6;
  return c;
}

synthetic::SyntheticSpec tiny_spec() {
  synthetic::SyntheticSpec s;
  s.classes = 3;
  s.utterances = 5;
  s.dialogues = 6;
  s.widths = {5, 4, 3};
  s.seed = 9;
  return s;
}

std::vector<double> flatten(model::Model& m) {
  std::vector<double> out;
  for (const auto& v : model::parameter_views(m, false)) out.insert(out.end(), v.values().begin(), v.values().end());
  return out;
}

}  // namespace

TEST(Synthetic, NoiselessSameClassRowsAreIdentical) {
  auto spec = tiny_spec();
  spec.noise = 0.0;
  const auto data = synthetic::generate(spec);
  std::map<int, std::array<Matrix, 3>> seen;
  for (const auto& d : data.dialogues)
    for (Index t = 0; t < d.length(); ++t) {
      const int c = d.labels[static_cast<std::size_t>(t)];
      for (int m = 0; m < 3; ++m) {
        const Matrix row = d.features[static_cast<std::size_t>(m)].row(t);
        auto [it, fresh] = seen.try_emplace(c);
        if (it->second[static_cast<std::size_t>(m)].size() == 0) it->second[static_cast<std::size_t>(m)] = row;
        else EXPECT_EQ(it->second[static_cast<std::size_t>(m)], row);
      }
    }
}

TEST(Synthetic, SameSeedSameBits) {
  const auto a = synthetic::generate(tiny_spec());
  const auto b = synthetic::generate(tiny_spec());
  ASSERT_EQ(a.dialogues.size(), b.dialogues.size());
  for (std::size_t i = 0; i < a.dialogues.size(); ++i) {
    EXPECT_EQ(a.dialogues[i].labels, b.dialogues[i].labels);
    for (int m = 0; m < 3; ++m) EXPECT_EQ(a.dialogues[i].features[static_cast<std::size_t>(m)], b.dialogues[i].features[static_cast<std::size_t>(m)]);
  }
  auto longer = tiny_spec();
  longer.dialogues = 9;
  EXPECT_EQ(synthetic::generate(longer).dialogues[5].labels, a.dialogues[5].labels);
}

TEST(Synthetic, NearestPrototypeIsPerfectWithoutNoise) {
  synthetic::SyntheticSpec spec;
  spec.noise = 0.0;
  spec.separation = 1.0;
  spec.classes = 4;
  spec.dialogues = 40;
  const auto data = synthetic::generate(spec);
  // Prototypes from the first half of the rows, scored on the second half.
  std::vector<std::pair<Matrix, int>> rows;
  for (const auto& d : data.dialogues)
    for (Index t = 0; t < d.length(); ++t) rows.emplace_back(d.feature(Modality::text).row(t), d.labels[static_cast<std::size_t>(t)]);
  std::map<int, Matrix> proto;
  const std::size_t half = rows.size() / 2;
  for (std::size_t i = 0; i < half; ++i) proto.try_emplace(rows[i].second, rows[i].first);
  ASSERT_EQ(proto.size(), 4u);
  std::size_t correct = 0;
  for (std::size_t i = half; i < rows.size(); ++i) {
    int best = -1;
    double best_d = INFINITY;
    for (const auto& [c, p] : proto) {
      const double dist = (rows[i].first - p).squaredNorm();
      if (dist < best_d) best_d = dist, best = c;
    }
    correct += best == rows[i].second;
  }
  EXPECT_EQ(correct, rows.size() - half);
}

TEST(Synthetic, InvalidSpecRejected) {
  auto s = tiny_spec();
  s.classes = 1;
  EXPECT_THROW(synthetic::generate(s), ConfigError);
}

TEST(Metrics, PerfectPredictions) {
  const std::vector<int> y{0, 1, 2, 2, 1};
  const auto r = metrics::compute_metrics(y, y, 3);
  EXPECT_EQ(r.weighted_accuracy, 1.0);
  EXPECT_EQ(r.weighted_f1, 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(r.confusion[i][j] != 0, i == j);
}

TEST(Metrics, AllOneClassOnBalancedBinary) {
  const std::vector<int> truth{0, 0, 1, 1, 0, 1};
  const std::vector<int> pred(6, 1);
  const auto r = metrics::compute_metrics(truth, pred, 2);
  EXPECT_DOUBLE_EQ(r.weighted_accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.class_f1[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.class_f1[0], 0.0);
  EXPECT_DOUBLE_EQ(r.weighted_f1, 1.0 / 3.0);
}

TEST(Metrics, MatchesIndependentTally) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 4);
  std::vector<int> truth(500), pred(500);
  for (int i = 0; i < 500; ++i) {
    truth[i] = cls(rng);
    pred[i] = rng() % 3 == 0 ? truth[i] : cls(rng);
  }
  const auto r = metrics::compute_metrics(truth, pred, 5);
  const auto t = oracle::tally(truth, pred, 5);
  EXPECT_NEAR(r.weighted_accuracy, t.accuracy, 1e-15);
  EXPECT_NEAR(r.weighted_f1, t.weighted_f1, 1e-15);
  for (int c = 0; c < 5; ++c) {
    EXPECT_NEAR(r.class_f1[c], t.f1[c], 1e-15);
    std::size_t row = 0;
    for (int k = 0; k < 5; ++k) {
      EXPECT_EQ(static_cast<long>(r.confusion[c][k]), t.table[c][k]);
      row += r.confusion[c][k];
    }
    EXPECT_EQ(row, r.support[c]);
  }
}

TEST(Metrics, InvalidInput) {
  EXPECT_THROW(metrics::compute_metrics(std::vector<int>{}, std::vector<int>{}, 2), ConfigError);
  EXPECT_THROW(metrics::compute_metrics(std::vector<int>{0}, std::vector<int>{0, 1}, 2), ConfigError);
  EXPECT_THROW(metrics::compute_metrics(std::vector<int>{0}, std::vector<int>{2}, 2), ConfigError);
}

TEST(Model, ParameterCountMatchesHandCount) {
  auto cfg = tiny_model(3, {5, 4, 3});
  cfg.modalities = {Modality::text, Modality::audio};
  auto m = model::make_model(cfg);
  // text: conv 3*5*4 + 4, block 2*(12 + 4 + 12 + 12) + 4 = 84       -> 148
  // audio: conv 3*4*4 + 4, block 84                                   -> 136
  // scorers: 2 * (14*5 + 5 + 5*1 + 1) = 162; classifier 14*6 + 6 + 6*3 + 3 = 111
  EXPECT_EQ(model::parameter_count(m), 148u + 136u + 162u + 111u);
  // broad maps: 2 * (4*6 + 6 + 6*8 + 8)
  EXPECT_EQ(model::frozen_count(m), 172u);
  std::size_t sum = 0;
  for (const auto& v : model::parameter_views(m)) sum += static_cast<std::size_t>(v.size());
  EXPECT_EQ(sum, model::parameter_count(m));
}

TEST(Model, RidgeMapsMatchDirectSolve) {
  for (auto target : {model::BlsTarget::self, model::BlsTarget::labels}) {
    auto p = train::small_problem(4, ssm::Discretization::zoh, fusion::FusionMode::probability, target);
    const EmotionBatch probe[] = {p.batch};
    const auto targets = model::fit_norm_targets(p.model, probe);
    for (std::size_t i = 0; i < p.model.encoders.size(); ++i) {
      const Matrix F = model::encode(p.model, i, p.batch.feature(p.model.encoders[i].modality)).features.Y;
      Matrix T = F;
      if (target == model::BlsTarget::labels) {
        T = Matrix::Zero(F.rows(), p.model.config.classes);
        for (Index r = 0; r < F.rows(); ++r) T(r, p.batch.labels[static_cast<std::size_t>(r)]) = 1.0;
      }
      const Matrix W = broad::ridge_solve(F, T, p.model.config.broad.lambda);
      EXPECT_LE(oracle::max_abs_diff(targets.ridge_map(i), W), 1e-9);
      EXPECT_NEAR(targets.penalty[i], p.model.config.broad.lambda * W.squaredNorm(), 1e-9 * (1 + W.squaredNorm()));
    }
  }
}

TEST(Model, FusedStepAgreesWithSeparateCalls) {
  auto p = train::small_problem(5);
  const EmotionBatch probe[] = {p.batch};
  const auto targets = model::fit_norm_targets(p.model, probe);
  const auto trace = model::forward(p.model, p.batch);
  auto step = model::loss_and_gradient(p.model, trace, p.batch, targets);
  const auto losses = model::compute_losses(p.model, trace, p.batch, targets);
  EXPECT_NEAR(step.losses.total, losses.total, 1e-9 * (1 + std::abs(losses.total)));
  EXPECT_EQ(losses.total, losses.norm + losses.emotion);
  auto grad = model::backward(p.model, trace, p.batch, targets);
  EXPECT_EQ(flatten(step.gradient), flatten(grad));
}

TEST(GradCheck, LinearMapIsExactUpToRoundoff) {
  std::mt19937_64 rng(6);
  Matrix W = oracle::random_matrix(4, 3, rng);
  const Matrix X = oracle::random_matrix(5, 4, rng);
  const Matrix g = oracle::random_matrix(5, 3, rng);
  Matrix dW = X.transpose() * g;
  const std::vector<model::ParameterView> p{{"W", W.data(), 4, 3, true}};
  const std::vector<model::ParameterView> d{{"W", dW.data(), 4, 3, true}};
  const auto r = train::check_gradients(p, d, [&] { return ((X * W).array() * g.array()).sum(); }, 1e-4);
  EXPECT_LE(r.max_relative_error, 1e-10);
}

TEST(GradCheck, EverySmallPipelineVariant) {
  for (auto rule : {ssm::Discretization::zoh, ssm::Discretization::taylor})
    for (auto mode : {fusion::FusionMode::probability, fusion::FusionMode::add, fusion::FusionMode::concat})
      for (auto target : {model::BlsTarget::self, model::BlsTarget::labels}) {
        auto p = train::small_problem(1, rule, mode, target);
        const auto r = train::grad_check(p.model, p.batch, 1e-4);
        EXPECT_LE(r.max_relative_error, 1e-4)
            << ssm::to_string(rule) << '/' << fusion::to_string(mode) << '/' << model::to_string(target) << ": "
            << r.worst_parameter;
        EXPECT_EQ(r.checked, model::parameter_count(p.model));
      }
  auto deep = train::small_problem(2, ssm::Discretization::zoh, fusion::FusionMode::probability,
                                   model::BlsTarget::self, 2);
  EXPECT_LE(train::grad_check(deep.model, deep.batch, 1e-4).max_relative_error, 1e-4);
}

TEST(GradCheck, HalvingTheStepDoesNotHurt) {
  // Large steps so truncation, not roundoff, dominates the error.
  auto p = train::small_problem(3);
  const double coarse = train::grad_check(p.model, p.batch, 2e-3).max_relative_error;
  const double fine = train::grad_check(p.model, p.batch, 1e-3).max_relative_error;
  EXPECT_LE(fine, coarse);
}

TEST(GradCheck, SmallProblemsAvoidReluKinks) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto p = train::small_problem(s);
    EXPECT_GE(train::relu_margin(p.model, p.batch), train::kSmallProblemMargin);
  }
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  const auto data = synthetic::generate(tiny_spec());
  train::TrainConfig tc;
  tc.model = tiny_model(3, {5, 4, 3});
  tc.optimizer.lr = 0.0;
  tc.epochs = 2;
  auto initial = model::make_model(tc.model);
  auto before = flatten(initial);
  auto result = train::train(tc, initial, data);
  EXPECT_EQ(flatten(result.model), before);
}

TEST(Train, HistoryAddsUpAndRerunsAreIdentical) {
  const auto data = synthetic::generate(tiny_spec());
  train::TrainConfig tc;
  tc.model = tiny_model(3, {5, 4, 3});
  tc.optimizer.lr = 1e-3;
  tc.epochs = 3;
  auto a = train::train(tc, data);
  auto b = train::train(tc, data);
  ASSERT_EQ(a.history.size(), 3u);
  for (const auto& r : a.history) EXPECT_EQ(r.total, r.norm + r.emotion);
  EXPECT_EQ(flatten(a.model), flatten(b.model));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.history[i].total, b.history[i].total);
    EXPECT_EQ(a.history[i].weighted_f1, b.history[i].weighted_f1);
  }
}

TEST(Train, RejectsMismatchedData) {
  const auto data = synthetic::generate(tiny_spec());
  train::TrainConfig tc;
  tc.model = tiny_model(4, {5, 4, 3});
  EXPECT_THROW(train::train(tc, data), ConfigError);
  tc.model = tiny_model(3, {6, 4, 3});
  EXPECT_THROW(train::train(tc, data), ConfigError);
  EXPECT_THROW(train::evaluate(model::make_model(tiny_model(3, {5, 4, 3})), Dataset{}), ConfigError);
}

TEST(Train, DivergenceIsReported) {
  const auto data = synthetic::generate(tiny_spec());
  train::TrainConfig tc;
  tc.model = tiny_model(3, {5, 4, 3});
  auto m = model::make_model(tc.model);
  m.encoders[0].conv.weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  tc.epochs = 1;
  EXPECT_THROW(train::train(tc, m, data), NumericError);
}

TEST(Ablation, FusionModes) {
  std::mt19937_64 rng(7);
  const Matrix Yt = oracle::random_matrix(4, 6, rng), Ya = oracle::random_matrix(4, 6, rng),
               Yv = oracle::random_matrix(4, 3, rng);
  const Matrix Z = Matrix::Zero(4, 6);
  EXPECT_EQ(train::ablation_fuse(fusion::FusionMode::add, Yt, Z, Z), Yt);
  EXPECT_EQ(train::ablation_fuse(fusion::FusionMode::concat, Yt, Ya, Yv).cols(), 15);
  EXPECT_THROW(train::ablation_fuse(fusion::FusionMode::add, Yt, Ya, Yv), ConfigError);

  const auto head = fusion::make_head({Modality::text, Modality::audio, Modality::video}, 6, 3, 5, 7,
                                      fusion::FusionMode::probability, rng);
  const Matrix Yv6 = oracle::random_matrix(4, 6, rng);
  const Matrix direct = fusion::fuse(Yt, Ya, Yv6, fusion::modality_weight(head.scorers[0], Yt),
                                     fusion::modality_weight(head.scorers[1], Ya),
                                     fusion::modality_weight(head.scorers[2], Yv6));
  EXPECT_EQ(train::ablation_fuse(fusion::FusionMode::probability, Yt, Ya, Yv6, &head), direct);
  EXPECT_THROW(train::ablation_fuse(fusion::FusionMode::probability, Yt, Ya, Yv6), ConfigError);
}

TEST(Optimizer, FirstStepMovesByLearningRate) {
  // Bias-corrected first step is lr * sign(g) (up to eps), plus decay.
  Matrix w = Matrix::Constant(1, 2, 1.0);
  Matrix g{{0.5, -2.0}};
  optim::AdamW opt({.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.01});
  opt.step({{"w", w.data(), 1, 2, true}}, {{"w", g.data(), 1, 2, true}});
  EXPECT_NEAR(w(0, 0), 1.0 - 0.1 * (0.5 / (0.5 + 1e-8) + 0.01), 1e-12);
  EXPECT_NEAR(w(0, 1), 1.0 - 0.1 * (-2.0 / (2.0 + 1e-8) + 0.01), 1e-12);
  EXPECT_EQ(opt.steps(), 1);
}
