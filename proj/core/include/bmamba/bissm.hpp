#pragma once

// Bidirectional SSM convolution block:
//
//   out_j = sum_{l<=j} kf_{j-l} * x_l + sum_{l>=j} kb_{l-j} * x_l + skip * x_j
//
// evaluated per channel. Both sums include l == j, so the centre step is
// weighted kf_0 + kb_0 + skip.

#include "bmamba/ssm.hpp"

namespace bmamba::bissm {

/// Learnable form of one diagonal system: A = -exp(a_log) keeps every rate
/// negative, timescale = softplus(log_delta). D is fixed at zero because the
/// block carries its own skip.
struct SsmParameters {
  Matrix a_log;      // channels x state
  Vector log_delta;  // channels
  Matrix B;          // channels x state
  Matrix C;          // channels x state

  ssm::ContinuousSSM system() const;
  static SsmParameters from_system(const ssm::ContinuousSSM& sys);
};

struct BiSSMBlock {
  SsmParameters forward;
  SsmParameters backward;
  Vector skip;
  ssm::Discretization discretization = ssm::Discretization::zoh;

  Index channels() const { return skip.size(); }
  Index state_size() const { return forward.a_log.cols(); }
};

/// Both systems drawn with ssm::random_system, skip initialised to ones.
BiSSMBlock make_block(Index channels, Index state, ssm::Discretization rule, Rng& rng);

Matrix bissm(const BiSSMBlock& block, const Matrix& x, ssm::ConvPath path = ssm::ConvPath::automatic);
ModalitySequence bissm(const BiSSMBlock& block, const ModalitySequence& x,
                       ssm::ConvPath path = ssm::ConvPath::automatic);

struct BiSSMGradients {
  BiSSMBlock parameters;  // same layout as the block, holding derivatives
  Matrix input;
};

BiSSMGradients bissm_gradients(const BiSSMBlock& block, const Matrix& x, const Matrix& upstream);

}  // namespace bmamba::bissm
