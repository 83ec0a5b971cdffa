#include "bmamba/bissm.hpp"

#include <cmath>

#include "bmamba/errors.hpp"

namespace bmamba::bissm {

ssm::ContinuousSSM SsmParameters::system() const {
  ssm::ContinuousSSM sys;
  sys.A = -a_log.array().exp();
  sys.B = B;
  sys.C = C;
  sys.D = Vector::Zero(a_log.rows());
  sys.log_delta = log_delta;
  return sys;
}

SsmParameters SsmParameters::from_system(const ssm::ContinuousSSM& sys) {
  SsmParameters p;
  p.a_log = (-sys.A.array()).log();
  p.log_delta = sys.log_delta;
  p.B = sys.B;
  p.C = sys.C;
  return p;
}

BiSSMBlock make_block(Index channels, Index state, ssm::Discretization rule, Rng& rng) {
  BiSSMBlock block;
  block.forward = SsmParameters::from_system(ssm::random_system(channels, state, rng));
  block.backward = SsmParameters::from_system(ssm::random_system(channels, state, rng));
  block.skip = Vector::Ones(channels);
  block.discretization = rule;
  return block;
}

namespace {

Matrix reversed(const Matrix& x) { return x.colwise().reverse(); }

void check_block(const BiSSMBlock& block, const Matrix& x) {
  if (x.cols() != block.channels()) throw ConfigError("bissm: input width does not match block channels");
  if (block.backward.a_log.rows() != block.channels() || block.forward.a_log.rows() != block.channels()) {
    throw ConfigError("bissm: forward and backward systems must share the channel count");
  }
}

}  // namespace

Matrix bissm(const BiSSMBlock& block, const Matrix& x, ssm::ConvPath path) {
  check_block(block, x);
  const Index T = x.rows();
  if (T == 0) return Matrix(0, x.cols());
  const Vector no_skip = Vector::Zero(block.channels());
  const auto fwd = ssm::materialize_kernel(ssm::discretize(block.forward.system(), block.discretization), T);
  const auto bwd = ssm::materialize_kernel(ssm::discretize(block.backward.system(), block.discretization), T);

  Matrix y = ssm::causal_conv(x, fwd, no_skip, path);
  y += reversed(ssm::causal_conv(reversed(x), bwd, no_skip, path));
  y.array() += x.array().rowwise() * block.skip.transpose().array();
  return y;
}

ModalitySequence bissm(const BiSSMBlock& block, const ModalitySequence& x, ssm::ConvPath path) {
  return {x.modality, bissm(block, x.data, path)};
}

namespace {

SsmParameters system_gradients(const SsmParameters& params, ssm::Discretization rule, const Matrix& tap_grad) {
  const auto sys = params.system();
  const auto disc = ssm::discretize(sys, rule);
  const auto dk = ssm::kernel_backward(disc, tap_grad);
  const auto dc = ssm::discretize_backward(sys, rule, dk.Abar, dk.Bbar);
  SsmParameters g;
  // dA/da_log = A
  g.a_log = dc.A.cwiseProduct(sys.A);
  g.log_delta = dc.log_delta;
  g.B = dc.B;
  g.C = dk.C;
  return g;
}

}  // namespace

BiSSMGradients bissm_gradients(const BiSSMBlock& block, const Matrix& x, const Matrix& upstream) {
  check_block(block, x);
  if (upstream.rows() != x.rows() || upstream.cols() != x.cols()) {
    throw ConfigError("bissm_gradients: upstream shape differs from the block output");
  }
  const Index T = x.rows();
  BiSSMGradients g;
  g.parameters.discretization = block.discretization;
  g.parameters.skip = (upstream.array() * x.array()).colwise().sum().transpose();
  if (T == 0) {
    g.input = Matrix(0, x.cols());
    g.parameters.forward = system_gradients(block.forward, block.discretization, Matrix::Zero(block.channels(), 1));
    g.parameters.backward = system_gradients(block.backward, block.discretization, Matrix::Zero(block.channels(), 1));
    return g;
  }

  const auto fwd = ssm::materialize_kernel(ssm::discretize(block.forward.system(), block.discretization), T);
  const auto bwd = ssm::materialize_kernel(ssm::discretize(block.backward.system(), block.discretization), T);

  // Forward branch y = x * kf; backward branch y = R((R x) * kb).
  const Matrix dfwd = ssm::conv_kernel_grad(x, upstream, T);
  const Matrix dbwd = ssm::conv_kernel_grad(reversed(x), reversed(upstream), T);

  g.input = ssm::conv_input_grad(upstream, fwd);
  g.input += reversed(ssm::conv_input_grad(reversed(upstream), bwd));
  g.input.array() += upstream.array().rowwise() * block.skip.transpose().array();

  g.parameters.forward = system_gradients(block.forward, block.discretization, dfwd);
  g.parameters.backward = system_gradients(block.backward, block.discretization, dbwd);
  return g;
}

}  // namespace bmamba::bissm
