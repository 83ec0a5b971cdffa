#include "bmamba/broad.hpp"

#include <cmath>

#include "bmamba/errors.hpp"

namespace bmamba::broad {

BroadSpace make_broad_space(Index input_width, const BroadConfig& config, std::uint64_t seed) {
  if (config.feature_groups < 1 || config.enhancement_groups < 1) {
    throw ConfigError("broad space needs at least one feature and one enhancement group");
  }
  if (config.feature_width < 1 || config.enhancement_width < 1 || input_width < 1) {
    throw ConfigError("broad space widths must be positive");
  }
  if (!(config.lambda > 0.0)) throw ParameterError("ridge coefficient lambda must be positive");
  BroadSpace space;
  space.config = config;
  Rng rng(seed);
  const Index zc = space.feature_cols();
  const Index hc = space.enhancement_cols();
  space.feature_weights.resize(input_width, zc);
  space.feature_bias.resize(zc);
  space.enhancement_weights.resize(zc, hc);
  space.enhancement_bias.resize(hc);
  const double zsd = 1.0 / std::sqrt(static_cast<double>(input_width));
  const double hsd = 1.0 / std::sqrt(static_cast<double>(zc));
  fill_normal(space.feature_weights, zsd, rng);
  fill_normal(space.feature_bias, zsd, rng);
  fill_normal(space.enhancement_weights, hsd, rng);
  fill_normal(space.enhancement_bias, hsd, rng);
  return space;
}

Matrix feature_nodes(const BroadSpace& space, const Matrix& u) {
  if (u.cols() != space.input_width()) throw ConfigError("feature_nodes: input width mismatch");
  Matrix Z = u * space.feature_weights;
  Z.rowwise() += space.feature_bias.transpose();
  return Z;
}

Matrix enhancement_nodes(const BroadSpace& space, const Matrix& Z) {
  if (Z.cols() != space.feature_cols()) throw ConfigError("enhancement_nodes: feature width mismatch");
  Matrix H = Z * space.enhancement_weights;
  H.rowwise() += space.enhancement_bias.transpose();
  return H.cwiseMax(0.0);
}

BroadFeatures broad_features(const BroadSpace& space, const Matrix& u) {
  BroadFeatures f;
  f.Z = feature_nodes(space, u);
  f.H = enhancement_nodes(space, f.Z);
  f.Y.resize(u.rows(), space.broad_width());
  f.Y << f.Z, f.H;
  return f;
}

Matrix ridge_solve(const Matrix& F, const Matrix& target, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("ridge_solve requires lambda > 0");
  if (F.rows() != target.rows()) throw ConfigError("ridge_solve: design and target row counts differ");
  if (F.rows() < 1 || F.cols() < 1 || target.cols() < 1) throw ConfigError("ridge_solve: empty problem");
  const Index p = F.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(F.transpose());
  gram.diagonal().array() += lambda;
  const Eigen::MatrixXd rhs = F.transpose() * target;
  Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) throw NumericError("ridge_solve: normal matrix is not positive definite");
  return llt.solve(rhs);
}

Matrix ridge_self_factor(const Matrix& F, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("ridge_solve requires lambda > 0");
  if (F.rows() < 1 || F.cols() < 1) throw ConfigError("ridge_solve: empty problem");
  const Index r = F.rows();
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(r, r);
  kernel.selfadjointView<Eigen::Lower>().rankUpdate(F);
  kernel.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(kernel.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) throw NumericError("ridge_solve: kernel matrix is not positive definite");
  return llt.matrixL().solve(F);
}

double norm_loss(const Matrix& F, const Matrix& target, const Matrix& W, double lambda) {
  if (F.cols() != W.rows() || F.rows() != target.rows() || W.cols() != target.cols()) {
    throw ConfigError("norm_loss: shape mismatch");
  }
  return (F * W - target).squaredNorm() + lambda * W.squaredNorm();
}

double bls_norm_loss(const BroadSpace& space, const BroadFeatures& features, const Matrix& W) {
  return norm_loss(features.Y, features.Y, W, space.config.lambda);
}

Matrix broad_backward(const BroadSpace& space, const BroadFeatures& features, const Matrix& dY) {
  const Index zc = space.feature_cols();
  const Index hc = space.enhancement_cols();
  if (dY.cols() != zc + hc || dY.rows() != features.Y.rows()) throw ConfigError("broad_backward: shape mismatch");
  const Matrix dpre = (features.H.array() > 0.0).select(dY.rightCols(hc), 0.0);
  const Matrix dZ = dY.leftCols(zc) + dpre * space.enhancement_weights.transpose();
  return dZ * space.feature_weights.transpose();
}

}  // namespace bmamba::broad
