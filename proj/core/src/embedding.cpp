#include "bmamba/embedding.hpp"

#include <cmath>
#include <string>

#include "bmamba/errors.hpp"

namespace bmamba::embedding {

namespace {

void check_input(const Conv1DLayer& layer, const ModalitySequence& x) {
  if (x.modality != layer.modality) {
    throw ConfigError("conv1d: layer is for " + std::string(to_string(layer.modality)) + " but input is " +
                      std::string(to_string(x.modality)));
  }
  if (x.width() != layer.in_width()) {
    throw ConfigError("conv1d: input width " + std::to_string(x.width()) + " does not match layer width " +
                      std::to_string(layer.in_width()));
  }
}

// Row t holds the zero-padded window x(t - half .. t + half) laid out tap-major.
Matrix unfold(const Matrix& x, Index width) {
  const Index T = x.rows();
  const Index d = x.cols();
  const Index half = width / 2;
  Matrix cols = Matrix::Zero(T, width * d);
  for (Index t = 0; t < T; ++t) {
    for (Index k = 0; k < width; ++k) {
      const Index src = t + k - half;
      if (src < 0 || src >= T) continue;
      cols.block(t, k * d, 1, d) = x.row(src);
    }
  }
  return cols;
}

}  // namespace

Conv1DLayer make_conv1d(Modality modality, Index in_width, Index out_width, Index kernel_width, Rng& rng) {
  if (kernel_width < 1 || kernel_width % 2 == 0) throw ConfigError("conv1d kernel width must be odd and positive");
  if (in_width < 1 || out_width < 1) throw ConfigError("conv1d widths must be positive");
  Conv1DLayer layer;
  layer.modality = modality;
  layer.kernel_width = kernel_width;
  layer.weight.resize(kernel_width * in_width, out_width);
  fill_normal(layer.weight, 1.0 / std::sqrt(static_cast<double>(kernel_width * in_width)), rng);
  layer.bias = Vector::Zero(out_width);
  return layer;
}

ModalitySequence conv1d(const Conv1DLayer& layer, const ModalitySequence& x) {
  check_input(layer, x);
  Matrix out = unfold(x.data, layer.kernel_width) * layer.weight;
  out.rowwise() += layer.bias.transpose();
  return {layer.modality, std::move(out)};
}

Matrix positional_encoding(Index length, Index width) {
  if (width % 2 != 0) throw ConfigError("positional encoding width must be even");
  Matrix pe(length, width);
  for (Index pos = 0; pos < length; ++pos) {
    for (Index i = 0; i < width / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(width));
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

ModalitySequence embed(const Conv1DLayer& layer, const ModalitySequence& x) {
  ModalitySequence out = conv1d(layer, x);
  out.data += positional_encoding(out.length(), out.width());
  return out;
}

Conv1DGradients conv1d_backward(const Conv1DLayer& layer, const Matrix& x, const Matrix& upstream) {
  const Index T = x.rows();
  const Index d = x.cols();
  if (d != layer.in_width() || upstream.rows() != T || upstream.cols() != layer.out_width()) {
    throw ConfigError("conv1d_backward: shape mismatch");
  }
  const Matrix cols = unfold(x, layer.kernel_width);
  Conv1DGradients g;
  g.weight = cols.transpose() * upstream;
  g.bias = upstream.colwise().sum().transpose();
  const Matrix dcols = upstream * layer.weight.transpose();
  g.input = Matrix::Zero(T, d);
  const Index half = layer.kernel_width / 2;
  for (Index t = 0; t < T; ++t) {
    for (Index k = 0; k < layer.kernel_width; ++k) {
      const Index src = t + k - half;
      if (src < 0 || src >= T) continue;
      g.input.row(src) += dcols.block(t, k * d, 1, d);
    }
  }
  return g;
}

}  // namespace bmamba::embedding
