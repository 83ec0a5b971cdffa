#pragma once

// Per-modality front end: a "same"-padded 1-D convolution along the
// utterance axis followed by the sinusoidal position code.

#include "bmamba/types.hpp"

namespace bmamba::embedding {

struct Conv1DLayer {
  Modality modality = Modality::text;
  Index kernel_width = 3;
  // Tap-major weight: row (k * in_width + i) maps input channel i at tap k
  // to every output channel. Shape (kernel_width * in_width) x out_width.
  Matrix weight;
  Vector bias;

  Index in_width() const { return kernel_width > 0 ? weight.rows() / kernel_width : 0; }
  Index out_width() const { return weight.cols(); }
};

/// Gaussian init with variance 1/(kernel_width * in_width), zero bias.
/// Throws ConfigError for an even or non-positive kernel width.
Conv1DLayer make_conv1d(Modality modality, Index in_width, Index out_width, Index kernel_width, Rng& rng);

ModalitySequence conv1d(const Conv1DLayer& layer, const ModalitySequence& x);

/// PE(pos, 2i) = sin(pos / 10000^(2i/D)), PE(pos, 2i+1) = cos(pos / 10000^(2i/D)).
/// Throws ConfigError when D is odd.
Matrix positional_encoding(Index length, Index width);

/// conv1d(x) + positional_encoding(T, out_width).
ModalitySequence embed(const Conv1DLayer& layer, const ModalitySequence& x);

struct Conv1DGradients {
  Matrix weight;
  Vector bias;
  Matrix input;
};

/// Adjoint of conv1d (and of embed, whose position code is constant).
Conv1DGradients conv1d_backward(const Conv1DLayer& layer, const Matrix& x, const Matrix& upstream);

}  // namespace bmamba::embedding
