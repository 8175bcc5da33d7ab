// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "roclab/errors.hpp"

namespace roclab {

// Row-major matrix of embedding vectors, one vector per row.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // rows * dim, row-major
  bool normalized = false;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t d)
      : rows(r), dim(d), values(r * d, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * dim + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * dim + c]; }
  double* row(std::size_t r) { return values.data() + r * dim; }
  const double* row(std::size_t r) const { return values.data() + r * dim; }
};

struct Temperature {
  double log_tau;
  bool trainable = true;

  double tau() const;
  // Clamps tau to [1e-3, 100]; applied after every optimizer step.
  void clamp();
};

struct LossOutput {
  double value = 0.0;
  EmbeddingMatrix grad_image;
  EmbeddingMatrix grad_text;
  double grad_log_tau = 0.0;
};

// Divides each row by its L2 norm. Throws ZeroVector if any row norm
// is <= 1e-12.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m);

// Entry (j, k) = <img_j, txt_k> / tau. Inputs must be normalized and
// share the embedding dimension.
EmbeddingMatrix similarity_logits(const EmbeddingMatrix& img,
                                  const EmbeddingMatrix& txt,
                                  const Temperature& t);

double row_norm(const EmbeddingMatrix& m, std::size_t r);
double dot(const double* a, const double* b, std::size_t n);

}  // namespace roclab
