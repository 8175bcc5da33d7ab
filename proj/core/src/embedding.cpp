// SPDX-License-Identifier: Apache-2.0
#include "roclab/embedding.hpp"

#include <algorithm>
#include <cmath>

namespace roclab {

double Temperature::tau() const { return std::exp(log_tau); }

void Temperature::clamp() {
  const double lo = std::log(1e-3);
  const double hi = std::log(100.0);
  log_tau = std::clamp(log_tau, lo, hi);
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double row_norm(const EmbeddingMatrix& m, std::size_t r) {
  return std::sqrt(dot(m.row(r), m.row(r), m.dim));
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double norm = row_norm(m, r);
    if (norm <= 1e-12) {
      throw ZeroVector("normalize_rows: row " + std::to_string(r) +
                       " has norm <= 1e-12");
    }
    for (std::size_t c = 0; c < m.dim; ++c) out.at(r, c) = m.at(r, c) / norm;
  }
  out.normalized = true;
  return out;
}

EmbeddingMatrix similarity_logits(const EmbeddingMatrix& img,
                                  const EmbeddingMatrix& txt,
                                  const Temperature& t) {
  if (img.dim != txt.dim) {
    throw DimMismatch("similarity_logits: dim " + std::to_string(img.dim) +
                      " vs " + std::to_string(txt.dim));
  }
  const double inv_tau = 1.0 / t.tau();
  EmbeddingMatrix logits(img.rows, txt.rows);
  for (std::size_t j = 0; j < img.rows; ++j) {
    for (std::size_t k = 0; k < txt.rows; ++k) {
      logits.at(j, k) = dot(img.row(j), txt.row(k), img.dim) * inv_tau;
    }
  }
  return logits;
}

}  // namespace roclab
