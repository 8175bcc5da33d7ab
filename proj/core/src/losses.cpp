// SPDX-License-Identifier: Apache-2.0
#include "roclab/losses.hpp"

#include <cmath>
#include <limits>

namespace roclab {

namespace {

// Log-sum-exp with max subtraction over a strided slice.
double logsumexp(const double* v, std::size_t n, std::size_t stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i * stride]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i * stride] - mx);
  return mx + std::log(s);
}

void check_pair(const EmbeddingMatrix& img, const EmbeddingMatrix& txt) {
  if (img.dim != txt.dim || img.rows != txt.rows) {
    throw DimMismatch("contrastive loss: shape mismatch");
  }
  for (double v : img.values) {
    if (std::isnan(v)) throw NonFinite("contrastive loss: NaN image input");
  }
  for (double v : txt.values) {
    if (std::isnan(v)) throw NonFinite("contrastive loss: NaN text input");
  }
}

// Shared core for clip_loss and roclip_loss: both are the symmetric
// cross-entropy over S = Z_I Z_T^T / tau; only the provenance of the
// text rows differs.
LossOutput symmetric_infonce(const EmbeddingMatrix& img,
                             const EmbeddingMatrix& txt,
                             const Temperature& t) {
  check_pair(img, txt);
  const std::size_t n = img.rows;
  const EmbeddingMatrix s = similarity_logits(img, txt, t);

  double value = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    value -= s.at(j, j) - logsumexp(s.row(j), n, 1);                 // rows
    value -= s.at(j, j) - logsumexp(s.values.data() + j, n, n);      // columns
  }
  value /= 2.0 * static_cast<double>(n);

  // dL/dS = -1/(2N) [(I - P_row) + (I - P_col)] where P_row / P_col are
  // the row- and column-wise softmaxes of S.
  EmbeddingMatrix g(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double lse_r = logsumexp(s.row(j), n, 1);
    for (std::size_t k = 0; k < n; ++k) {
      const double p_row = std::exp(s.at(j, k) - lse_r);
      g.at(j, k) += p_row - (j == k ? 1.0 : 0.0);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double lse_c = logsumexp(s.values.data() + k, n, n);
    for (std::size_t j = 0; j < n; ++j) {
      const double p_col = std::exp(s.at(j, k) - lse_c);
      g.at(j, k) += p_col - (j == k ? 1.0 : 0.0);
    }
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (double& v : g.values) v *= scale;

  LossOutput out;
  out.value = value;
  out.grad_image = EmbeddingMatrix(n, img.dim);
  out.grad_text = EmbeddingMatrix(n, txt.dim);
  const double inv_tau = 1.0 / t.tau();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      const double gjk = g.at(j, k) * inv_tau;
      for (std::size_t c = 0; c < img.dim; ++c) {
        out.grad_image.at(j, c) += gjk * txt.at(k, c);
        out.grad_text.at(k, c) += gjk * img.at(j, c);
      }
      // d s_jk / d log_tau = -s_jk
      out.grad_log_tau -= g.at(j, k) * s.at(j, k);
    }
  }
  if (!std::isfinite(out.value)) {
    throw NonFinite("contrastive loss: non-finite value");
  }
  return out;
}

}  // namespace

LossOutput clip_loss(const EmbeddingMatrix& img, const EmbeddingMatrix& txt,
                     const Temperature& t) {
  return symmetric_infonce(img, txt, t);
}

LossOutput roclip_loss(const EmbeddingMatrix& img_aug,
                       const EmbeddingMatrix& matched_txt,
                       const Temperature& t) {
  return symmetric_infonce(img_aug, matched_txt, t);
}

InModalityLossOutput inmodality_loss(const EmbeddingMatrix& img_aug1,
                                     const EmbeddingMatrix& img_aug2,
                                     const EmbeddingMatrix& txt_aug1,
                                     const EmbeddingMatrix& txt_aug2,
                                     const Temperature& t) {
  const LossOutput cross = clip_loss(img_aug1, txt_aug1, t);
  const LossOutput img_pair = clip_loss(img_aug1, img_aug2, t);
  const LossOutput txt_pair = clip_loss(txt_aug1, txt_aug2, t);

  InModalityLossOutput out;
  out.value = cross.value + img_pair.value + txt_pair.value;
  out.grad_log_tau =
      cross.grad_log_tau + img_pair.grad_log_tau + txt_pair.grad_log_tau;
  out.grad_img1 = cross.grad_image;
  for (std::size_t i = 0; i < out.grad_img1.values.size(); ++i) {
    out.grad_img1.values[i] += img_pair.grad_image.values[i];
  }
  out.grad_img2 = img_pair.grad_text;
  out.grad_txt1 = cross.grad_text;
  for (std::size_t i = 0; i < out.grad_txt1.values.size(); ++i) {
    out.grad_txt1.values[i] += txt_pair.grad_image.values[i];
  }
  out.grad_txt2 = txt_pair.grad_text;
  return out;
}

}  // namespace roclab
