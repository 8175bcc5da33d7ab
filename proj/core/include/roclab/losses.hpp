// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "roclab/embedding.hpp"

namespace roclab {

// Symmetric InfoNCE over a batch of image/caption embedding pairs:
// cross-entropy over the rows plus cross-entropy over the columns of
// the scaled similarity matrix, averaged with factor 1/(2N). Gradients
// are with respect to the normalized embeddings and log_tau.
LossOutput clip_loss(const EmbeddingMatrix& img, const EmbeddingMatrix& txt,
                     const Temperature& t);

// Same structure as clip_loss, but every text-side entry is the
// pool-matched caption embedding for the corresponding image. Reduces
// exactly to clip_loss when matched_txt equals the original captions.
// grad_text is computed, but callers treat pool rows as constants.
LossOutput roclip_loss(const EmbeddingMatrix& img_aug,
                       const EmbeddingMatrix& matched_txt,
                       const Temperature& t);

// CLIP loss plus in-modality InfoNCE between two augmented views of
// each modality: clip(img1, txt1) + clip(img1, img2) + clip(txt1, txt2).
struct InModalityLossOutput {
  double value = 0.0;
  EmbeddingMatrix grad_img1, grad_img2, grad_txt1, grad_txt2;
  double grad_log_tau = 0.0;
};
InModalityLossOutput inmodality_loss(const EmbeddingMatrix& img_aug1,
                                     const EmbeddingMatrix& img_aug2,
                                     const EmbeddingMatrix& txt_aug1,
                                     const EmbeddingMatrix& txt_aug2,
                                     const Temperature& t);

enum class LossKind { Clip, Roclip, InModality };

// Central finite differences of the loss value with respect to every
// embedding coordinate and log_tau, compared against the analytic
// gradients. Returns the max per-coordinate error relative to the
// overall gradient scale. eps must lie in [1e-7, 1e-3].
double check_gradients(LossKind kind,
                       const std::vector<EmbeddingMatrix>& inputs,
                       const Temperature& t, double eps);

}  // namespace roclab
