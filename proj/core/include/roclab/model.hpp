// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roclab/embedding.hpp"
#include "roclab/rng.hpp"

namespace roclab {

using Image = std::vector<double>;          // H*W pixels, row-major, in [0,1]
using Caption = std::vector<std::uint32_t>;  // token ids

struct Tensor {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

struct Linear {
  Tensor w;                // out x in
  std::vector<double> b;   // out
};

struct ModelDims {
  std::size_t image_h = 0, image_w = 0;
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 0;
  std::size_t feature_dim = 0;
  std::size_t proj_dim = 0;

  std::size_t pixels() const { return image_h * image_w; }
  bool operator==(const ModelDims&) const = default;
};

// Tiny dual encoder. Image side: flattened pixels -> hidden (tanh) ->
// feature. Text side: mean-pooled token embeddings -> hidden (tanh) ->
// feature. Both sides project feature -> proj_dim and L2-normalize.
struct ModelParams {
  ModelDims dims;
  Linear img_l1, img_l2;      // pixels->hidden, hidden->feature
  Tensor token_emb;           // vocab x hidden
  Linear txt_l1, txt_l2;      // hidden->hidden, hidden->feature
  Linear img_proj, txt_proj;  // feature->proj
  Temperature temperature{0.0, true};

  // Visits every parameter buffer in a fixed order (log_tau excluded).
  template <typename Fn>
  void for_each_block(Fn&& fn) {
    for (Linear* l : {&img_l1, &img_l2, &txt_l1, &txt_l2, &img_proj, &txt_proj}) {
      fn(l->w.v);
      fn(l->b);
    }
    fn(token_emb.v);
  }
  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    const_cast<ModelParams*>(this)->for_each_block(
        [&](std::vector<double>& v) { fn(const_cast<const std::vector<double>&>(v)); });
  }
};

// Gradients mirror the parameter layout.
struct ModelGrads {
  ModelParams shadow;  // same shapes, values hold gradients
  double grad_log_tau = 0.0;
};

struct EncodedBatch {
  EmbeddingMatrix features_image, features_text;  // pre-projection
  EmbeddingMatrix proj_image, proj_text;          // normalized

  // Forward caches needed by backward_and_step.
  struct Cache {
    std::vector<Image> images;
    std::vector<Caption> captions;
    EmbeddingMatrix img_hidden, txt_hidden;   // post-tanh activations
    EmbeddingMatrix txt_pooled;               // mean token embeddings
    std::vector<double> img_proj_norm, txt_proj_norm;  // pre-normalization norms
  } cache;
};

struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m, v;  // one pair per parameter block
  double m_log_tau = 0.0, v_log_tau = 0.0;
};

ModelParams init_params(std::uint64_t seed, std::size_t image_h,
                        std::size_t image_w, std::size_t vocab_size,
                        std::size_t hidden_dim, std::size_t feature_dim,
                        std::size_t proj_dim);

OptimizerState init_optimizer(const ModelParams& params, double lr);

EncodedBatch encode(const ModelParams& params,
                    const std::vector<Image>& image_batch,
                    const std::vector<Caption>& caption_batch);

// Single-tower forward passes for evaluation (no backward cache).
struct TowerEncoding {
  EmbeddingMatrix features;  // pre-projection
  EmbeddingMatrix proj;      // normalized
};
TowerEncoding encode_images(const ModelParams& params,
                            const std::vector<Image>& images);
TowerEncoding encode_captions(const ModelParams& params,
                              const std::vector<Caption>& captions);

// Backpropagates loss gradients (w.r.t. the normalized projected
// embeddings and log_tau) through both towers and applies one Adam
// step. Returns the loss value passed in, for convenience.
// Pass empty grad_text (rows == 0) to freeze the text tower.
double backward_and_step(ModelParams& params, OptimizerState& opt,
                         const EncodedBatch& batch, const LossOutput& loss);

// Computes gradients without applying a step (used by tests).
ModelGrads backward(const ModelParams& params, const EncodedBatch& batch,
                    const EmbeddingMatrix& grad_proj_image,
                    const EmbeddingMatrix& grad_proj_text,
                    double grad_log_tau);

void apply_adam(ModelParams& params, OptimizerState& opt,
                const ModelGrads& grads);

// Checkpoint format: little-endian, magic "RCLP", version u32, dims as
// u64, raw f64 parameter blocks, CRC32 over everything before it.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace roclab
