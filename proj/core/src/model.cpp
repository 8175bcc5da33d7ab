// SPDX-License-Identifier: Apache-2.0
#include "roclab/model.hpp"

#include <cmath>

namespace roclab {

namespace {

Linear init_linear(std::size_t out, std::size_t in, Rng& rng) {
  Linear l;
  l.w = Tensor(out, in);
  l.b.assign(out, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& x : l.w.v) x = rng.uniform(-scale, scale);
  return l;
}

// y = W x + b
void affine(const Linear& l, const double* x, double* y) {
  for (std::size_t r = 0; r < l.w.rows; ++r) {
    y[r] = l.b[r] + dot(l.w.v.data() + r * l.w.cols, x, l.w.cols);
  }
}

// Accumulates dW += dy x^T, db += dy, and writes dx = W^T dy.
void affine_backward(const Linear& l, const double* x, const double* dy,
                     Linear& dl, double* dx) {
  for (std::size_t r = 0; r < l.w.rows; ++r) {
    dl.b[r] += dy[r];
    double* dwr = dl.w.v.data() + r * l.w.cols;
    const double* wr = l.w.v.data() + r * l.w.cols;
    for (std::size_t c = 0; c < l.w.cols; ++c) {
      dwr[c] += dy[r] * x[c];
      if (dx) dx[c] += wr[c] * dy[r];
    }
  }
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.for_each_block([](std::vector<double>& v) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  return z;
}

}  // namespace

ModelParams init_params(std::uint64_t seed, std::size_t image_h,
                        std::size_t image_w, std::size_t vocab_size,
                        std::size_t hidden_dim, std::size_t feature_dim,
                        std::size_t proj_dim) {
  if (image_h < 2 || image_w < 2 || hidden_dim < 2 || feature_dim < 2 ||
      proj_dim < 2) {
    throw BadConfig("init_params: all dims must be >= 2");
  }
  if (vocab_size < 8) throw BadConfig("init_params: vocab_size must be >= 8");

  Rng rng(seed);
  ModelParams p;
  p.dims = {image_h, image_w, vocab_size, hidden_dim, feature_dim, proj_dim};
  p.img_l1 = init_linear(hidden_dim, p.dims.pixels(), rng);
  p.img_l2 = init_linear(feature_dim, hidden_dim, rng);
  p.token_emb = Tensor(vocab_size, hidden_dim);
  {
    const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (double& x : p.token_emb.v) x = rng.uniform(-scale, scale);
  }
  p.txt_l1 = init_linear(hidden_dim, hidden_dim, rng);
  p.txt_l2 = init_linear(feature_dim, hidden_dim, rng);
  p.img_proj = init_linear(proj_dim, feature_dim, rng);
  p.txt_proj = init_linear(proj_dim, feature_dim, rng);
  p.temperature = Temperature{std::log(0.07), true};
  return p;
}

OptimizerState init_optimizer(const ModelParams& params, double lr) {
  OptimizerState s;
  s.lr = lr;
  params.for_each_block([&](const std::vector<double>& v) {
    s.m.emplace_back(v.size(), 0.0);
    s.v.emplace_back(v.size(), 0.0);
  });
  return s;
}

EncodedBatch encode(const ModelParams& params,
                    const std::vector<Image>& image_batch,
                    const std::vector<Caption>& caption_batch) {
  if (image_batch.size() != caption_batch.size()) {
    throw ShapeMismatch("encode: batch size mismatch");
  }
  const std::size_t n = image_batch.size();
  const ModelDims& d = params.dims;

  EncodedBatch b;
  b.features_image = EmbeddingMatrix(n, d.feature_dim);
  b.features_text = EmbeddingMatrix(n, d.feature_dim);
  b.proj_image = EmbeddingMatrix(n, d.proj_dim);
  b.proj_text = EmbeddingMatrix(n, d.proj_dim);
  b.cache.images = image_batch;
  b.cache.captions = caption_batch;
  b.cache.img_hidden = EmbeddingMatrix(n, d.hidden_dim);
  b.cache.txt_hidden = EmbeddingMatrix(n, d.hidden_dim);
  b.cache.txt_pooled = EmbeddingMatrix(n, d.hidden_dim);
  b.cache.img_proj_norm.resize(n);
  b.cache.txt_proj_norm.resize(n);

  std::vector<double> pre(d.hidden_dim), proj(d.proj_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Image& img = image_batch[i];
    if (img.size() != d.pixels()) {
      throw ShapeMismatch("encode: image " + std::to_string(i) +
                          " has wrong pixel count");
    }
    affine(params.img_l1, img.data(), pre.data());
    for (std::size_t h = 0; h < d.hidden_dim; ++h) {
      b.cache.img_hidden.at(i, h) = std::tanh(pre[h]);
    }
    affine(params.img_l2, b.cache.img_hidden.row(i), b.features_image.row(i));
    affine(params.img_proj, b.features_image.row(i), proj.data());
    double norm = std::sqrt(dot(proj.data(), proj.data(), d.proj_dim));
    if (norm <= 1e-12) throw ZeroVector("encode: zero image projection");
    b.cache.img_proj_norm[i] = norm;
    for (std::size_t c = 0; c < d.proj_dim; ++c) {
      b.proj_image.at(i, c) = proj[c] / norm;
    }

    const Caption& cap = caption_batch[i];
    if (cap.empty()) throw ShapeMismatch("encode: empty caption");
    for (std::uint32_t tok : cap) {
      if (tok >= d.vocab_size) {
        throw TokenOutOfRange("encode: token " + std::to_string(tok));
      }
    }
    double* pooled = b.cache.txt_pooled.row(i);
    for (std::uint32_t tok : cap) {
      const double* e = params.token_emb.v.data() + tok * d.hidden_dim;
      for (std::size_t h = 0; h < d.hidden_dim; ++h) pooled[h] += e[h];
    }
    for (std::size_t h = 0; h < d.hidden_dim; ++h) {
      pooled[h] /= static_cast<double>(cap.size());
    }
    affine(params.txt_l1, pooled, pre.data());
    for (std::size_t h = 0; h < d.hidden_dim; ++h) {
      b.cache.txt_hidden.at(i, h) = std::tanh(pre[h]);
    }
    affine(params.txt_l2, b.cache.txt_hidden.row(i), b.features_text.row(i));
    affine(params.txt_proj, b.features_text.row(i), proj.data());
    norm = std::sqrt(dot(proj.data(), proj.data(), d.proj_dim));
    if (norm <= 1e-12) throw ZeroVector("encode: zero text projection");
    b.cache.txt_proj_norm[i] = norm;
    for (std::size_t c = 0; c < d.proj_dim; ++c) {
      b.proj_text.at(i, c) = proj[c] / norm;
    }
  }
  b.proj_image.normalized = true;
  b.proj_text.normalized = true;
  return b;
}

TowerEncoding encode_images(const ModelParams& params,
                            const std::vector<Image>& images) {
  const ModelDims& d = params.dims;
  TowerEncoding out;
  out.features = EmbeddingMatrix(images.size(), d.feature_dim);
  out.proj = EmbeddingMatrix(images.size(), d.proj_dim);
  std::vector<double> pre(d.hidden_dim), hid(d.hidden_dim), proj(d.proj_dim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != d.pixels()) {
      throw ShapeMismatch("encode_images: wrong pixel count");
    }
    affine(params.img_l1, images[i].data(), pre.data());
    for (std::size_t h = 0; h < d.hidden_dim; ++h) hid[h] = std::tanh(pre[h]);
    affine(params.img_l2, hid.data(), out.features.row(i));
    affine(params.img_proj, out.features.row(i), proj.data());
    const double norm = std::sqrt(dot(proj.data(), proj.data(), d.proj_dim));
    if (norm <= 1e-12) throw ZeroVector("encode_images: zero projection");
    for (std::size_t c = 0; c < d.proj_dim; ++c) {
      out.proj.at(i, c) = proj[c] / norm;
    }
  }
  out.proj.normalized = true;
  return out;
}

TowerEncoding encode_captions(const ModelParams& params,
                              const std::vector<Caption>& captions) {
  const ModelDims& d = params.dims;
  TowerEncoding out;
  out.features = EmbeddingMatrix(captions.size(), d.feature_dim);
  out.proj = EmbeddingMatrix(captions.size(), d.proj_dim);
  std::vector<double> pooled(d.hidden_dim), pre(d.hidden_dim),
      hid(d.hidden_dim), proj(d.proj_dim);
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const Caption& cap = captions[i];
    if (cap.empty()) throw ShapeMismatch("encode_captions: empty caption");
    std::fill(pooled.begin(), pooled.end(), 0.0);
    for (std::uint32_t tok : cap) {
      if (tok >= d.vocab_size) {
        throw TokenOutOfRange("encode_captions: token " + std::to_string(tok));
      }
      const double* e = params.token_emb.v.data() + tok * d.hidden_dim;
      for (std::size_t h = 0; h < d.hidden_dim; ++h) pooled[h] += e[h];
    }
    for (std::size_t h = 0; h < d.hidden_dim; ++h) {
      pooled[h] /= static_cast<double>(cap.size());
    }
    affine(params.txt_l1, pooled.data(), pre.data());
    for (std::size_t h = 0; h < d.hidden_dim; ++h) hid[h] = std::tanh(pre[h]);
    affine(params.txt_l2, hid.data(), out.features.row(i));
    affine(params.txt_proj, out.features.row(i), proj.data());
    const double norm = std::sqrt(dot(proj.data(), proj.data(), d.proj_dim));
    if (norm <= 1e-12) throw ZeroVector("encode_captions: zero projection");
    for (std::size_t c = 0; c < d.proj_dim; ++c) {
      out.proj.at(i, c) = proj[c] / norm;
    }
  }
  out.proj.normalized = true;
  return out;
}

ModelGrads backward(const ModelParams& params, const EncodedBatch& batch,
                    const EmbeddingMatrix& grad_proj_image,
                    const EmbeddingMatrix& grad_proj_text,
                    double grad_log_tau) {
  const ModelDims& d = params.dims;
  const std::size_t n = batch.proj_image.rows;

  ModelGrads g;
  g.shadow = zeros_like(params);
  g.grad_log_tau = grad_log_tau;

  std::vector<double> du(d.proj_dim), df(d.feature_dim), dh(d.hidden_dim),
      dpre(d.hidden_dim), dpooled(d.hidden_dim);

  auto tower_backward = [&](std::size_t i, const EmbeddingMatrix& grad_proj,
                            const EmbeddingMatrix& z,
                            const std::vector<double>& norms,
                            const EmbeddingMatrix& features,
                            const EmbeddingMatrix& hidden, const Linear& proj,
                            const Linear& l2, Linear& dproj, Linear& dl2,
                            std::vector<double>& dhidden_out) {
    // Normalization Jacobian: du = (dz - (dz . z) z) / ||u||.
    const double* dz = grad_proj.row(i);
    const double* zi = z.row(i);
    const double dzz = dot(dz, zi, d.proj_dim);
    for (std::size_t c = 0; c < d.proj_dim; ++c) {
      du[c] = (dz[c] - dzz * zi[c]) / norms[i];
    }
    std::fill(df.begin(), df.end(), 0.0);
    affine_backward(proj, features.row(i), du.data(), dproj, df.data());
    std::fill(dh.begin(), dh.end(), 0.0);
    affine_backward(l2, hidden.row(i), df.data(), dl2, dh.data());
    for (std::size_t h = 0; h < d.hidden_dim; ++h) {
      const double a = hidden.at(i, h);
      dhidden_out[h] = dh[h] * (1.0 - a * a);
    }
  };

  const bool text_active = grad_proj_text.rows == n;
  for (std::size_t i = 0; i < n; ++i) {
    tower_backward(i, grad_proj_image, batch.proj_image,
                   batch.cache.img_proj_norm, batch.features_image,
                   batch.cache.img_hidden, params.img_proj, params.img_l2,
                   g.shadow.img_proj, g.shadow.img_l2, dpre);
    affine_backward(params.img_l1, batch.cache.images[i].data(), dpre.data(),
                    g.shadow.img_l1, nullptr);

    if (!text_active) continue;
    tower_backward(i, grad_proj_text, batch.proj_text,
                   batch.cache.txt_proj_norm, batch.features_text,
                   batch.cache.txt_hidden, params.txt_proj, params.txt_l2,
                   g.shadow.txt_proj, g.shadow.txt_l2, dpre);
    std::fill(dpooled.begin(), dpooled.end(), 0.0);
    affine_backward(params.txt_l1, batch.cache.txt_pooled.row(i), dpre.data(),
                    g.shadow.txt_l1, dpooled.data());
    const Caption& cap = batch.cache.captions[i];
    const double inv_len = 1.0 / static_cast<double>(cap.size());
    for (std::uint32_t tok : cap) {
      double* e = g.shadow.token_emb.v.data() + tok * d.hidden_dim;
      for (std::size_t h = 0; h < d.hidden_dim; ++h) {
        e[h] += dpooled[h] * inv_len;
      }
    }
  }

  g.shadow.for_each_block([](std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw NonFiniteGradient("backward: non-finite gradient");
      }
    }
  });
  if (!std::isfinite(g.grad_log_tau)) {
    throw NonFiniteGradient("backward: non-finite log_tau gradient");
  }
  return g;
}

void apply_adam(ModelParams& params, OptimizerState& opt,
                const ModelGrads& grads) {
  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);

  std::size_t block = 0;
  std::vector<const std::vector<double>*> grad_blocks;
  grads.shadow.for_each_block([&](const std::vector<double>& v) {
    grad_blocks.push_back(&v);
  });
  params.for_each_block([&](std::vector<double>& p) {
    const std::vector<double>& gv = *grad_blocks[block];
    std::vector<double>& m = opt.m[block];
    std::vector<double>& v = opt.v[block];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gv[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gv[i] * gv[i];
      p[i] -= opt.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt.eps);
      if (!std::isfinite(p[i])) {
        throw NonFiniteGradient("apply_adam: non-finite parameter");
      }
    }
    ++block;
  });

  if (params.temperature.trainable) {
    const double gt = grads.grad_log_tau;
    opt.m_log_tau = opt.beta1 * opt.m_log_tau + (1.0 - opt.beta1) * gt;
    opt.v_log_tau = opt.beta2 * opt.v_log_tau + (1.0 - opt.beta2) * gt * gt;
    params.temperature.log_tau -=
        opt.lr * (opt.m_log_tau / bc1) / (std::sqrt(opt.v_log_tau / bc2) + opt.eps);
  }
  params.temperature.clamp();
}

double backward_and_step(ModelParams& params, OptimizerState& opt,
                         const EncodedBatch& batch, const LossOutput& loss) {
  const ModelGrads g = backward(params, batch, loss.grad_image,
                                loss.grad_text, loss.grad_log_tau);
  apply_adam(params, opt, g);
  return loss.value;
}

}  // namespace roclab
