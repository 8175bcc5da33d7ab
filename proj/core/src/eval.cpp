// SPDX-License-Identifier: Apache-2.0
#include "roclab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace roclab {

namespace {

std::vector<std::size_t> argmax_per_image(const EmbeddingMatrix& img_proj,
                                          const EmbeddingMatrix& prompt_proj) {
  std::vector<std::size_t> preds(img_proj.rows);
  for (std::size_t i = 0; i < img_proj.rows; ++i) {
    std::size_t best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < prompt_proj.rows; ++c) {
      const double sim =
          dot(img_proj.row(i), prompt_proj.row(c), img_proj.dim);
      if (sim > best_sim) {  // strict: ties keep the lowest class index
        best_sim = sim;
        best = c;
      }
    }
    preds[i] = best;
  }
  return preds;
}

}  // namespace

ClassPromptBank build_prompt_bank(const Taxonomy& tax) {
  ClassPromptBank bank;
  for (std::size_t c = 0; c < tax.num_classes(); ++c) {
    const std::uint32_t base =
        static_cast<std::uint32_t>(tax.class_token_base(c));
    bank.prompts.push_back({0u, 1u, base, base + 1u});
  }
  return bank;
}

ZeroShotResult zero_shot_classify(const ModelParams& params,
                                  const std::vector<PairedExample>& images,
                                  const ClassPromptBank& prompt_bank) {
  std::vector<Image> rasters;
  for (const PairedExample& ex : images) rasters.push_back(ex.image);
  const TowerEncoding img = encode_images(params, rasters);
  const TowerEncoding prompts = encode_captions(params, prompt_bank.prompts);

  ZeroShotResult res;
  res.predictions = argmax_per_image(img.proj, prompts.proj);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (res.predictions[i] == images[i].true_class) ++correct;
  }
  res.accuracy = images.empty()
                     ? 0.0
                     : static_cast<double>(correct) /
                           static_cast<double>(images.size());
  return res;
}

double linear_probe(const ModelParams& params,
                    const std::vector<PairedExample>& labeled_images,
                    double train_fraction, std::size_t epochs, double lr,
                    std::uint64_t seed) {
  std::vector<Image> rasters;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  for (const PairedExample& ex : labeled_images) {
    rasters.push_back(ex.image);
    labels.push_back(ex.true_class);
    num_classes = std::max(num_classes, ex.true_class + 1);
  }
  const TowerEncoding enc = encode_images(params, rasters);
  const std::size_t f = enc.features.dim;
  const std::size_t n = rasters.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_train =
      static_cast<std::size_t>(train_fraction * static_cast<double>(n));
  if (n_train == 0 || n_train == n) {
    throw DegenerateSplit("linear_probe: empty train or test split");
  }
  {
    std::vector<bool> present(num_classes, false);
    for (std::size_t i = 0; i < n_train; ++i) present[labels[order[i]]] = true;
    if (std::count(present.begin(), present.end(), true) < 2) {
      throw DegenerateSplit("linear_probe: fewer than 2 classes in train");
    }
  }

  // Multinomial logistic regression, full-batch gradient descent, zero
  // init (the objective is convex; the start point is immaterial).
  std::vector<double> w(num_classes * f, 0.0), b(num_classes, 0.0);
  std::vector<double> logits(num_classes), probs(num_classes);
  std::vector<double> gw(num_classes * f), gb(num_classes);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t t = 0; t < n_train; ++t) {
      const std::size_t i = order[t];
      const double* x = enc.features.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < num_classes; ++c) {
        logits[c] = b[c] + dot(w.data() + c * f, x, f);
        mx = std::max(mx, logits[c]);
      }
      double z = 0.0;
      for (std::size_t c = 0; c < num_classes; ++c) {
        probs[c] = std::exp(logits[c] - mx);
        z += probs[c];
      }
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double g = probs[c] / z - (labels[i] == c ? 1.0 : 0.0);
        gb[c] += g;
        double* gwc = gw.data() + c * f;
        for (std::size_t k = 0; k < f; ++k) gwc[k] += g * x[k];
      }
    }
    const double scale = lr / static_cast<double>(n_train);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= scale * gw[k];
    for (std::size_t c = 0; c < num_classes; ++c) b[c] -= scale * gb[c];
  }

  std::size_t correct = 0;
  for (std::size_t t = n_train; t < n; ++t) {
    const std::size_t i = order[t];
    const double* x = enc.features.row(i);
    std::size_t best = 0;
    double best_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double l = b[c] + dot(w.data() + c * f, x, f);
      if (l > best_logit) {
        best_logit = l;
        best = c;
      }
    }
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n - n_train);
}

double poison_success_rate(const ModelParams& params, const PoisonSet& attack,
                           const ClassPromptBank& prompt_bank) {
  if (attack.target_images.empty()) {
    throw BadConfig("poison_success_rate: attack has no targets");
  }
  const TowerEncoding img = encode_images(params, attack.target_images);
  const TowerEncoding prompts = encode_captions(params, prompt_bank.prompts);
  const std::vector<std::size_t> preds =
      argmax_per_image(img.proj, prompts.proj);
  std::size_t hits = 0;
  for (std::size_t p : preds) {
    if (p == attack.spec.adv_class) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

BackdoorResult backdoor_success_rate(const ModelParams& params,
                                     const TriggerSpec& trigger,
                                     AttackKind kind, std::size_t adv_class,
                                     const std::vector<PairedExample>& eval_images,
                                     const ClassPromptBank& prompt_bank,
                                     std::size_t count, std::uint64_t seed) {
  // Members of the adversarial class are excluded so that a "success"
  // is unambiguously a flip.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < eval_images.size(); ++i) {
    if (eval_images[i].true_class != adv_class) candidates.push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(candidates);
  if (candidates.size() > count) candidates.resize(count);
  if (candidates.empty()) {
    throw BadConfig("backdoor_success_rate: no eligible eval images");
  }

  const std::size_t h = static_cast<std::size_t>(
      std::lround(std::sqrt(static_cast<double>(eval_images[0].image.size()))));
  std::vector<Image> triggered, clean;
  std::vector<std::size_t> labels;
  for (std::size_t i : candidates) {
    clean.push_back(eval_images[i].image);
    triggered.push_back(
        apply_trigger(eval_images[i].image, h, h, trigger, kind));
    labels.push_back(eval_images[i].true_class);
  }

  const TowerEncoding prompts = encode_captions(params, prompt_bank.prompts);
  const std::vector<std::size_t> preds_triggered =
      argmax_per_image(encode_images(params, triggered).proj, prompts.proj);
  const std::vector<std::size_t> preds_clean =
      argmax_per_image(encode_images(params, clean).proj, prompts.proj);

  BackdoorResult res;
  res.evaluated = candidates.size();
  std::size_t hits = 0, correct = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (preds_triggered[i] == adv_class) ++hits;
    if (preds_clean[i] == labels[i]) ++correct;
  }
  res.bsr = static_cast<double>(hits) / static_cast<double>(res.evaluated);
  res.clean_acc_on_same_images =
      static_cast<double>(correct) / static_cast<double>(res.evaluated);
  return res;
}

SimilarityTrace similarity_trace(const std::vector<ModelParams>& params_sequence,
                                 const Dataset& dataset,
                                 const std::vector<PairedExample>& poisons) {
  std::vector<Image> clean_imgs, poison_imgs;
  std::vector<Caption> clean_caps, poison_caps;
  for (const PairedExample& ex : dataset.train) {
    if (ex.provenance == Provenance::Clean) {
      clean_imgs.push_back(ex.image);
      clean_caps.push_back(ex.caption);
    }
  }
  for (const PairedExample& ex : poisons) {
    poison_imgs.push_back(ex.image);
    poison_caps.push_back(ex.caption);
  }

  SimilarityTrace trace;
  auto mean_cosine = [](const TowerEncoding& a, const TowerEncoding& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.proj.rows; ++i) {
      s += dot(a.proj.row(i), b.proj.row(i), a.proj.dim);
    }
    return a.proj.rows == 0 ? 0.0 : s / static_cast<double>(a.proj.rows);
  };
  for (const ModelParams& p : params_sequence) {
    trace.clean_mean.push_back(mean_cosine(encode_images(p, clean_imgs),
                                           encode_captions(p, clean_caps)));
    trace.poison_mean.push_back(mean_cosine(encode_images(p, poison_imgs),
                                            encode_captions(p, poison_caps)));
  }
  return trace;
}

}  // namespace roclab
