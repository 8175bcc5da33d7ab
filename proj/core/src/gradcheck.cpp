// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <functional>

#include "roclab/losses.hpp"

namespace roclab {

namespace {

struct Evaluated {
  double value;
  std::vector<EmbeddingMatrix> grads;  // one per input matrix
  double grad_log_tau;
};

Evaluated evaluate(LossKind kind, const std::vector<EmbeddingMatrix>& inputs,
                   const Temperature& t) {
  Evaluated e;
  switch (kind) {
    case LossKind::Clip: {
      const LossOutput o = clip_loss(inputs.at(0), inputs.at(1), t);
      e = {o.value, {o.grad_image, o.grad_text}, o.grad_log_tau};
      break;
    }
    case LossKind::Roclip: {
      const LossOutput o = roclip_loss(inputs.at(0), inputs.at(1), t);
      e = {o.value, {o.grad_image, o.grad_text}, o.grad_log_tau};
      break;
    }
    case LossKind::InModality: {
      const InModalityLossOutput o = inmodality_loss(
          inputs.at(0), inputs.at(1), inputs.at(2), inputs.at(3), t);
      e = {o.value,
           {o.grad_img1, o.grad_img2, o.grad_txt1, o.grad_txt2},
           o.grad_log_tau};
      break;
    }
  }
  return e;
}

}  // namespace

double check_gradients(LossKind kind,
                       const std::vector<EmbeddingMatrix>& inputs,
                       const Temperature& t, double eps) {
  if (eps < 1e-7 || eps > 1e-3) {
    throw BadConfig("check_gradients: eps outside [1e-7, 1e-3]");
  }
  const Evaluated analytic = evaluate(kind, inputs, t);

  // Errors are measured relative to the largest analytic gradient
  // magnitude, so a near-zero coordinate does not blow up the ratio.
  double scale = std::abs(analytic.grad_log_tau);
  for (const auto& g : analytic.grads) {
    for (double v : g.values) scale = std::max(scale, std::abs(v));
  }
  scale = std::max(scale, 1e-8);

  double max_err = 0.0;
  auto record = [&](double fd, double an) {
    max_err = std::max(max_err, std::abs(fd - an) / scale);
  };

  std::vector<EmbeddingMatrix> work = inputs;
  for (std::size_t m = 0; m < work.size(); ++m) {
    for (std::size_t i = 0; i < work[m].values.size(); ++i) {
      const double saved = work[m].values[i];
      work[m].values[i] = saved + eps;
      const double up = evaluate(kind, work, t).value;
      work[m].values[i] = saved - eps;
      const double down = evaluate(kind, work, t).value;
      work[m].values[i] = saved;
      record((up - down) / (2.0 * eps), analytic.grads[m].values[i]);
    }
  }

  Temperature tp = t;
  tp.log_tau = t.log_tau + eps;
  const double up = evaluate(kind, inputs, tp).value;
  tp.log_tau = t.log_tau - eps;
  const double down = evaluate(kind, inputs, tp).value;
  record((up - down) / (2.0 * eps), analytic.grad_log_tau);

  return max_err;
}

}  // namespace roclab
