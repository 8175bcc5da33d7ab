// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "roclab/losses.hpp"
#include "roclab/rng.hpp"

using namespace roclab;

namespace {

EmbeddingMatrix random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  EmbeddingMatrix m(n, d);
  for (auto& v : m.values) v = rng.normal();
  return normalize_rows(m);
}

// Independent reference: per-row and per-column cross-entropy over the
// scaled similarity matrix, written as naive nested loops with plain
// exp (no stabilization), averaged with factor 1/(2N).
double reference_symmetric_loss(const EmbeddingMatrix& img,
                                const EmbeddingMatrix& txt, double tau) {
  const std::size_t n = img.rows;
  std::vector<std::vector<double>> s(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      s[j][k] = dot(img.row(j), txt.row(k), img.dim) / tau;
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) denom += std::exp(s[j][k]);
    total += -std::log(std::exp(s[j][j]) / denom);
  }
  for (std::size_t k = 0; k < n; ++k) {
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) denom += std::exp(s[j][k]);
    total += -std::log(std::exp(s[k][k]) / denom);
  }
  return total / (2.0 * static_cast<double>(n));
}

Temperature temp(double tau) { return Temperature{std::log(tau), true}; }

}  // namespace

TEST_CASE("normalize_rows basic cases") {
  EmbeddingMatrix m(1, 2);
  m.at(0, 0) = 3.0;
  m.at(0, 1) = 4.0;
  auto out = normalize_rows(m);
  CHECK(out.at(0, 0) == doctest::Approx(0.6));
  CHECK(out.at(0, 1) == doctest::Approx(0.8));
  CHECK(out.normalized);

  EmbeddingMatrix axes(2, 2);
  axes.at(0, 0) = 1.0;
  axes.at(1, 1) = 2.0;
  auto axes_out = normalize_rows(axes);
  CHECK(axes_out.at(0, 0) == 1.0);
  CHECK(axes_out.at(1, 1) == 1.0);
  CHECK(axes_out.at(0, 1) == 0.0);
}

TEST_CASE("normalize_rows leaves unit norms on a random matrix") {
  Rng rng(11);
  EmbeddingMatrix m(5, 8);
  for (auto& v : m.values) v = rng.uniform(-2.0, 2.0);
  auto out = normalize_rows(m);
  for (std::size_t r = 0; r < out.rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < out.dim; ++c) ss += out.at(r, c) * out.at(r, c);
    CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("normalize_rows rejects near-zero rows") {
  EmbeddingMatrix m(1, 3);
  CHECK_THROWS_AS(normalize_rows(m), ZeroVector);
}

TEST_CASE("similarity_logits matches naive dot products") {
  EmbeddingMatrix id(2, 2);
  id.at(0, 0) = 1.0;
  id.at(1, 1) = 1.0;
  id.normalized = true;
  auto logits = similarity_logits(id, id, temp(1.0));
  CHECK(logits.at(0, 0) == 1.0);
  CHECK(logits.at(0, 1) == 0.0);
  CHECK(logits.at(1, 1) == 1.0);

  EmbeddingMatrix e1(1, 2);
  e1.at(0, 0) = 1.0;
  e1.normalized = true;
  CHECK(similarity_logits(e1, e1, temp(0.5)).at(0, 0) == doctest::Approx(2.0));

  Rng rng(3);
  auto a = random_unit_rows(3, 5, rng);
  auto b = random_unit_rows(3, 5, rng);
  auto s = similarity_logits(a, b, temp(0.3));
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t k = 0; k < 3; ++k) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 5; ++c) acc += a.at(j, c) * b.at(k, c);
      CHECK(s.at(j, k) == doctest::Approx(acc / 0.3).epsilon(1e-12));
    }
}

TEST_CASE("clip_loss matched single pair is zero") {
  Rng rng(7);
  auto z = random_unit_rows(1, 6, rng);
  CHECK(clip_loss(z, z, temp(0.07)).value == doctest::Approx(0.0));
}

TEST_CASE("clip_loss orthonormal two-pair value") {
  EmbeddingMatrix z(2, 2);
  z.at(0, 0) = 1.0;
  z.at(1, 1) = 1.0;
  z.normalized = true;
  // Hand evaluation: every row/column term is -log(e / (e + 1)).
  const double expected = std::log(1.0 + std::exp(-1.0));
  CHECK(clip_loss(z, z, temp(1.0)).value ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.31326).epsilon(1e-4));
}

TEST_CASE("clip_loss matches reference transcription on 100 random batches") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.next_below(8);
    const std::size_t d = 2 + rng.next_below(14);
    const double tau = rng.uniform(0.05, 2.0);
    auto img = random_unit_rows(n, d, rng);
    auto txt = random_unit_rows(n, d, rng);
    auto out = clip_loss(img, txt, temp(tau));
    CHECK(out.value ==
          doctest::Approx(reference_symmetric_loss(img, txt, tau))
              .epsilon(1e-10));
  }
}

TEST_CASE("roclip_loss matches reference and reduces to clip_loss") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.next_below(6);
    auto img = random_unit_rows(n, 8, rng);
    auto matched = random_unit_rows(n, 8, rng);
    const double tau = rng.uniform(0.05, 1.5);
    CHECK(roclip_loss(img, matched, temp(tau)).value ==
          doctest::Approx(reference_symmetric_loss(img, matched, tau))
              .epsilon(1e-10));
  }

  auto img = random_unit_rows(4, 8, rng);
  auto txt = random_unit_rows(4, 8, rng);
  auto a = clip_loss(img, txt, temp(0.07));
  auto b = roclip_loss(img, txt, temp(0.07));
  CHECK(a.value == b.value);  // bitwise reduction when matches == originals
  CHECK(a.grad_log_tau == b.grad_log_tau);
  CHECK(a.grad_image.values == b.grad_image.values);

  auto single = random_unit_rows(1, 8, rng);
  auto pool_row = random_unit_rows(1, 8, rng);
  CHECK(roclip_loss(single, pool_row, temp(0.07)).value ==
        doctest::Approx(0.0));
}

TEST_CASE("loss is symmetric in the two modalities") {
  Rng rng(5);
  auto img = random_unit_rows(5, 7, rng);
  auto txt = random_unit_rows(5, 7, rng);
  CHECK(clip_loss(img, txt, temp(0.2)).value ==
        doctest::Approx(clip_loss(txt, img, temp(0.2)).value).epsilon(1e-12));
}

TEST_CASE("loss is invariant under joint row permutation") {
  Rng rng(6);
  auto img = random_unit_rows(6, 5, rng);
  auto txt = random_unit_rows(6, 5, rng);
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  EmbeddingMatrix pimg(6, 5), ptxt(6, 5);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      pimg.at(r, c) = img.at(perm[r], c);
      ptxt.at(r, c) = txt.at(perm[r], c);
    }
  pimg.normalized = ptxt.normalized = true;
  CHECK(clip_loss(img, txt, temp(0.1)).value ==
        doctest::Approx(clip_loss(pimg, ptxt, temp(0.1)).value)
            .epsilon(1e-12));
}

TEST_CASE("loss is non-negative on random batches") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.next_below(8);
    auto img = random_unit_rows(n, 6, rng);
    auto txt = random_unit_rows(n, 6, rng);
    CHECK(clip_loss(img, txt, temp(rng.uniform(0.05, 2.0))).value >= -1e-12);
  }
}

TEST_CASE("NaN inputs are rejected") {
  EmbeddingMatrix bad(2, 2);
  bad.at(0, 0) = std::nan("");
  bad.at(1, 1) = 1.0;
  bad.normalized = true;
  EmbeddingMatrix ok(2, 2);
  ok.at(0, 0) = 1.0;
  ok.at(1, 1) = 1.0;
  ok.normalized = true;
  CHECK_THROWS_AS(clip_loss(bad, ok, temp(1.0)), NonFinite);
}

TEST_CASE("mismatched shapes are rejected") {
  Rng rng(10);
  auto a = random_unit_rows(3, 4, rng);
  auto b = random_unit_rows(2, 4, rng);
  auto c = random_unit_rows(3, 5, rng);
  CHECK_THROWS_AS(clip_loss(a, b, temp(1.0)), DimMismatch);
  CHECK_THROWS_AS(clip_loss(a, c, temp(1.0)), DimMismatch);
}

TEST_CASE("inmodality_loss equals the sum of its three pair losses") {
  Rng rng(12);
  auto i1 = random_unit_rows(4, 8, rng);
  auto i2 = random_unit_rows(4, 8, rng);
  auto t1 = random_unit_rows(4, 8, rng);
  auto t2 = random_unit_rows(4, 8, rng);
  auto t = temp(0.3);
  auto out = inmodality_loss(i1, i2, t1, t2, t);
  const double expected = clip_loss(i1, t1, t).value +
                          clip_loss(i1, i2, t).value +
                          clip_loss(t1, t2, t).value;
  CHECK(out.value == doctest::Approx(expected).epsilon(1e-12));

  // Single pair: every term has a trivially matched positive.
  auto s1 = random_unit_rows(1, 8, rng);
  CHECK(inmodality_loss(s1, s1, s1, s1, t).value == doctest::Approx(0.0));
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(99);
  for (std::size_t n : {1u, 2u, 4u, 8u}) {
    for (std::size_t d : {4u, 16u}) {
      for (int seed_trial = 0; seed_trial < 3; ++seed_trial) {
        auto img = random_unit_rows(n, d, rng);
        auto txt = random_unit_rows(n, d, rng);
        auto t = temp(rng.uniform(0.05, 1.0));
        CHECK(check_gradients(LossKind::Clip, {img, txt}, t, 1e-5) < 1e-4);
        CHECK(check_gradients(LossKind::Roclip, {img, txt}, t, 1e-5) < 1e-4);
        auto i2 = random_unit_rows(n, d, rng);
        auto t2 = random_unit_rows(n, d, rng);
        CHECK(check_gradients(LossKind::InModality, {img, i2, txt, t2}, t,
                              1e-5) < 1e-4);
      }
    }
  }
}

TEST_CASE("zero-gradient point has vanishing analytic gradients") {
  Rng rng(100);
  auto z = random_unit_rows(1, 6, rng);
  auto out = clip_loss(z, z, temp(0.07));
  for (double g : out.grad_image.values) CHECK(std::abs(g) < 1e-8);
  for (double g : out.grad_text.values) CHECK(std::abs(g) < 1e-8);
  CHECK(std::abs(out.grad_log_tau) < 1e-8);
}

TEST_CASE("check_gradients validates its step size") {
  Rng rng(101);
  auto img = random_unit_rows(2, 4, rng);
  auto txt = random_unit_rows(2, 4, rng);
  CHECK_THROWS_AS(check_gradients(LossKind::Clip, {img, txt}, temp(0.1), 1.0),
                  BadConfig);
}
