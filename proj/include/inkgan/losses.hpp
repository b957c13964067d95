#pragma once

// Adversarial, reconstruction, total-variation and cycle-consistency
// objectives. Discriminators emit logits; the sigmoid lives here, inside
// softplus-based cross-entropy:
//   -log sigmoid(z)     = softplus(-z)
//   -log(1 - sigmoid(z)) = softplus(z)

#include <string>

#include "inkgan/ops.hpp"

namespace inkgan {

enum class Objective { pix2pix, pix2pix_tv, cyclegan };

inline const char* name(Objective o) {
  switch (o) {
    case Objective::pix2pix: return "pix2pix";
    case Objective::pix2pix_tv: return "pix2pix_tv";
    case Objective::cyclegan: return "cyclegan";
  }
  return "?";
}

inline Objective parse_objective(const std::string& s) {
  if (s == "pix2pix") return Objective::pix2pix;
  if (s == "pix2pix_tv") return Objective::pix2pix_tv;
  if (s == "cyclegan") return Objective::cyclegan;
  throw ConfigError("unknown objective '" + s + "' (expected pix2pix, pix2pix_tv or cyclegan)");
}

/// Raw sum over all neighbor pairs, or its mean over pixels for desk-scale runs.
enum class TvReduction { sum, mean };

struct LossConfig {
  double lambda_l1 = 100.0;
  double lambda_tv = 0.0001;
  double lambda_cyc = 10.0;
  Objective objective = Objective::pix2pix;
  TvReduction tv_reduction = TvReduction::sum;

  bool tv_enabled() const { return objective == Objective::pix2pix_tv; }

  void validate() const {
    if (lambda_l1 < 0 || lambda_tv < 0 || lambda_cyc < 0) throw ConfigError("loss weights must be >= 0");
  }
};

/// Discriminator loss: -(mean log sigmoid(real) + mean log(1 - sigmoid(fake))).
template <typename T>
BasicTensor<T> d_loss(const BasicTensor<T>& real_logits, const BasicTensor<T>& fake_logits) {
  detail::require_same_shape(real_logits, fake_logits, "d_loss");
  return mean(softplus(scalar_mul(real_logits, T(-1)))) + mean(softplus(fake_logits));
}

/// Non-saturating generator loss: -mean log sigmoid(fake).
template <typename T>
BasicTensor<T> g_adv_loss(const BasicTensor<T>& fake_logits) {
  return mean(softplus(scalar_mul(fake_logits, T(-1))));
}

/// Mean absolute difference.
template <typename T>
BasicTensor<T> l1_loss(const BasicTensor<T>& y, const BasicTensor<T>& y_hat) {
  detail::require_same_shape(y, y_hat, "l1_loss");
  return mean(abs(y - y_hat));
}

/// Sum of |vertical| and |horizontal| neighbor differences over every item and
/// channel of an NCHW tensor. Differences exist only where both neighbors do;
/// a 1x1 image has none and yields 0.
template <typename T>
BasicTensor<T> tv_loss(const BasicTensor<T>& y_hat, TvReduction reduction = TvReduction::sum) {
  if (y_hat.rank() != 4) throw ShapeError("tv_loss expects [B,C,H,W], got " + to_string(y_hat.shape()));
  const std::size_t h = y_hat.dim(2), w = y_hat.dim(3);
  BasicTensor<T> total;
  if (h >= 2) total = sum(abs(narrow(y_hat, 2, 1, h - 1) - narrow(y_hat, 2, 0, h - 1)));
  if (w >= 2) {
    auto horizontal = sum(abs(narrow(y_hat, 3, 1, w - 1) - narrow(y_hat, 3, 0, w - 1)));
    total = total.defined() ? total + horizontal : horizontal;
  }
  if (!total.defined()) return BasicTensor<T>::scalar(T(0));
  if (reduction == TvReduction::mean) total = scalar_mul(total, T(1) / static_cast<T>(y_hat.numel()));
  return total;
}

/// l1(F(G(x)), x) + l1(G(F(y)), y).
template <typename T>
BasicTensor<T> cycle_loss(const BasicTensor<T>& x, const BasicTensor<T>& f_g_x, const BasicTensor<T>& y,
                          const BasicTensor<T>& g_f_y) {
  return l1_loss(f_g_x, x) + l1_loss(g_f_y, y);
}

template <typename T>
struct Pix2PixTerms {
  BasicTensor<T> total;
  BasicTensor<T> adv;
  BasicTensor<T> l1;
  BasicTensor<T> tv;  // undefined unless the TV term is enabled
};

/// g_adv + lambda_l1 * l1 + (tv_enabled ? lambda_tv * tv : 0), with the parts.
template <typename T>
Pix2PixTerms<T> pix2pix_terms(const BasicTensor<T>& d_fake_logits, const BasicTensor<T>& y,
                              const BasicTensor<T>& y_hat, const LossConfig& cfg) {
  if (cfg.objective == Objective::cyclegan) throw ConfigError("pix2pix loss requested with a cyclegan objective");
  cfg.validate();
  Pix2PixTerms<T> t;
  t.adv = g_adv_loss(d_fake_logits);
  t.l1 = l1_loss(y, y_hat);
  t.total = t.adv + scalar_mul(t.l1, static_cast<T>(cfg.lambda_l1));
  if (cfg.tv_enabled()) {
    t.tv = tv_loss(y_hat, cfg.tv_reduction);
    t.total = t.total + scalar_mul(t.tv, static_cast<T>(cfg.lambda_tv));
  }
  return t;
}

template <typename T>
BasicTensor<T> total_pix2pix(const BasicTensor<T>& d_fake_logits, const BasicTensor<T>& y,
                             const BasicTensor<T>& y_hat, const LossConfig& cfg) {
  return pix2pix_terms(d_fake_logits, y, y_hat, cfg).total;
}

}  // namespace inkgan
