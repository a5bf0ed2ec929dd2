#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stinet/perceptual.hpp"

namespace stinet {

enum class AbsMode { On, Off, Adjacent };
enum class AbsNorm { L2, L1 };
enum class RelMode { On, Off, Strong };

struct MclConfig {
  AbsMode abs = AbsMode::On;
  AbsNorm abs_norm = AbsNorm::L2;
  RelMode rel = RelMode::On;
};

// All loss terms are normalized by element count (means, not raw sums), so
// the lambda weights keep their meaning across resolutions.
struct LossReport {
  double l_rec = 0;
  double l_rec_phase1 = 0;
  double l_per = 0;
  double l_abs = 0;
  double l_rel = 0;
  double total = 0;
  double lambda1 = 0.1;
  double lambda2 = 0.1;
};

template <typename S>
Tensor<S> mean_scalars(const std::vector<Tensor<S>>& xs) {
  STINET_CHECK(!xs.empty(), "mean_scalars: empty");
  Tensor<S> acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return scale(acc, S(1) / S(xs.size()));
}

// Frame reconstruction loss: per-frame MSE averaged over the sequence
// (equivalently the mean over every element).
template <typename S>
Tensor<S> loss_rec(const std::vector<Tensor<S>>& pred, const std::vector<Tensor<S>>& gt) {
  STINET_CHECK(pred.size() == gt.size() && !pred.empty(), "loss_rec: sequence length mismatch");
  std::vector<Tensor<S>> per_frame;
  for (size_t t = 0; t < pred.size(); ++t) per_frame.push_back(mse_mean(pred[t], gt[t]));
  return mean_scalars(per_frame);
}

template <typename S>
Tensor<S> loss_perceptual(const std::vector<Tensor<S>>& pred, const std::vector<Tensor<S>>& gt,
                          const PerceptualExtractor<S>& phi) {
  STINET_CHECK(pred.size() == gt.size() && !pred.empty(),
               "loss_perceptual: sequence length mismatch");
  std::vector<Tensor<S>> per_frame;
  for (size_t t = 0; t < pred.size(); ++t) {
    auto fp = phi.features(pred[t]);
    auto fg = phi.features(gt[t]);
    std::vector<Tensor<S>> per_tap;
    for (size_t k = 0; k < fp.size(); ++k) per_tap.push_back(mse_mean(fp[k], fg[k]));
    per_frame.push_back(mean_scalars(per_tap));
  }
  return mean_scalars(per_frame);
}

// Absolute MCL term over a family of ordered flow pairs.
template <typename S>
Tensor<S> loss_abs(const std::vector<Tensor<S>>& pred_flows,
                   const std::vector<Tensor<S>>& gt_flows, AbsNorm norm = AbsNorm::L2) {
  STINET_CHECK(pred_flows.size() == gt_flows.size() && !pred_flows.empty(),
               "loss_abs: pair set mismatch");
  std::vector<Tensor<S>> per_pair;
  for (size_t i = 0; i < pred_flows.size(); ++i) {
    per_pair.push_back(norm == AbsNorm::L2 ? mse_mean(pred_flows[i], gt_flows[i])
                                           : l1_mean(pred_flows[i], gt_flows[i]));
  }
  return mean_scalars(per_pair);
}

// Relative MCL term (motion accumulation hinge) over t = 2..N-1:
// short_flows[t] = O_{t-1 -> t}, long_flows[t] = O_{t-1 -> t+1}.
template <typename S>
Tensor<S> loss_rel(const std::vector<Tensor<S>>& short_flows,
                   const std::vector<Tensor<S>>& long_flows) {
  STINET_CHECK(short_flows.size() == long_flows.size() && !short_flows.empty(),
               "loss_rel: flow family mismatch");
  std::vector<Tensor<S>> per_t;
  for (size_t i = 0; i < short_flows.size(); ++i)
    per_t.push_back(rel_hinge_mean(short_flows[i], long_flows[i]));
  return mean_scalars(per_t);
}

// Strong-constraint variant: squared error between predicted and ground
// truth flow differences.
template <typename S>
Tensor<S> loss_rel_strong(const std::vector<Tensor<S>>& short_flows,
                          const std::vector<Tensor<S>>& long_flows,
                          const std::vector<Tensor<S>>& short_gt,
                          const std::vector<Tensor<S>>& long_gt) {
  STINET_CHECK(short_flows.size() == long_flows.size() && short_flows.size() == short_gt.size() &&
                   short_flows.size() == long_gt.size() && !short_flows.empty(),
               "loss_rel_strong: flow family mismatch");
  std::vector<Tensor<S>> per_t;
  for (size_t i = 0; i < short_flows.size(); ++i)
    per_t.push_back(
        mse_mean(sub(short_flows[i], long_flows[i]), sub(short_gt[i], long_gt[i])));
  return mean_scalars(per_t);
}

// Overall objective: l = l_rec + l'_rec + lambda1 * l_per + lambda2 * l_mcl
// with l_mcl = l_abs + l_rel. Undefined components count as zero. Any
// non-finite component aborts the step with a diagnostic.
template <typename S>
Tensor<S> total_loss(const Tensor<S>& l_rec_t, const Tensor<S>& l_rec_phase1_t,
                     const Tensor<S>& l_per_t, const Tensor<S>& l_abs_t,
                     const Tensor<S>& l_rel_t, double lambda1, double lambda2,
                     LossReport* report = nullptr) {
  auto check = [](const Tensor<S>& t, const char* name) -> double {
    if (!t.defined()) return 0.0;
    const double v = double(t.item());
    if (!std::isfinite(v)) fail("total_loss: non-finite component ", name, " = ", v);
    return v;
  };
  LossReport r;
  r.l_rec = check(l_rec_t, "l_rec");
  r.l_rec_phase1 = check(l_rec_phase1_t, "l_rec_phase1");
  r.l_per = check(l_per_t, "l_per");
  r.l_abs = check(l_abs_t, "l_abs");
  r.l_rel = check(l_rel_t, "l_rel");
  r.lambda1 = lambda1;
  r.lambda2 = lambda2;
  r.total = r.l_rec + r.l_rec_phase1 + lambda1 * r.l_per + lambda2 * (r.l_abs + r.l_rel);

  Tensor<S> total = l_rec_t.defined() ? l_rec_t : Tensor<S>::zeros({1});
  if (l_rec_phase1_t.defined()) total = add(total, l_rec_phase1_t);
  if (l_per_t.defined()) total = add(total, scale(l_per_t, S(lambda1)));
  if (l_abs_t.defined()) total = add(total, scale(l_abs_t, S(lambda2)));
  if (l_rel_t.defined()) total = add(total, scale(l_rel_t, S(lambda2)));
  if (report) *report = r;
  return total;
}

}  // namespace stinet
