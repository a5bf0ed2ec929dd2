#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stinet/flow.hpp"
#include "stinet/image.hpp"
#include "stinet/losses.hpp"
#include "stinet/reconstruct.hpp"
#include "stinet/stfi.hpp"
#include "stinet/stgr.hpp"
#include "stinet/stlr.hpp"

namespace stinet {

struct ModelConfig {
  int64_t channels = 64;
  bool stfi_shared = true;
  int64_t stfi_blocks = 5;
  bool stlr_enabled = true;
  bool stlr_inet = true;
  OffsetsMode stlr_offsets = OffsetsMode::Both;
  bool stgr_enabled = true;
  int64_t stgr_layers = 4;
  bool edge_ef = true, edge_ep = true, edge_et = true;
  bool use_hr = true, use_lr = true;
  bool flow_use = true;       // false: zeroed Mnet input path
  bool flow_adaption = true;  // false: raw bidirectional flows into Mnet
  int64_t flow_channels = 16;
};

template <typename S>
Tensor<S> image_to_tensor(const Image& img, bool requires_grad = false) {
  std::vector<S> data(img.data.begin(), img.data.end());
  return Tensor<S>::from({img.c, img.h, img.w}, std::move(data), requires_grad);
}

template <typename S>
Image tensor_to_image(const Tensor<S>& t) {
  STINET_CHECK(t.ndim() == 3, "tensor_to_image: expected CHW");
  Image img(t.dim(0), t.dim(1), t.dim(2));
  for (int64_t i = 0; i < t.numel(); ++i) img.data[size_t(i)] = float(t.data()[i]);
  return img;
}

using Trace = std::vector<std::string>;

template <typename S>
struct ForwardResult {
  std::vector<Tensor<S>> pred;       // reconstructed HR frames, unclamped
  std::vector<Tensor<S>> phase1_lr;  // Phase-1 LR projections (empty if LR stream off)
  std::vector<Tensor<S>> phase1_hr;  // Phase-1 HR projections (empty if HR stream off)
  std::vector<double> times;         // internal timeline: given frames 2 units apart
};

// The full four-phase pipeline. Given frames sit at even times 0,2,4,...;
// n_interp intermediate features are synthesized per gap at
// t'_k = t_prev + 2k/(n+1).
template <typename S>
struct STINet {
  ModelConfig cfg;
  SsrModule<S> ssr;
  MotionSubnet<S> mnet;
  InterpSubnet<S> pnet;
  Phase1Heads<S> phase1;
  StlrModule<S> stlr;
  StgrModule<S> stgr;
  ReconHeads<S> recon;

  STINet() = default;
  STINet(const ModelConfig& c, Rng rng) : cfg(c) {
    STINET_CHECK(cfg.use_hr || cfg.use_lr, "model: at least one of the LR/HR streams required");
    ssr = SsrModule<S>(cfg.channels, rng);
    mnet = MotionSubnet<S>(cfg.channels, rng);
    pnet = InterpSubnet<S>(cfg.channels, cfg.stfi_blocks, cfg.stfi_shared, rng);
    phase1 = Phase1Heads<S>(cfg.channels, rng);
    stlr = StlrModule<S>(cfg.channels, cfg.stlr_inet, cfg.stlr_offsets, rng);
    stgr = StgrModule<S>(cfg.channels, cfg.stgr_layers, cfg.edge_ef, cfg.edge_ep, cfg.edge_et, rng);
    if (cfg.use_lr) recon = ReconHeads<S>(cfg.channels, rng);
    else {
      // HR-only variant still needs the HR projection head
      recon.c = cfg.channels;
      recon.head_hr = Conv<S>::make(3, cfg.channels, 1, rng);
      recon.head_lr = Conv<S>::make(3, 1, 1, rng);  // placeholder, unused
    }
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    ssr.visit(p + ".ssr", f);
    mnet.visit(p + ".mnet", f);
    pnet.visit(p + ".pnet", f);
    phase1.visit(p + ".phase1", f);
    stlr.visit(p + ".stlr", f);
    stgr.visit(p + ".stgr", f);
    recon.visit(p + ".recon", f);
  }

  // Thread-local view: parameters share storage with the master copy but own
  // their gradient buffers.
  STINet shadow_clone() const {
    STINet copy = *this;
    copy.visit("m", [](const std::string&, Tensor<S>& t) { t = t.shadow(); });
    return copy;
  }

  ForwardResult<S> forward(const std::vector<Tensor<S>>& frames, const FlowEstimator<S>& flownet,
                           int64_t n_interp, Trace* trace = nullptr) const {
    STINET_CHECK(frames.size() >= 2, "infer: clip must have at least 2 frames");
    STINET_CHECK(n_interp >= 1, "infer: n_interp >= 1 required");
    const int64_t g_count = int64_t(frames.size());
    const int64_t lh = frames[0].dim(1), lw = frames[0].dim(2);
    auto tpush = [&](const char* s) {
      if (trace) trace->push_back(s);
    };

    // bidirectional flows between consecutive given frames
    std::vector<FlowField<S>> fwd_flows, bwd_flows;
    if (cfg.flow_use) {
      tpush("flow");
      for (int64_t g = 0; g + 1 < g_count; ++g) {
        const double ta = 2.0 * double(g), tb = 2.0 * double(g + 1);
        fwd_flows.push_back(estimate_flow(flownet, frames[size_t(g)], frames[size_t(g + 1)], ta, tb));
        bwd_flows.push_back(estimate_flow(flownet, frames[size_t(g + 1)], frames[size_t(g)], tb, ta));
      }
      if (cfg.flow_adaption) tpush("flow_adapt");
    }

    // S-SR feature initialization for given frames
    tpush("stfi");
    std::vector<Tensor<S>> l_given, h_given;
    for (const auto& f : frames) {
      auto [l, h] = ssr(f, cfg.use_hr);
      l_given.push_back(l);
      if (cfg.use_hr) h_given.push_back(h);
    }

    // assemble time-ordered sequences with interpolated features
    std::vector<Tensor<S>> L, H;
    std::vector<double> times;
    for (int64_t g = 0; g < g_count; ++g) {
      L.push_back(l_given[size_t(g)]);
      if (cfg.use_hr) H.push_back(h_given[size_t(g)]);
      times.push_back(2.0 * double(g));
      if (g + 1 == g_count) break;
      for (double t_prime : intermediate_times(2.0 * double(g), n_interp)) {
        Tensor<S> o_prev, o_next;
        if (!cfg.flow_use) {
          o_prev = Tensor<S>::zeros({2, lh, lw});
          o_next = Tensor<S>::zeros({2, lh, lw});
        } else if (cfg.flow_adaption) {
          auto [p, n] = adapt_flow(fwd_flows[size_t(g)], bwd_flows[size_t(g)], t_prime);
          o_prev = p.values;
          o_next = n.values;
        } else {
          o_prev = bwd_flows[size_t(g)].values;
          o_next = fwd_flows[size_t(g)].values;
        }
        auto m = mnet(o_prev, o_next);
        if (cfg.use_hr && cfg.use_lr) {
          auto [lt, ht] = pnet(m, l_given[size_t(g)], l_given[size_t(g + 1)], h_given[size_t(g)],
                               h_given[size_t(g + 1)]);
          L.push_back(lt);
          H.push_back(ht);
        } else if (cfg.use_lr) {
          L.push_back(pnet.lr_only(m, l_given[size_t(g)], l_given[size_t(g + 1)]));
        } else {
          H.push_back(pnet.hr_only(m, h_given[size_t(g)], h_given[size_t(g + 1)]));
        }
        times.push_back(t_prime);
      }
    }

    ForwardResult<S> result;
    result.times = times;

    // Phase-1 projections on the ST-FI outputs
    tpush("phase1");
    if (cfg.use_lr)
      for (const auto& l : L) result.phase1_lr.push_back(phase1.lr_head(l));
    if (cfg.use_hr)
      for (const auto& h : H) result.phase1_hr.push_back(phase1.hr_head(h));

    // local refinement
    std::vector<Tensor<S>> lr_ref = L, hr_ref = H;
    if (cfg.stlr_enabled) {
      tpush("stlr");
      if (cfg.use_hr && cfg.use_lr) {
        auto [l, h] = stlr.refine_sequence(L, H);
        lr_ref = std::move(l);
        hr_ref = std::move(h);
      } else if (cfg.use_lr) {
        lr_ref = stlr.refine_sequence_single(ResLevel::LR, L);
      } else {
        hr_ref = stlr.refine_sequence_single(ResLevel::HR, H);
      }
    }

    // global refinement
    std::vector<Tensor<S>> lg = lr_ref, hg = hr_ref;
    if (cfg.stgr_enabled) {
      tpush("stgr");
      if (cfg.use_hr && cfg.use_lr) {
        auto graph = build_graph(lr_ref, hr_ref, times);
        std::vector<Tensor<S>> pixel_feats = lr_ref;
        for (const auto& h : hr_ref)
          pixel_feats.push_back(resize_bilinear(h, h.dim(1) / 4, h.dim(2) / 4));
        edge_attributes(graph, pixel_feats);
        auto node_out = stgr.graphsage_refine(graph);
        auto [l, h] = modulate_features(node_out, lr_ref, hr_ref);
        lg = std::move(l);
        hg = std::move(h);
      } else {
        auto& seq = cfg.use_lr ? lr_ref : hr_ref;
        auto graph = build_graph_single(seq, times, cfg.use_lr ? ResLevel::LR : ResLevel::HR);
        std::vector<Tensor<S>> pixel_feats;
        for (const auto& f : seq)
          pixel_feats.push_back(cfg.use_lr ? f : resize_bilinear(f, f.dim(1) / 4, f.dim(2) / 4));
        edge_attributes(graph, pixel_feats);
        auto node_out = stgr.graphsage_refine(graph);
        std::vector<Tensor<S>> mod;
        for (size_t i = 0; i < seq.size(); ++i)
          mod.push_back(modulate_feature(seq[i], node_out[i]));
        (cfg.use_lr ? lg : hg) = std::move(mod);
      }
    }

    // reconstruction
    tpush("reconstruct");
    for (size_t t = 0; t < times.size(); ++t) {
      if (cfg.use_hr && cfg.use_lr) result.pred.push_back(recon(lg[t], hg[t]));
      else if (cfg.use_lr) result.pred.push_back(recon.lr_path(lg[t]));
      else result.pred.push_back(recon.hr_path(hg[t]));
    }
    return result;
  }
};

// ---- MCL flow families ----

// Flow families needed by the motion consistency loss. Predicted flows are
// estimated between reconstructed frames (differentiable w.r.t. them);
// ground-truth flows come from the same frozen estimator applied to the
// ground-truth frames and may be cached per clip.
template <typename S>
struct MclFlows {
  std::vector<Tensor<S>> abs_pred, abs_gt;
  std::vector<Tensor<S>> rel_short, rel_long;
  std::vector<Tensor<S>> rel_short_gt, rel_long_gt;
};

template <typename S>
using FlowCache = std::map<std::pair<int, int>, Tensor<S>>;

// `shared_gt_cache` (optional) is consulted read-only so it can be shared
// across worker threads; misses are computed into a call-local cache.
template <typename S>
MclFlows<S> build_mcl_flows(const std::vector<Tensor<S>>& pred,
                            const std::vector<Tensor<S>>& gt, const FlowEstimator<S>& flownet,
                            const MclConfig& mcl,
                            const FlowCache<S>* shared_gt_cache = nullptr) {
  const int n = int(pred.size());
  STINET_CHECK(gt.size() == pred.size(), "build_mcl_flows: sequence mismatch");
  MclFlows<S> out;
  if (mcl.abs == AbsMode::Off && mcl.rel == RelMode::Off) return out;

  FlowCache<S> pred_cache;
  auto pred_flow = [&](int a, int b) {
    auto it = pred_cache.find({a, b});
    if (it != pred_cache.end()) return it->second;
    auto f = flownet.forward(pred[size_t(a)], pred[size_t(b)]);
    pred_cache[{a, b}] = f;
    return f;
  };
  FlowCache<S> local_gt_cache;
  auto gt_flow = [&](int a, int b) {
    if (shared_gt_cache) {
      auto it = shared_gt_cache->find({a, b});
      if (it != shared_gt_cache->end()) return it->second;
    }
    auto it = local_gt_cache.find({a, b});
    if (it != local_gt_cache.end()) return it->second;
    auto f = flownet.forward(gt[size_t(a)], gt[size_t(b)]).detach();
    local_gt_cache[{a, b}] = f;
    return f;
  };

  std::vector<std::pair<int, int>> abs_pairs;
  if (mcl.abs == AbsMode::On) {
    for (int t = 0; t < n; ++t)
      for (int p = 0; p < n; ++p)
        if (t != p) abs_pairs.push_back({t, p});
  } else if (mcl.abs == AbsMode::Adjacent) {
    for (int t = 0; t + 1 < n; ++t) {
      abs_pairs.push_back({t, t + 1});
      abs_pairs.push_back({t + 1, t});
    }
  }
  for (const auto& [t, p] : abs_pairs) {
    out.abs_pred.push_back(pred_flow(t, p));
    out.abs_gt.push_back(gt_flow(t, p));
  }

  if (mcl.rel != RelMode::Off && n >= 3) {
    for (int t = 1; t + 1 < n; ++t) {
      out.rel_short.push_back(pred_flow(t - 1, t));
      out.rel_long.push_back(pred_flow(t - 1, t + 1));
      if (mcl.rel == RelMode::Strong) {
        out.rel_short_gt.push_back(gt_flow(t - 1, t));
        out.rel_long_gt.push_back(gt_flow(t - 1, t + 1));
      }
    }
  }
  return out;
}

// Number of ordered pairs used by each absolute-loss mode.
inline int64_t abs_pair_count(AbsMode mode, int64_t n) {
  switch (mode) {
    case AbsMode::On: return n * (n - 1);
    case AbsMode::Adjacent: return 2 * (n - 1);
    default: return 0;
  }
}

}  // namespace stinet
