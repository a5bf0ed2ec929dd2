#pragma once

#include <cmath>
#include <fstream>
#include <utility>
#include <vector>

#include "stinet/module.hpp"

namespace stinet {

// Graph over the whole LR+HR feature sequence: 2S nodes (LR nodes 0..S-1 by
// time, HR nodes S..2S-1 by time), one counterpart edge per frame plus all
// same-level pairs, so |edges| = S + 2*S*(S-1)/2 = S^2.
template <typename S>
struct FeatureGraph {
  struct Node {
    Tensor<S> feature;  // {c}, pooled
    double time = 0;
    ResLevel level = ResLevel::LR;
  };
  struct EdgeAttr {
    Tensor<S> ef;  // frame-level cosine similarity, tracked
    Tensor<S> ep;  // mean pixel-level cosine similarity, tracked
    double et = 0;  // temporal closeness 1 - sigmoid(|dt|), constant
  };
  std::vector<Node> nodes;
  std::vector<std::pair<int, int>> edges;  // undirected, first < second
  std::vector<EdgeAttr> attrs;
  int64_t num_frames = 0;
};

// Global-average pooling of each frame feature into a c-vector node
// feature; ordering: LR nodes by time, then HR nodes by time.
template <typename S>
std::vector<Tensor<S>> pool_node_features(const std::vector<Tensor<S>>& lr,
                                          const std::vector<Tensor<S>>& hr) {
  STINET_CHECK(lr.size() == hr.size(), "pool_node_features: sequence length mismatch");
  std::vector<Tensor<S>> out;
  for (const auto& f : lr) out.push_back(global_avg_pool(f));
  for (const auto& f : hr) out.push_back(global_avg_pool(f));
  return out;
}

// Adjacency construction: counterpart edges (i, S+i), then all LR pairs,
// then all HR pairs. No LR-HR edges across different times, no self loops.
template <typename S>
FeatureGraph<S> build_graph(const std::vector<Tensor<S>>& lr, const std::vector<Tensor<S>>& hr,
                            const std::vector<double>& times) {
  STINET_CHECK(lr.size() == hr.size() && lr.size() == times.size(),
               "build_graph: sequence length mismatch");
  FeatureGraph<S> g;
  g.num_frames = int64_t(lr.size());
  auto pooled = pool_node_features(lr, hr);
  for (int64_t i = 0; i < g.num_frames; ++i)
    g.nodes.push_back({pooled[size_t(i)], times[size_t(i)], ResLevel::LR});
  for (int64_t i = 0; i < g.num_frames; ++i)
    g.nodes.push_back({pooled[size_t(g.num_frames + i)], times[size_t(i)], ResLevel::HR});
  for (int i = 0; i < g.num_frames; ++i) g.edges.push_back({i, int(g.num_frames) + i});
  for (int i = 0; i < g.num_frames; ++i)
    for (int j = i + 1; j < g.num_frames; ++j) g.edges.push_back({i, j});
  for (int i = 0; i < g.num_frames; ++i)
    for (int j = i + 1; j < g.num_frames; ++j) g.edges.push_back({int(g.num_frames) + i, int(g.num_frames) + j});
  return g;
}

// Single-level graph used by the w/o-HR / w/o-LR variants: S nodes, all
// same-level pairs.
template <typename S>
FeatureGraph<S> build_graph_single(const std::vector<Tensor<S>>& seq,
                                   const std::vector<double>& times, ResLevel level) {
  FeatureGraph<S> g;
  g.num_frames = int64_t(seq.size());
  for (size_t i = 0; i < seq.size(); ++i)
    g.nodes.push_back({global_avg_pool(seq[i]), times[i], level});
  for (int i = 0; i < g.num_frames; ++i)
    for (int j = i + 1; j < g.num_frames; ++j) g.edges.push_back({i, j});
  return g;
}

inline double temporal_closeness(double t1, double t2) {
  const double d = std::abs(t1 - t2);
  return 1.0 - 1.0 / (1.0 + std::exp(-d));
}

// Edge attribute triplets. E^F is the cosine of the pooled node features;
// E^P averages per-pixel channel cosines, with HR participants bilinearly
// downsampled 4x to the LR grid first; E^T = 1 - sigmoid(|t1 - t2|).
// `pixel_feats` must hold the per-node pixel-level features already on a
// common grid (LR features as-is, HR features downsampled).
template <typename S>
void edge_attributes(FeatureGraph<S>& g, const std::vector<Tensor<S>>& pixel_feats) {
  STINET_CHECK(pixel_feats.size() == g.nodes.size(), "edge_attributes: node count mismatch");
  g.attrs.clear();
  for (const auto& [a, b] : g.edges) {
    typename FeatureGraph<S>::EdgeAttr attr;
    attr.ef = cosine_vec(g.nodes[size_t(a)].feature, g.nodes[size_t(b)].feature);
    attr.ep = pixel_cosine_mean(pixel_feats[size_t(a)], pixel_feats[size_t(b)]);
    attr.et = temporal_closeness(g.nodes[size_t(a)].time, g.nodes[size_t(b)].time);
    g.attrs.push_back(std::move(attr));
  }
}

// ST-GR module: attribute-weighted GraphSAGE refinement with channel-wise
// feature modulation. The final node projection is zero-initialized so the
// whole module is the identity map on features at the start of training.
template <typename S>
struct StgrModule {
  int64_t c = 0;
  int64_t num_layers = 4;
  bool use_ef = true, use_ep = true, use_et = true;
  LinearLayer<S> edge_mlp;                 // {1,3}: learned map of (E^F,E^P,E^T)
  std::vector<LinearLayer<S>> sage;        // {c, 2c} each
  LinearLayer<S> out_proj;                 // {c, c}, zero-initialized

  StgrModule() = default;
  StgrModule(int64_t c_, int64_t layers, bool ef, bool ep, bool et, Rng& rng)
      : c(c_), num_layers(layers), use_ef(ef), use_ep(ep), use_et(et) {
    edge_mlp = LinearLayer<S>::make(1, 3, rng);
    // modest init so softplus starts near 1 and the neighborhood mean is
    // close to uniform
    for (auto& v : edge_mlp.w.values()) v = S(rng.normal(0.0, 0.1));
    edge_mlp.b.values()[0] = S(0.5413248546129181);  // softplus(x) = 1
    for (int64_t i = 0; i < layers; ++i) sage.push_back(LinearLayer<S>::make(c, 2 * c, rng));
    out_proj = LinearLayer<S>::make(c, c, rng, /*zero_init=*/true);
  }

  // Raw (unnormalized) edge weight from the attribute triplet; disabled
  // attributes enter as zero.
  Tensor<S> edge_weight(const typename FeatureGraph<S>::EdgeAttr& attr) const {
    auto ef = use_ef ? attr.ef : Tensor<S>::zeros({1});
    auto ep = use_ep ? attr.ep : Tensor<S>::zeros({1});
    auto et = Tensor<S>::scalar(use_et ? S(attr.et) : S(0));
    auto triplet = concat_vec(concat_vec(ef, ep), et);
    return softplus(edge_mlp(triplet));
  }

  // Normalized incoming weights per node; fixed from the input features for
  // all layers. Neighborhoods with (numerically) zero total weight get zero
  // message weights.
  std::vector<std::vector<std::pair<int, Tensor<S>>>> neighbor_weights(
      const FeatureGraph<S>& g, const std::vector<Tensor<S>>* override_raw = nullptr) const {
    const size_t n = g.nodes.size();
    std::vector<std::vector<std::pair<int, Tensor<S>>>> nbr(n);
    std::vector<Tensor<S>> raw;
    for (size_t e = 0; e < g.edges.size(); ++e)
      raw.push_back(override_raw ? (*override_raw)[e] : edge_weight(g.attrs[e]));
    for (size_t i = 0; i < n; ++i) {
      Tensor<S> denom;
      std::vector<std::pair<int, size_t>> inc;  // (neighbor, edge index)
      for (size_t e = 0; e < g.edges.size(); ++e) {
        const auto& [a, b] = g.edges[e];
        if (size_t(a) == i) inc.push_back({b, e});
        else if (size_t(b) == i) inc.push_back({a, e});
      }
      for (const auto& [j, e] : inc)
        denom = denom.defined() ? add(denom, raw[e]) : raw[e];
      const bool degenerate = !denom.defined() || denom.item() < S(1e-12);
      for (const auto& [j, e] : inc) {
        nbr[i].push_back({j, degenerate ? Tensor<S>::zeros({1}) : div(raw[e], denom)});
      }
    }
    return nbr;
  }

  // Four rounds of weighted-mean aggregation with concatenation update:
  // h_i' = lrelu(W * [h_i ; sum_j alpha_ij h_j] + b).
  std::vector<Tensor<S>> message_passing(
      const std::vector<Tensor<S>>& node_feats,
      const std::vector<std::vector<std::pair<int, Tensor<S>>>>& nbr) const {
    auto h = node_feats;
    for (const auto& layer : sage) {
      std::vector<Tensor<S>> next;
      for (size_t i = 0; i < h.size(); ++i) {
        Tensor<S> agg = Tensor<S>::zeros({c});
        for (const auto& [j, alpha] : nbr[i]) agg = add(agg, smul(h[size_t(j)], alpha));
        next.push_back(leaky_relu(layer(concat_vec(h[i], agg))));
      }
      h = std::move(next);
    }
    for (auto& v : h) v = out_proj(v);
    return h;
  }

  std::vector<Tensor<S>> graphsage_refine(const FeatureGraph<S>& g) const {
    STINET_CHECK(g.attrs.size() == g.edges.size(), "graphsage_refine: attributes not computed");
    std::vector<Tensor<S>> feats;
    for (const auto& node : g.nodes) feats.push_back(node.feature);
    return message_passing(feats, neighbor_weights(g));
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    edge_mlp.visit(p + ".edge_mlp", f);
    for (size_t i = 0; i < sage.size(); ++i) sage[i].visit(p + ".sage" + std::to_string(i), f);
    out_proj.visit(p + ".out", f);
  }
};

// F^G = F + v (x) F with the node output v broadcast over spatial positions.
template <typename S>
Tensor<S> modulate_feature(const Tensor<S>& f, const Tensor<S>& v) {
  return add(f, channel_mul(f, v));
}

template <typename S>
std::pair<std::vector<Tensor<S>>, std::vector<Tensor<S>>> modulate_features(
    const std::vector<Tensor<S>>& node_outputs, const std::vector<Tensor<S>>& lr,
    const std::vector<Tensor<S>>& hr) {
  STINET_CHECK(node_outputs.size() == lr.size() + hr.size(),
               "modulate_features: node output count mismatch");
  std::vector<Tensor<S>> lg, hg;
  for (size_t i = 0; i < lr.size(); ++i) lg.push_back(modulate_feature(lr[i], node_outputs[i]));
  for (size_t i = 0; i < hr.size(); ++i)
    hg.push_back(modulate_feature(hr[i], node_outputs[lr.size() + i]));
  return {lg, hg};
}

// Debug dump: one line per edge with the attribute triplet.
template <typename S>
void dump_graph(const FeatureGraph<S>& g, const std::string& path) {
  std::ofstream out(path);
  STINET_CHECK(out.good(), "dump_graph: cannot open ", path);
  out << "# a b EF EP ET\n";
  for (size_t e = 0; e < g.edges.size(); ++e) {
    out << g.edges[e].first << " " << g.edges[e].second;
    if (e < g.attrs.size())
      out << " " << g.attrs[e].ef.item() << " " << g.attrs[e].ep.item() << " " << g.attrs[e].et;
    out << "\n";
  }
}

}  // namespace stinet
