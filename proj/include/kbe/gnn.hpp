// Attention-based graph network over the entity-property graph. Entity and
// property representations share one aggregation transform (W, b); neighbor
// sums are attention-weighted (softmax over a small scoring MLP) or uniform
// when attention is disabled. An element-wise product feeds an MLP scorer
// ending in a sigmoid. Backprop is written out by hand; every intermediate
// needed by it (and by tests) is recorded in ForwardTrace / MlpTrace.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbe/dense.hpp"
#include "kbe/ep_graph.hpp"
#include "kbe/errors.hpp"
#include "kbe/numerics.hpp"
#include "kbe/rng.hpp"

namespace kbe {

struct GnnConfig {
  int d1 = 16;  // embedding / hidden width
  int d2 = 16;  // attention scorer width
  int mlp_layers = 1;
  int k = 100;  // entity neighbors per entity at graph build time
  double learning_rate = 0.01;
  double lr_floor = 1e-4;
  int negatives_per_positive = 4;
  int batch_size = 512;
  int epochs = 100;
  std::uint64_t seed = 7;
  bool attention_enabled = true;
  bool per_role_attention = false;

  void validate() const {
    if (d1 < 1 || d2 < 1) throw ConfigError("gnn: d1 and d2 must be >= 1");
    if (mlp_layers < 0) throw ConfigError("gnn: mlp_layers must be >= 0");
    if (k < 0) throw ConfigError("gnn: k must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("gnn: learning_rate must be positive");
    if (lr_floor < 0.0) throw ConfigError("gnn: lr_floor must be >= 0");
    if (negatives_per_positive < 0) throw ConfigError("gnn: negatives_per_positive must be >= 0");
    if (batch_size < 1) throw ConfigError("gnn: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("gnn: epochs must be >= 1");
  }
};

// Neighbor aggregation roles: entity<-properties, entity<-entities,
// property<-entities. With shared attention all three use parameter set 0.
enum class AttentionKind { EntityProperty = 0, EntityEntity = 1, PropertyEntity = 2 };

struct AttentionParams {
  Mat w1;  // d2 x 2*d1, applied to [neighbor; center]
  Vec b1;  // d2
  Vec w2;  // d2
  Vec b2;  // 1
};

struct GnnParams {
  int d1 = 0, d2 = 0, mlp_layers = 0;
  bool per_role_attention = false;
  Mat entity_emb;  // n x d1
  Mat prop_emb;    // m x d1
  Mat agg_w;       // d1 x d1, shared by self and every aggregation
  Vec agg_b;       // d1
  std::vector<AttentionParams> attn;  // 1 set, or 3 with per-role attention
  struct MlpLayer {
    Mat w;  // d1 x d1
    Vec b;  // d1
  };
  std::vector<MlpLayer> mlp;
  Vec out_w;  // d1
  Vec out_b;  // 1

  int attention_set(AttentionKind kind) const {
    return per_role_attention ? static_cast<int>(kind) : 0;
  }
};

template <typename F>
void for_each_tensor(GnnParams& p, F&& f) {
  f("entity_emb", p.entity_emb.data);
  f("prop_emb", p.prop_emb.data);
  f("agg_w", p.agg_w.data);
  f("agg_b", p.agg_b);
  for (std::size_t i = 0; i < p.attn.size(); ++i) {
    std::string tag = "attn" + std::to_string(i);
    f(tag + ".w1", p.attn[i].w1.data);
    f(tag + ".b1", p.attn[i].b1);
    f(tag + ".w2", p.attn[i].w2);
    f(tag + ".b2", p.attn[i].b2);
  }
  for (std::size_t r = 0; r < p.mlp.size(); ++r) {
    std::string tag = "mlp" + std::to_string(r);
    f(tag + ".w", p.mlp[r].w.data);
    f(tag + ".b", p.mlp[r].b);
  }
  f("out_w", p.out_w);
  f("out_b", p.out_b);
}

inline std::vector<Vec*> tensor_list(GnnParams& p) {
  std::vector<Vec*> out;
  for_each_tensor(p, [&](const std::string&, Vec& v) { out.push_back(&v); });
  return out;
}

inline GnnParams make_params(int n_entities, int n_properties, const GnnConfig& cfg) {
  GnnParams p;
  p.d1 = cfg.d1;
  p.d2 = cfg.d2;
  p.mlp_layers = cfg.mlp_layers;
  p.per_role_attention = cfg.per_role_attention;
  p.entity_emb = Mat(n_entities, cfg.d1);
  p.prop_emb = Mat(n_properties, cfg.d1);
  p.agg_w = Mat(cfg.d1, cfg.d1);
  p.agg_b = Vec(static_cast<std::size_t>(cfg.d1), 0.0);
  p.attn.resize(cfg.per_role_attention ? 3 : 1);
  for (auto& a : p.attn) {
    a.w1 = Mat(cfg.d2, 2 * cfg.d1);
    a.b1 = Vec(static_cast<std::size_t>(cfg.d2), 0.0);
    a.w2 = Vec(static_cast<std::size_t>(cfg.d2), 0.0);
    a.b2 = Vec(1, 0.0);
  }
  p.mlp.resize(static_cast<std::size_t>(cfg.mlp_layers));
  for (auto& layer : p.mlp) {
    layer.w = Mat(cfg.d1, cfg.d1);
    layer.b = Vec(static_cast<std::size_t>(cfg.d1), 0.0);
  }
  p.out_w = Vec(static_cast<std::size_t>(cfg.d1), 0.0);
  p.out_b = Vec(1, 0.0);
  return p;
}

inline GnnParams init_params(int n_entities, int n_properties, const GnnConfig& cfg, Rng& rng) {
  GnnParams p = make_params(n_entities, n_properties, cfg);
  for_each_tensor(p, [&](const std::string&, Vec& v) {
    for (double& x : v) x = rng.normal(0.0, 1.0);
  });
  return p;
}

inline GnnParams zeros_like(const GnnParams& p) {
  GnnParams z = p;
  for_each_tensor(z, [](const std::string&, Vec& v) { std::fill(v.begin(), v.end(), 0.0); });
  return z;
}

// ---- forward

struct AggregationTrace {
  bool neighbors_are_entities = false;
  int attn_set = 0;
  std::vector<int> neighbors;
  Vec scores;                // raw attention scores (empty when uniform)
  Vec coeffs;                // softmax or uniform weights
  std::vector<Vec> attn_pre; // per neighbor: W1 [x_a; c] + b1
  Vec agg;                   // weighted neighbor sum
  Vec pre;                   // W agg + b
  Vec out;                   // selu(pre)
};

struct ForwardTrace {
  bool is_entity = false;
  int index = 0;
  Vec self_pre;  // W x + b
  std::vector<AggregationTrace> aggs;
  Vec h;
};

namespace detail {

inline double attention_raw_score(const AttentionParams& a, const double* nbr,
                                  const double* center, int d1, Vec& pre_out) {
  pre_out.assign(a.b1.size(), 0.0);
  for (int r = 0; r < a.w1.rows; ++r) {
    const double* row = a.w1.row(r);
    double s = a.b1[static_cast<std::size_t>(r)];
    for (int c = 0; c < d1; ++c) s += row[c] * nbr[c];
    for (int c = 0; c < d1; ++c) s += row[d1 + c] * center[c];
    pre_out[static_cast<std::size_t>(r)] = s;
  }
  double s = a.b2[0];
  for (std::size_t r = 0; r < pre_out.size(); ++r) s += a.w2[r] * selu(pre_out[r]);
  return s;
}

inline void softmax_inplace(Vec& v) {
  double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

inline AggregationTrace aggregate_neighbors(const GnnParams& p, const GnnConfig& cfg,
                                            const Mat& table, bool table_is_entities,
                                            const std::vector<int>& nbrs, const double* center,
                                            AttentionKind kind) {
  AggregationTrace tr;
  tr.neighbors_are_entities = table_is_entities;
  tr.attn_set = p.attention_set(kind);
  tr.neighbors = nbrs;
  std::size_t n = nbrs.size();
  if (cfg.attention_enabled) {
    const AttentionParams& a = p.attn[static_cast<std::size_t>(tr.attn_set)];
    tr.scores.resize(n);
    tr.attn_pre.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      tr.scores[i] = attention_raw_score(a, table.row(nbrs[i]), center, p.d1, tr.attn_pre[i]);
    }
    tr.coeffs = tr.scores;
    softmax_inplace(tr.coeffs);
  } else {
    tr.coeffs.assign(n, 1.0 / static_cast<double>(n));
  }
  tr.agg.assign(static_cast<std::size_t>(p.d1), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = table.row(nbrs[i]);
    for (int d = 0; d < p.d1; ++d) tr.agg[static_cast<std::size_t>(d)] += tr.coeffs[i] * x[d];
  }
  tr.pre.assign(static_cast<std::size_t>(p.d1), 0.0);
  for (int r = 0; r < p.d1; ++r) {
    const double* row = p.agg_w.row(r);
    double s = p.agg_b[static_cast<std::size_t>(r)];
    for (int c = 0; c < p.d1; ++c) s += row[c] * tr.agg[static_cast<std::size_t>(c)];
    tr.pre[static_cast<std::size_t>(r)] = s;
  }
  tr.out.resize(static_cast<std::size_t>(p.d1));
  for (int d = 0; d < p.d1; ++d) {
    tr.out[static_cast<std::size_t>(d)] = selu(tr.pre[static_cast<std::size_t>(d)]);
  }
  return tr;
}

}  // namespace detail

// Softmax attention weights for a neighbor list; uniform when attention is
// off; empty list -> empty weights.
inline Vec attention_coefficients(const GnnParams& p, const GnnConfig& cfg, AttentionKind kind,
                                  const Vec& center, const std::vector<Vec>& neighbors) {
  if (neighbors.empty()) return {};
  if (!cfg.attention_enabled) {
    return Vec(neighbors.size(), 1.0 / static_cast<double>(neighbors.size()));
  }
  const AttentionParams& a = p.attn[static_cast<std::size_t>(p.attention_set(kind))];
  Vec scores(neighbors.size());
  Vec scratch;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    scores[i] = detail::attention_raw_score(a, neighbors[i].data(), center.data(), p.d1, scratch);
  }
  detail::softmax_inplace(scores);
  return scores;
}

inline ForwardTrace forward_node(const EntityPropertyGraph& g, const GnnParams& p,
                                 const GnnConfig& cfg, bool is_entity, int idx) {
  ForwardTrace tr;
  tr.is_entity = is_entity;
  tr.index = idx;
  const Mat& table = is_entity ? p.entity_emb : p.prop_emb;
  const double* x = table.row(idx);

  tr.self_pre.assign(static_cast<std::size_t>(p.d1), 0.0);
  for (int r = 0; r < p.d1; ++r) {
    const double* row = p.agg_w.row(r);
    double s = p.agg_b[static_cast<std::size_t>(r)];
    for (int c = 0; c < p.d1; ++c) s += row[c] * x[c];
    tr.self_pre[static_cast<std::size_t>(r)] = s;
  }
  tr.h.resize(static_cast<std::size_t>(p.d1));
  for (int d = 0; d < p.d1; ++d) {
    tr.h[static_cast<std::size_t>(d)] = selu(tr.self_pre[static_cast<std::size_t>(d)]);
  }

  auto add_aggregation = [&](const Mat& nbr_table, bool nbrs_are_entities,
                             const std::vector<int>& nbrs, AttentionKind kind) {
    if (nbrs.empty()) return;  // empty neighbor class contributes a zero vector
    tr.aggs.push_back(
        detail::aggregate_neighbors(p, cfg, nbr_table, nbrs_are_entities, nbrs, x, kind));
    const Vec& out = tr.aggs.back().out;
    for (int d = 0; d < p.d1; ++d) tr.h[static_cast<std::size_t>(d)] += out[static_cast<std::size_t>(d)];
  };

  if (is_entity) {
    add_aggregation(p.prop_emb, false, g.entity_props[static_cast<std::size_t>(idx)],
                    AttentionKind::EntityProperty);
    add_aggregation(p.entity_emb, true, g.entity_neighbors[static_cast<std::size_t>(idx)],
                    AttentionKind::EntityEntity);
  } else {
    add_aggregation(p.entity_emb, true, g.prop_entities[static_cast<std::size_t>(idx)],
                    AttentionKind::PropertyEntity);
  }
  return tr;
}

struct MlpTrace {
  std::vector<Vec> g;    // g[0] = h . k, then per-layer activations
  std::vector<Vec> pre;  // per-layer pre-activations
  double logit = 0.0;
  double y = 0.0;
};

inline MlpTrace mlp_forward(const GnnParams& p, const Vec& h, const Vec& k) {
  MlpTrace tr;
  Vec g0(static_cast<std::size_t>(p.d1));
  for (int d = 0; d < p.d1; ++d) {
    g0[static_cast<std::size_t>(d)] =
        h[static_cast<std::size_t>(d)] * k[static_cast<std::size_t>(d)];
  }
  tr.g.push_back(std::move(g0));
  for (const auto& layer : p.mlp) {
    Vec pre;
    affine(layer.w, tr.g.back(), layer.b, pre);
    Vec act(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) act[i] = selu(pre[i]);
    tr.pre.push_back(std::move(pre));
    tr.g.push_back(std::move(act));
  }
  tr.logit = dot(p.out_w, tr.g.back()) + p.out_b[0];
  // stay strictly inside (0, 1) even where the sigmoid saturates in double
  // precision (|logit| above ~36)
  tr.y = std::clamp(sigmoid(tr.logit), kLogFloor, 1.0 - kLogFloor);
  return tr;
}

inline double predict_pair(const EntityPropertyGraph& g, const GnnParams& p,
                           const GnnConfig& cfg, int entity_idx, int prop_idx) {
  ForwardTrace et = forward_node(g, p, cfg, true, entity_idx);
  ForwardTrace pt = forward_node(g, p, cfg, false, prop_idx);
  return mlp_forward(p, et.h, pt.h).y;
}

// Summed binary cross-entropy with floored logs.
inline double bce_loss(double y, double target) {
  return -(target * clamped_log(y) + (1.0 - target) * clamped_log(1.0 - y));
}

// ---- backward

namespace detail {

inline void node_backward(const GnnParams& p, const GnnConfig& cfg, const ForwardTrace& tr,
                          const Vec& dh, GnnParams& grad) {
  const Mat& center_table = tr.is_entity ? p.entity_emb : p.prop_emb;
  Mat& center_grad_table = tr.is_entity ? grad.entity_emb : grad.prop_emb;
  const double* x = center_table.row(tr.index);
  Vec dx(static_cast<std::size_t>(p.d1), 0.0);

  Vec dpre(static_cast<std::size_t>(p.d1));
  for (int d = 0; d < p.d1; ++d) {
    dpre[static_cast<std::size_t>(d)] =
        dh[static_cast<std::size_t>(d)] * selu_grad(tr.self_pre[static_cast<std::size_t>(d)]);
  }
  for (int r = 0; r < p.d1; ++r) {
    double* grow = grad.agg_w.row(r);
    double dr = dpre[static_cast<std::size_t>(r)];
    for (int c = 0; c < p.d1; ++c) grow[c] += dr * x[c];
    grad.agg_b[static_cast<std::size_t>(r)] += dr;
  }
  add_transpose_times(p.agg_w, dpre, dx);

  for (const AggregationTrace& agg : tr.aggs) {
    const Mat& nbr_table = agg.neighbors_are_entities ? p.entity_emb : p.prop_emb;
    Mat& nbr_grad_table = agg.neighbors_are_entities ? grad.entity_emb : grad.prop_emb;

    for (int d = 0; d < p.d1; ++d) {
      dpre[static_cast<std::size_t>(d)] =
          dh[static_cast<std::size_t>(d)] * selu_grad(agg.pre[static_cast<std::size_t>(d)]);
    }
    for (int r = 0; r < p.d1; ++r) {
      double* grow = grad.agg_w.row(r);
      double dr = dpre[static_cast<std::size_t>(r)];
      for (int c = 0; c < p.d1; ++c) grow[c] += dr * agg.agg[static_cast<std::size_t>(c)];
      grad.agg_b[static_cast<std::size_t>(r)] += dr;
    }
    Vec dagg(static_cast<std::size_t>(p.d1), 0.0);
    add_transpose_times(p.agg_w, dpre, dagg);

    std::size_t n = agg.neighbors.size();
    Vec dcoeff(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xa = nbr_table.row(agg.neighbors[i]);
      double s = 0.0;
      for (int d = 0; d < p.d1; ++d) s += dagg[static_cast<std::size_t>(d)] * xa[d];
      dcoeff[i] = s;
      double* ga = nbr_grad_table.row(agg.neighbors[i]);
      for (int d = 0; d < p.d1; ++d) ga[d] += agg.coeffs[i] * dagg[static_cast<std::size_t>(d)];
    }

    if (cfg.attention_enabled) {
      const AttentionParams& a = p.attn[static_cast<std::size_t>(agg.attn_set)];
      AttentionParams& ga = grad.attn[static_cast<std::size_t>(agg.attn_set)];
      // softmax Jacobian: ds_i = c_i (dcoeff_i - sum_j c_j dcoeff_j)
      double mixed = 0.0;
      for (std::size_t i = 0; i < n; ++i) mixed += agg.coeffs[i] * dcoeff[i];
      Vec dt(a.b1.size());
      for (std::size_t i = 0; i < n; ++i) {
        double ds = agg.coeffs[i] * (dcoeff[i] - mixed);
        if (ds == 0.0) continue;
        const Vec& t = agg.attn_pre[i];
        for (std::size_t r = 0; r < t.size(); ++r) {
          ga.w2[r] += ds * selu(t[r]);
          dt[r] = ds * a.w2[r] * selu_grad(t[r]);
        }
        ga.b2[0] += ds;
        const double* xa = nbr_table.row(agg.neighbors[i]);
        double* gxa = nbr_grad_table.row(agg.neighbors[i]);
        for (int r = 0; r < a.w1.rows; ++r) {
          const double* row = a.w1.row(r);
          double* grow = ga.w1.row(r);
          double dtr = dt[static_cast<std::size_t>(r)];
          for (int c = 0; c < p.d1; ++c) {
            grow[c] += dtr * xa[c];
            grow[p.d1 + c] += dtr * x[c];
            gxa[c] += dtr * row[c];
            dx[static_cast<std::size_t>(c)] += dtr * row[p.d1 + c];
          }
          ga.b1[static_cast<std::size_t>(r)] += dtr;
        }
      }
    }
  }

  double* gx = center_grad_table.row(tr.index);
  for (int d = 0; d < p.d1; ++d) gx[d] += dx[static_cast<std::size_t>(d)];
}

inline void mlp_backward(const GnnParams& p, const MlpTrace& tr, const Vec& h, const Vec& k,
                         double dlogit, GnnParams& grad, Vec& dh, Vec& dk) {
  add_scaled(grad.out_w, tr.g.back(), dlogit);
  grad.out_b[0] += dlogit;
  Vec dg(static_cast<std::size_t>(p.d1), 0.0);
  add_scaled(dg, p.out_w, dlogit);
  for (int r = static_cast<int>(p.mlp.size()) - 1; r >= 0; --r) {
    const auto& layer = p.mlp[static_cast<std::size_t>(r)];
    auto& glayer = grad.mlp[static_cast<std::size_t>(r)];
    const Vec& pre = tr.pre[static_cast<std::size_t>(r)];
    Vec dpre(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) dpre[i] = dg[i] * selu_grad(pre[i]);
    add_outer(glayer.w, dpre, tr.g[static_cast<std::size_t>(r)]);
    for (std::size_t i = 0; i < dpre.size(); ++i) glayer.b[i] += dpre[i];
    dg.assign(dg.size(), 0.0);
    add_transpose_times(layer.w, dpre, dg);
  }
  dh.resize(static_cast<std::size_t>(p.d1));
  dk.resize(static_cast<std::size_t>(p.d1));
  for (int d = 0; d < p.d1; ++d) {
    auto i = static_cast<std::size_t>(d);
    dh[i] = dg[i] * k[i];
    dk[i] = dg[i] * h[i];
  }
}

}  // namespace detail

// Forward + backward for one labeled pair; returns the loss and accumulates
// parameter gradients.
inline double example_loss_and_grad(const EntityPropertyGraph& g, const GnnParams& p,
                                    const GnnConfig& cfg, int entity_idx, int prop_idx,
                                    double target, GnnParams& grad) {
  ForwardTrace et = forward_node(g, p, cfg, true, entity_idx);
  ForwardTrace pt = forward_node(g, p, cfg, false, prop_idx);
  MlpTrace mt = mlp_forward(p, et.h, pt.h);
  double loss = bce_loss(mt.y, target);
  // cross-entropy through the sigmoid collapses to y - t, which stays finite
  // and informative even where the loss value itself sits on the log clamp
  double dlogit = mt.y - target;
  Vec dh, dk;
  detail::mlp_backward(p, mt, et.h, pt.h, dlogit, grad, dh, dk);
  detail::node_backward(p, cfg, et, dh, grad);
  detail::node_backward(p, cfg, pt, dk, grad);
  return loss;
}

struct TrainExample {
  int entity = 0;
  int property = 0;
  double target = 0.0;
};

inline double batch_loss(const EntityPropertyGraph& g, const GnnParams& p, const GnnConfig& cfg,
                         const std::vector<TrainExample>& batch) {
  double total = 0.0;
  for (const TrainExample& ex : batch) {
    total += bce_loss(predict_pair(g, p, cfg, ex.entity, ex.property), ex.target);
  }
  return total;
}

inline GnnParams batch_gradient(const EntityPropertyGraph& g, const GnnParams& p,
                                const GnnConfig& cfg, const std::vector<TrainExample>& batch,
                                double* loss_out = nullptr) {
  GnnParams grad = zeros_like(p);
  double total = 0.0;
  for (const TrainExample& ex : batch) {
    total += example_loss_and_grad(g, p, cfg, ex.entity, ex.property, ex.target, grad);
  }
  if (loss_out) *loss_out = total;
  return grad;
}

// ---- optimizer

struct AdamState {
  std::vector<Vec> m, v;
  long t = 0;

  static AdamState for_params(GnnParams& p) {
    AdamState st;
    for (Vec* tensor : tensor_list(p)) {
      st.m.emplace_back(tensor->size(), 0.0);
      st.v.emplace_back(tensor->size(), 0.0);
    }
    return st;
  }
};

inline void adam_step(GnnParams& p, GnnParams& grad, AdamState& st, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++st.t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  std::vector<Vec*> ps = tensor_list(p);
  std::vector<Vec*> gs = tensor_list(grad);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Vec& theta = *ps[i];
    const Vec& gv = *gs[i];
    Vec& m = st.m[i];
    Vec& v = st.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * gv[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * gv[j] * gv[j];
      theta[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
    }
  }
}

// ---- training

struct TrainResult {
  GnnParams params;
  std::vector<double> epoch_losses;  // summed BCE per epoch, pre-update batches
};

inline TrainResult train_gnn(const EntityPropertyGraph& g, const GnnConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<int, int>> positives;
  for (int i = 0; i < g.n_entities(); ++i) {
    for (int j : g.entity_props[static_cast<std::size_t>(i)]) positives.emplace_back(i, j);
  }
  if (positives.empty()) throw DataError("train_gnn: graph has no entity-property edges");

  // per-entity pool of unused properties for negative sampling
  std::vector<std::vector<int>> unused(static_cast<std::size_t>(g.n_entities()));
  for (int i = 0; i < g.n_entities(); ++i) {
    const auto& used = g.entity_props[static_cast<std::size_t>(i)];
    std::vector<char> mark(static_cast<std::size_t>(g.n_properties()), 0);
    for (int j : used) mark[static_cast<std::size_t>(j)] = 1;
    for (int j = 0; j < g.n_properties(); ++j) {
      if (!mark[static_cast<std::size_t>(j)]) unused[static_cast<std::size_t>(i)].push_back(j);
    }
  }

  Rng rng(cfg.seed);
  TrainResult result;
  result.params = init_params(g.n_entities(), g.n_properties(), cfg, rng);
  AdamState adam = AdamState::for_params(result.params);

  std::size_t n_pos = positives.size();
  std::size_t batches_per_epoch =
      (n_pos + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
  double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>(batches_per_epoch);
  long step = 0;

  std::vector<std::size_t> order(n_pos);
  for (std::size_t i = 0; i < n_pos; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_pos; start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t stop = std::min(n_pos, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<TrainExample> batch;
      batch.reserve((stop - start) * static_cast<std::size_t>(1 + cfg.negatives_per_positive));
      for (std::size_t idx = start; idx < stop; ++idx) {
        auto [i, j] = positives[order[idx]];
        batch.push_back({i, j, 1.0});
        const auto& pool = unused[static_cast<std::size_t>(i)];
        if (pool.empty()) continue;  // entity uses every property
        for (int neg = 0; neg < cfg.negatives_per_positive; ++neg) {
          batch.push_back({i, pool[rng.below(pool.size())], 0.0});
        }
      }
      double loss = 0.0;
      GnnParams grad = batch_gradient(g, result.params, cfg, batch, &loss);
      double lr = std::max(cfg.learning_rate * (1.0 - static_cast<double>(step) / total_steps),
                           cfg.lr_floor);
      adam_step(result.params, grad, adam, lr);
      ++step;
      epoch_loss += loss;
    }
    result.epoch_losses.push_back(epoch_loss);
  }
  return result;
}

// ---- ranking

struct ScoredProperty {
  std::string property;
  double score = 0.0;
};

// Scores every property not already used by the entity; descending score,
// ties broken by ascending property id. m < 0 means "all candidates".
inline std::vector<ScoredProperty> rank_properties(const EntityPropertyGraph& g,
                                                   const GnnParams& p, const GnnConfig& cfg,
                                                   const std::string& entity, int m = -1) {
  int ei = g.require_entity(entity);
  std::vector<char> used(static_cast<std::size_t>(g.n_properties()), 0);
  for (int j : g.entity_props[static_cast<std::size_t>(ei)]) used[static_cast<std::size_t>(j)] = 1;

  ForwardTrace et = forward_node(g, p, cfg, true, ei);
  std::vector<ScoredProperty> out;
  for (int j = 0; j < g.n_properties(); ++j) {
    if (used[static_cast<std::size_t>(j)]) continue;
    ForwardTrace pt = forward_node(g, p, cfg, false, j);
    out.push_back({g.property_ids[static_cast<std::size_t>(j)], mlp_forward(p, et.h, pt.h).y});
  }
  std::sort(out.begin(), out.end(), [](const ScoredProperty& a, const ScoredProperty& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.property < b.property;
  });
  if (m >= 0 && out.size() > static_cast<std::size_t>(m)) out.resize(static_cast<std::size_t>(m));
  return out;
}

// ---- checkpointing

inline nlohmann::ordered_json config_to_json(const GnnConfig& cfg) {
  nlohmann::ordered_json j;
  j["d1"] = cfg.d1;
  j["d2"] = cfg.d2;
  j["mlp_layers"] = cfg.mlp_layers;
  j["k"] = cfg.k;
  j["learning_rate"] = cfg.learning_rate;
  j["lr_floor"] = cfg.lr_floor;
  j["negatives_per_positive"] = cfg.negatives_per_positive;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["attention_enabled"] = cfg.attention_enabled;
  j["per_role_attention"] = cfg.per_role_attention;
  return j;
}

inline GnnConfig config_from_json(const nlohmann::json& j) {
  GnnConfig cfg;
  try {
    cfg.d1 = j.at("d1").get<int>();
    cfg.d2 = j.at("d2").get<int>();
    cfg.mlp_layers = j.at("mlp_layers").get<int>();
    cfg.k = j.at("k").get<int>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.lr_floor = j.at("lr_floor").get<double>();
    cfg.negatives_per_positive = j.at("negatives_per_positive").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.attention_enabled = j.at("attention_enabled").get<bool>();
    cfg.per_role_attention = j.at("per_role_attention").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("gnn config: ") + e.what());
  }
  return cfg;
}

struct Checkpoint {
  GnnConfig config;
  std::vector<std::string> entities;
  std::vector<std::string> properties;
  GnnParams params;
};

inline void save_checkpoint(const GnnParams& params, const GnnConfig& cfg,
                            const EntityPropertyGraph& g, const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "gnn-checkpoint";
  j["version"] = 1;
  j["config"] = config_to_json(cfg);
  j["entities"] = g.entity_ids;
  j["properties"] = g.property_ids;
  nlohmann::ordered_json tensors;
  for_each_tensor(const_cast<GnnParams&>(params),
                  [&](const std::string& name, Vec& v) { tensors[name] = v; });
  j["tensors"] = tensors;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.value("format", "") != "gnn-checkpoint") {
    throw ParseError(path + ": not a gnn-checkpoint document");
  }
  if (j.value("version", 0) != 1) throw ParseError(path + ": unsupported version");
  Checkpoint ck;
  ck.config = config_from_json(j.at("config"));
  try {
    ck.entities = j.at("entities").get<std::vector<std::string>>();
    ck.properties = j.at("properties").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  ck.params = make_params(static_cast<int>(ck.entities.size()),
                          static_cast<int>(ck.properties.size()), ck.config);
  const auto& tensors = j.at("tensors");
  for_each_tensor(ck.params, [&](const std::string& name, Vec& v) {
    if (!tensors.contains(name)) throw ParseError(path + ": missing tensor '" + name + "'");
    Vec loaded = tensors.at(name).get<Vec>();
    if (loaded.size() != v.size()) {
      throw ParseError(path + ": tensor '" + name + "' has wrong size");
    }
    v = std::move(loaded);
  });
  return ck;
}

}  // namespace kbe
