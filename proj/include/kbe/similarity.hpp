// Entity similarity: type / property / value components combined by a convex
// weighting. Type weights and value information content are corpus-level
// statistics computed once per KB snapshot.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kbe/errors.hpp"
#include "kbe/kb.hpp"

namespace kbe {

struct SimilarityWeights {
  double alpha1 = 0.3;  // types
  double alpha2 = 0.3;  // properties
  double alpha3 = 0.4;  // values

  void validate() const {
    for (double a : {alpha1, alpha2, alpha3}) {
      if (a < 0.0 || a > 1.0) throw ConfigError("similarity weights must lie in [0, 1]");
    }
    if (std::fabs(alpha1 + alpha2 + alpha3 - 1.0) > 1e-9) {
      throw ConfigError("similarity weights must sum to 1");
    }
  }
};

struct CorpusStats {
  double entity_count = 0.0;
  std::map<std::string, double> type_weight;  // q_t = |E| / #entities typed t
  std::map<std::string, double> value_info;   // info(v) = log(|E| / #entities holding v)

  static CorpusStats compute(const KnowledgeBase& kb) {
    CorpusStats st;
    st.entity_count = static_cast<double>(kb.entities().size());
    std::map<std::string, int> type_counts, value_counts;
    for (const auto& [entity, types] : kb.type_index()) {
      for (const std::string& t : types) ++type_counts[t];
    }
    for (const auto& [entity, values] : kb.value_index()) {
      for (const std::string& v : values) ++value_counts[v];
    }
    for (const auto& [t, n] : type_counts) st.type_weight[t] = st.entity_count / n;
    for (const auto& [v, n] : value_counts) st.value_info[v] = std::log(st.entity_count / n);
    return st;
  }

  // Unseen types/values are treated as used by a single entity (most specific).
  double weight_of_type(const std::string& t) const {
    auto it = type_weight.find(t);
    return it == type_weight.end() ? entity_count : it->second;
  }
  double info_of_value(const std::string& v) const {
    auto it = value_info.find(v);
    return it == value_info.end() ? std::log(std::max(entity_count, 1.0)) : it->second;
  }
};

namespace detail {

inline void require_entity(const KnowledgeBase& kb, const std::string& e) {
  if (!kb.has_entity(e)) throw DataError("unknown entity '" + e + "'");
}

}  // namespace detail

// Weighted Dice overlap of type sets; 0 when either entity is untyped.
inline double type_similarity(const KnowledgeBase& kb, const CorpusStats& st,
                              const std::string& e1, const std::string& e2) {
  detail::require_entity(kb, e1);
  detail::require_entity(kb, e2);
  const auto& t1 = kb.types_of(e1);
  const auto& t2 = kb.types_of(e2);
  if (t1.empty() || t2.empty()) return 0.0;
  double shared = 0.0;
  for (const std::string& t : t1) {
    if (t2.count(t)) shared += st.weight_of_type(t);
  }
  double denom = 0.0;
  for (const std::string& t : t1) denom += st.weight_of_type(t);
  for (const std::string& t : t2) denom += st.weight_of_type(t);
  if (denom == 0.0) return 0.0;
  return 2.0 * shared / denom;
}

// Plain Dice overlap of distinct used-property sets.
inline double property_similarity(const KnowledgeBase& kb, const std::string& e1,
                                  const std::string& e2) {
  detail::require_entity(kb, e1);
  detail::require_entity(kb, e2);
  const auto& p1 = kb.properties_of(e1);
  const auto& p2 = kb.properties_of(e2);
  if (p1.empty() && p2.empty()) return 0.0;
  double shared = 0.0;
  for (const std::string& p : p1) {
    if (p2.count(p)) shared += 1.0;
  }
  return 2.0 * shared / (static_cast<double>(p1.size()) + static_cast<double>(p2.size()));
}

// Dice overlap of value sets weighted by information content.
inline double value_similarity(const KnowledgeBase& kb, const CorpusStats& st,
                               const std::string& e1, const std::string& e2) {
  detail::require_entity(kb, e1);
  detail::require_entity(kb, e2);
  const auto& v1 = kb.values_of(e1);
  const auto& v2 = kb.values_of(e2);
  if (v1.empty() || v2.empty()) return 0.0;
  double shared = 0.0;
  for (const std::string& v : v1) {
    if (v2.count(v)) shared += st.info_of_value(v);
  }
  double denom = 0.0;
  for (const std::string& v : v1) denom += st.info_of_value(v);
  for (const std::string& v : v2) denom += st.info_of_value(v);
  if (denom == 0.0) return 0.0;
  return 2.0 * shared / denom;
}

inline double overall_similarity(const SimilarityWeights& w, double s_type, double s_prop,
                                 double s_value) {
  w.validate();
  return w.alpha1 * s_type + w.alpha2 * s_prop + w.alpha3 * s_value;
}

inline double entity_similarity(const KnowledgeBase& kb, const CorpusStats& st,
                                const SimilarityWeights& w, const std::string& e1,
                                const std::string& e2) {
  return overall_similarity(w, type_similarity(kb, st, e1, e2),
                            property_similarity(kb, e1, e2),
                            value_similarity(kb, st, e1, e2));
}

// k most similar entities, descending score, ties broken by ascending id.
inline std::vector<std::pair<std::string, double>> top_k_neighbors(
    const KnowledgeBase& kb, const CorpusStats& st, const SimilarityWeights& w,
    const std::string& entity, int k) {
  if (k < 1) throw ConfigError("top_k_neighbors: k must be >= 1");
  detail::require_entity(kb, entity);
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(kb.entities().size());
  for (const std::string& other : kb.entities()) {
    if (other == entity) continue;
    scored.emplace_back(other, entity_similarity(kb, st, w, entity, other));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
  return scored;
}

}  // namespace kbe
