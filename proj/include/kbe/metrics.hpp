// Ranking metrics (precision@m, binary-relevance NDCG, AP/MAP), set-based
// fact precision/recall/F1, and the class-popularity ranking baseline.
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

inline double precision_at_m(const std::vector<std::string>& ranked,
                             const std::set<std::string>& relevant, int m) {
  if (m < 1) throw ConfigError("precision_at_m: m must be >= 1");
  int hits = 0;
  std::size_t top = std::min(ranked.size(), static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < top; ++i) {
    if (relevant.count(ranked[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

// Binary relevance, gain 1/log2(rank+1), ideal DCG over min(m, |relevant|).
inline double ndcg_at_m(const std::vector<std::string>& ranked,
                        const std::set<std::string>& relevant, int m) {
  if (m < 1) throw ConfigError("ndcg_at_m: m must be >= 1");
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  std::size_t top = std::min(ranked.size(), static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < top; ++i) {
    if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  std::size_t ideal = std::min(static_cast<std::size_t>(m), relevant.size());
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

inline double average_precision(const std::vector<std::string>& ranked,
                                const std::set<std::string>& relevant) {
  if (relevant.empty()) return 0.0;
  int hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (relevant.count(ranked[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

struct RankingCase {
  std::vector<std::string> ranked;
  std::set<std::string> relevant;
};

inline double mean_average_precision(const std::vector<RankingCase>& cases) {
  if (cases.empty()) return 0.0;
  double sum = 0.0;
  for (const RankingCase& c : cases) sum += average_precision(c.ranked, c.relevant);
  return sum / static_cast<double>(cases.size());
}

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Set-based over (entity, property, value) keys; empty denominators yield 0.
inline Prf fact_prf(const std::vector<Fact>& predicted, const std::vector<Fact>& gold) {
  std::set<Fact> p(predicted.begin(), predicted.end());
  std::set<Fact> g(gold.begin(), gold.end());
  std::size_t tp = 0;
  for (const Fact& f : p) {
    if (g.count(f)) ++tp;
  }
  Prf out;
  if (!p.empty()) out.precision = static_cast<double>(tp) / static_cast<double>(p.size());
  if (!g.empty()) out.recall = static_cast<double>(tp) / static_cast<double>(g.size());
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

// Class-global property ranking by number of class members using each
// property; identical for every entity of the class apart from the candidate
// filter (the entity's own properties are excluded). Ties by property id.
inline std::vector<std::string> popularity_baseline(const KnowledgeBase& kb,
                                                    const std::string& class_id,
                                                    const std::string& entity, int m = -1) {
  std::vector<std::string> members = kb.members_of_class(class_id);
  if (members.empty()) throw DataError("popularity_baseline: class '" + class_id + "' is empty");
  std::map<std::string, int> usage;
  for (const std::string& p : kb.properties()) usage[p] = 0;
  for (const std::string& e : members) {
    for (const std::string& p : kb.properties_of(e)) ++usage[p];
  }
  const auto& used = kb.properties_of(entity);
  std::vector<std::pair<std::string, int>> candidates;
  for (const auto& [p, count] : usage) {
    if (!used.count(p)) candidates.emplace_back(p, count);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (const auto& [p, count] : candidates) out.push_back(p);
  if (m >= 0 && out.size() > static_cast<std::size_t>(m)) out.resize(static_cast<std::size_t>(m));
  return out;
}

}  // namespace kbe
