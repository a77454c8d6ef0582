// Simulated claim world: a seeded generator producing sources with power-law
// claim counts and noisy observations around planted truths, plus the
// extractor seam real web extraction would plug into.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbe/errors.hpp"
#include "kbe/kb.hpp"
#include "kbe/rng.hpp"

namespace kbe {

struct Source {
  std::string id;
  std::string source_type;     // vertical | text | structured
  double true_error_variance = 0.0;  // generation-side, hidden from inference
  int claim_target = 0;
};

struct Claim {
  Fact fact;
  std::string source;
  double observation = 0.0;

  friend bool operator<(const Claim& a, const Claim& b) {
    if (!(a.fact == b.fact)) return a.fact < b.fact;
    if (a.source != b.source) return a.source < b.source;
    return a.observation < b.observation;
  }
  friend bool operator==(const Claim& a, const Claim& b) {
    return a.fact == b.fact && a.source == b.source && a.observation == b.observation;
  }
};

struct WorldConfig {
  int n_facts = 200;
  int n_sources = 50;
  double powerlaw_exponent = 2.0;
  double variance_min = 0.01;
  double variance_max = 0.25;
  double truth_prior = 0.5;
  double prior_fraction = 0.1;  // share of facts marked as prior truths
  int values_per_slot = 2;      // candidate values per (entity, property) slot
  int properties_per_entity = 4;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_facts < 1) throw ConfigError("world: n_facts must be >= 1");
    if (n_sources < 1) throw ConfigError("world: n_sources must be >= 1");
    if (powerlaw_exponent <= 1.0) throw ConfigError("world: powerlaw_exponent must be > 1");
    if (!(variance_min > 0.0 && variance_min <= variance_max && variance_max <= 1.0)) {
      throw ConfigError("world: variance range must satisfy 0 < min <= max <= 1");
    }
    if (truth_prior < 0.0 || truth_prior > 1.0) {
      throw ConfigError("world: truth_prior must lie in [0, 1]");
    }
    if (prior_fraction < 0.0 || prior_fraction > 1.0) {
      throw ConfigError("world: prior_fraction must lie in [0, 1]");
    }
    if (values_per_slot < 1) throw ConfigError("world: values_per_slot must be >= 1");
    if (properties_per_entity < 1) throw ConfigError("world: properties_per_entity must be >= 1");
  }
};

struct World {
  std::vector<Fact> facts;
  std::vector<char> truth;  // planted z* per fact
  std::vector<Source> sources;
  std::vector<Claim> claims;
  std::vector<Fact> prior_truths;  // subset of true facts
};

namespace detail {

// Draws from P(k) proportional to k^-a on {1..n} by inverting a precomputed CDF.
class TruncatedZeta {
 public:
  TruncatedZeta(double exponent, int n) : cdf_(static_cast<std::size_t>(n)) {
    double total = 0.0;
    for (int k = 1; k <= n; ++k) {
      total += std::pow(static_cast<double>(k), -exponent);
      cdf_[static_cast<std::size_t>(k - 1)] = total;
    }
    for (double& c : cdf_) c /= total;
  }

  int draw(Rng& rng) const {
    double u = rng.uniform01();
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(it - cdf_.begin()) + 1;
  }

 private:
  std::vector<double> cdf_;
};

inline std::string padded(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

inline int digits_for(int n) {
  int width = 1;
  while (n >= 10) {
    n /= 10;
    ++width;
  }
  return width;
}

}  // namespace detail

inline const char* source_type_for(int index) {
  switch (index % 3) {
    case 0: return "vertical";
    case 1: return "text";
    default: return "structured";
  }
}

// Sources, claims and prior-truth marks for an externally supplied fact list
// with planted truth flags. This is the shared core of generate_world and the
// protocol's verification stage.
inline World generate_world_for_facts(std::vector<Fact> facts, std::vector<char> truth,
                                      const WorldConfig& cfg) {
  cfg.validate();
  if (facts.size() != truth.size()) {
    throw ConfigError("generate_world_for_facts: facts/truth size mismatch");
  }
  if (facts.empty()) throw ConfigError("generate_world_for_facts: no facts");

  World w;
  w.facts = std::move(facts);
  w.truth = std::move(truth);
  int n_facts = static_cast<int>(w.facts.size());

  Rng rng(cfg.seed);
  detail::TruncatedZeta zeta(cfg.powerlaw_exponent, n_facts);
  int src_width = detail::digits_for(cfg.n_sources - 1);

  for (int s = 0; s < cfg.n_sources; ++s) {
    Source src;
    src.id = "s" + detail::padded(s, src_width);
    src.source_type = source_type_for(s);
    src.true_error_variance = rng.uniform(cfg.variance_min, cfg.variance_max);
    src.claim_target = zeta.draw(rng);
    double sd = std::sqrt(src.true_error_variance);
    for (int fi : rng.sample_without_replacement(n_facts, src.claim_target)) {
      double base = w.truth[static_cast<std::size_t>(fi)] ? 1.0 : 0.0;
      double obs = std::clamp(base + rng.normal(0.0, sd), 0.0, 1.0);
      w.claims.push_back({w.facts[static_cast<std::size_t>(fi)], src.id, obs});
    }
    w.sources.push_back(std::move(src));
  }

  std::vector<int> true_idx;
  for (int i = 0; i < n_facts; ++i) {
    if (w.truth[static_cast<std::size_t>(i)]) true_idx.push_back(i);
  }
  int want = static_cast<int>(std::lround(cfg.prior_fraction * n_facts));
  int n_priors = std::min<int>(want, static_cast<int>(true_idx.size()));
  if (n_priors > 0) {
    for (int pick : rng.sample_without_replacement(static_cast<int>(true_idx.size()), n_priors)) {
      w.prior_truths.push_back(w.facts[static_cast<std::size_t>(true_idx[static_cast<std::size_t>(pick)])]);
    }
    std::sort(w.prior_truths.begin(), w.prior_truths.end());
  }
  return w;
}

// Fully synthetic world: facts come in (entity, property) slots with
// values_per_slot conflicting candidate values; each fact's truth is an
// independent Bernoulli(truth_prior) draw.
inline World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  int n_slots = (cfg.n_facts + cfg.values_per_slot - 1) / cfg.values_per_slot;
  int n_entities = (n_slots + cfg.properties_per_entity - 1) / cfg.properties_per_entity;
  int ent_width = detail::digits_for(std::max(n_entities - 1, 0));
  int prop_width = detail::digits_for(cfg.properties_per_entity - 1);

  std::vector<Fact> facts;
  facts.reserve(static_cast<std::size_t>(cfg.n_facts));
  for (int i = 0; i < cfg.n_facts; ++i) {
    int slot = i / cfg.values_per_slot;
    int alt = i % cfg.values_per_slot;
    std::string entity = "e" + detail::padded(slot / cfg.properties_per_entity, ent_width);
    std::string property = "p" + detail::padded(slot % cfg.properties_per_entity, prop_width);
    facts.push_back(make_fact(entity, property, ValueKind::Literal, "v" + std::to_string(alt)));
  }

  Rng rng(derive_seed(cfg.seed, "planted"));
  std::vector<char> truth(facts.size(), 0);
  for (std::size_t i = 0; i < facts.size(); ++i) {
    truth[i] = rng.uniform01() < cfg.truth_prior ? 1 : 0;
  }
  return generate_world_for_facts(std::move(facts), std::move(truth), cfg);
}

// One claim per (fact, source); colliding observations combined by max.
inline std::vector<Claim> merge_claims(const std::vector<std::vector<Claim>>& lists) {
  std::map<std::pair<Fact, std::string>, double> best;
  for (const auto& list : lists) {
    for (const Claim& c : list) {
      auto key = std::make_pair(c.fact, c.source);
      auto it = best.find(key);
      if (it == best.end()) {
        best.emplace(key, c.observation);
      } else {
        it->second = std::max(it->second, c.observation);
      }
    }
  }
  std::vector<Claim> out;
  out.reserve(best.size());
  for (const auto& [key, obs] : best) out.push_back({key.first, key.second, obs});
  return out;
}

// Seam for value extraction. A real deployment would implement this against
// vertical sites, free text and structured dumps; tests and the CLI use the
// simulated one below.
class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual std::string source_type() const = 0;
  virtual std::vector<Claim> extract(const std::string& entity,
                                     const std::string& property) const = 0;
};

class SimulatedExtractor : public Extractor {
 public:
  SimulatedExtractor(const std::vector<Claim>& claims, std::string source_type)
      : type_(std::move(source_type)) {
    for (const Claim& c : claims) {
      by_slot_[{c.fact.subject, c.fact.property}].push_back(c);
    }
    for (auto& [slot, list] : by_slot_) std::sort(list.begin(), list.end());
  }

  // Keeps only claims from sources of this extractor's type.
  static SimulatedExtractor for_type(const World& world, const std::string& type) {
    std::map<std::string, const Source*> by_id;
    for (const Source& s : world.sources) by_id[s.id] = &s;
    std::vector<Claim> kept;
    for (const Claim& c : world.claims) {
      auto it = by_id.find(c.source);
      if (it != by_id.end() && it->second->source_type == type) kept.push_back(c);
    }
    return SimulatedExtractor(kept, type);
  }

  std::string source_type() const override { return type_; }

  std::vector<Claim> extract(const std::string& entity,
                             const std::string& property) const override {
    auto it = by_slot_.find({entity, property});
    if (it == by_slot_.end()) return {};
    return it->second;
  }

 private:
  std::string type_;
  std::map<std::pair<std::string, std::string>, std::vector<Claim>> by_slot_;
};

// ---- persistence: claims as JSON lines, planted truths separately so
// inference can't see them.

inline void save_claims_jsonl(const std::vector<Claim>& claims, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const Claim& c : claims) {
    nlohmann::ordered_json j;
    j["entity"] = c.fact.subject;
    j["property"] = c.fact.property;
    j["value"] = c.fact.object.text;
    j["kind"] = to_string(c.fact.object.kind);
    j["source"] = c.source;
    j["observation"] = c.observation;
    out << j.dump() << '\n';
  }
}

inline std::vector<Claim> load_claims_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Claim> claims;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    try {
      Claim c;
      c.fact = make_fact(j.at("entity").get<std::string>(), j.at("property").get<std::string>(),
                         value_kind_from_string(j.at("kind").get<std::string>()),
                         j.at("value").get<std::string>());
      c.source = j.at("source").get<std::string>();
      c.observation = j.at("observation").get<double>();
      if (c.observation < 0.0 || c.observation > 1.0) {
        throw ParseError(where + ": observation outside [0, 1]");
      }
      claims.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return claims;
}

struct PlantedFact {
  Fact fact;
  bool truth = false;
  bool prior = false;
};

inline void save_truths_jsonl(const World& w, const std::string& path) {
  std::set<Fact> priors(w.prior_truths.begin(), w.prior_truths.end());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (std::size_t i = 0; i < w.facts.size(); ++i) {
    const Fact& f = w.facts[i];
    nlohmann::ordered_json j;
    j["entity"] = f.subject;
    j["property"] = f.property;
    j["value"] = f.object.text;
    j["kind"] = to_string(f.object.kind);
    j["truth"] = static_cast<bool>(w.truth[i]);
    j["prior"] = priors.count(f) > 0;
    out << j.dump() << '\n';
  }
}

inline std::vector<PlantedFact> load_truths_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<PlantedFact> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    try {
      PlantedFact pf;
      pf.fact = make_fact(j.at("entity").get<std::string>(), j.at("property").get<std::string>(),
                          value_kind_from_string(j.at("kind").get<std::string>()),
                          j.at("value").get<std::string>());
      pf.truth = j.at("truth").get<bool>();
      pf.prior = j.at("prior").get<bool>();
      out.push_back(std::move(pf));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kbe
