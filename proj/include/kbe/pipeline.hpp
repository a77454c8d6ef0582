// Orchestration: key=value config file, end-to-end entity enrichment
// (predict properties -> gather claims -> verify), and KB write-back with an
// audit log.
#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbe/ep_graph.hpp"
#include "kbe/errors.hpp"
#include "kbe/gnn.hpp"
#include "kbe/kb.hpp"
#include "kbe/protocol.hpp"
#include "kbe/source_sim.hpp"
#include "kbe/truth_infer.hpp"

namespace kbe {

// ---- config file: one `section.key = value` per line, '#' comments.

class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    ConfigMap cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
      }
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
      }
      cfg.values_[key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + it->second + "'");
    }
  }

  int get_int(const std::string& key, int fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    try {
      std::size_t pos = 0;
      long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return static_cast<int>(v);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected an integer, got '" + it->second + "'");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    try {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" +
                        it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + it->second + "'");
  }

  // Typo guard: every key in the file must have been consumed by a getter.
  void reject_unknown_keys() const {
    std::vector<std::string> unknown;
    for (const auto& [key, value] : values_) {
      if (!used_.count(key)) unknown.push_back(key);
    }
    if (!unknown.empty()) {
      std::string msg = "unknown config key(s):";
      for (const std::string& k : unknown) msg += " " + k;
      throw ConfigError(msg);
    }
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

struct PipelineConfig {
  std::string kb_path;
  std::string kb_format = "tsv";
  std::string graph_path;
  std::string checkpoint_path;
  std::string claims_path;
  std::string truths_path;
  std::string output_dir = ".";
  std::string report_path;
  int predict_m = 10;
  std::uint64_t seed = 1;

  SimilarityWeights weights;
  bool symmetrize_ee = false;
  GnnConfig gnn = protocol_gnn_defaults();
  TruthConfig truth;
  WorldConfig world;
  SynthKbConfig synth;
  ProtocolConfig protocol;
  bool eval_synthetic = true;  // eval run: generate the synthetic KB if no kb_path
};

inline PipelineConfig load_pipeline_config(const std::string& path) {
  ConfigMap m = ConfigMap::parse_file(path);
  PipelineConfig c;
  c.kb_path = m.get_string("paths.kb", "");
  c.kb_format = m.get_string("paths.kb_format", c.kb_format);
  c.graph_path = m.get_string("paths.graph", "");
  c.checkpoint_path = m.get_string("paths.checkpoint", "");
  c.claims_path = m.get_string("paths.claims", "");
  c.truths_path = m.get_string("paths.truths", "");
  c.output_dir = m.get_string("paths.output_dir", c.output_dir);
  c.report_path = m.get_string("paths.report", "");
  c.predict_m = m.get_int("pipeline.m", c.predict_m);
  c.seed = m.get_u64("pipeline.seed", c.seed);

  c.weights.alpha1 = m.get_double("weights.alpha1", c.weights.alpha1);
  c.weights.alpha2 = m.get_double("weights.alpha2", c.weights.alpha2);
  c.weights.alpha3 = m.get_double("weights.alpha3", c.weights.alpha3);
  c.symmetrize_ee = m.get_bool("graph.symmetrize_ee", c.symmetrize_ee);

  c.gnn.d1 = m.get_int("gnn.d1", c.gnn.d1);
  c.gnn.d2 = m.get_int("gnn.d2", c.gnn.d2);
  c.gnn.mlp_layers = m.get_int("gnn.mlp_layers", c.gnn.mlp_layers);
  c.gnn.k = m.get_int("gnn.k", c.gnn.k);
  c.gnn.learning_rate = m.get_double("gnn.learning_rate", c.gnn.learning_rate);
  c.gnn.lr_floor = m.get_double("gnn.lr_floor", c.gnn.lr_floor);
  c.gnn.negatives_per_positive =
      m.get_int("gnn.negatives_per_positive", c.gnn.negatives_per_positive);
  c.gnn.batch_size = m.get_int("gnn.batch_size", c.gnn.batch_size);
  c.gnn.epochs = m.get_int("gnn.epochs", c.gnn.epochs);
  c.gnn.attention_enabled = m.get_bool("gnn.attention", c.gnn.attention_enabled);
  c.gnn.per_role_attention = m.get_bool("gnn.per_role_attention", c.gnn.per_role_attention);
  c.gnn.seed = m.get_u64("gnn.seed", derive_seed(c.seed, "gnn"));

  c.truth.beta1 = m.get_double("truth.beta1", c.truth.beta1);
  c.truth.beta0 = m.get_double("truth.beta0", c.truth.beta0);
  c.truth.significance = m.get_double("truth.significance", c.truth.significance);
  c.truth.epsilon = m.get_double("truth.epsilon", c.truth.epsilon);
  c.truth.use_ci_estimator = m.get_bool("truth.use_ci_estimator", c.truth.use_ci_estimator);
  c.truth.use_prior_truths = m.get_bool("truth.use_prior_truths", c.truth.use_prior_truths);
  c.truth.refine_rounds = m.get_int("truth.refine_rounds", c.truth.refine_rounds);
  c.truth.max_iterations = m.get_int("truth.max_iterations", c.truth.max_iterations);
  c.truth.grad_tolerance = m.get_double("truth.grad_tolerance", c.truth.grad_tolerance);
  c.truth.multi_value_threshold =
      m.get_double("truth.multi_value_threshold", c.truth.multi_value_threshold);

  c.world.n_facts = m.get_int("world.n_facts", c.world.n_facts);
  c.world.n_sources = m.get_int("world.n_sources", c.world.n_sources);
  c.world.powerlaw_exponent = m.get_double("world.powerlaw_exponent", c.world.powerlaw_exponent);
  c.world.variance_min = m.get_double("world.variance_min", c.world.variance_min);
  c.world.variance_max = m.get_double("world.variance_max", c.world.variance_max);
  c.world.truth_prior = m.get_double("world.truth_prior", c.world.truth_prior);
  c.world.prior_fraction = m.get_double("world.prior_fraction", c.world.prior_fraction);
  c.world.values_per_slot = m.get_int("world.values_per_slot", c.world.values_per_slot);
  c.world.properties_per_entity =
      m.get_int("world.properties_per_entity", c.world.properties_per_entity);
  c.world.seed = m.get_u64("world.seed", derive_seed(c.seed, "world"));

  c.synth.n_classes = m.get_int("synth.n_classes", c.synth.n_classes);
  c.synth.entities_per_class = m.get_int("synth.entities_per_class", c.synth.entities_per_class);
  c.synth.n_properties = m.get_int("synth.n_properties", c.synth.n_properties);
  c.synth.common_properties = m.get_int("synth.common_properties", c.synth.common_properties);
  c.synth.profile_properties = m.get_int("synth.profile_properties", c.synth.profile_properties);
  c.synth.shared_profile = m.get_int("synth.shared_profile", c.synth.shared_profile);
  c.synth.subgroups = m.get_int("synth.subgroups", c.synth.subgroups);
  c.synth.seed = m.get_u64("synth.seed", derive_seed(c.seed, "synth"));

  c.protocol.n_train = m.get_int("protocol.n_train", c.protocol.n_train);
  c.protocol.n_val = m.get_int("protocol.n_val", c.protocol.n_val);
  c.protocol.n_test = m.get_int("protocol.n_test", c.protocol.n_test);
  c.protocol.distractors_per_fact =
      m.get_int("protocol.distractors_per_fact", c.protocol.distractors_per_fact);
  c.protocol.run_verification =
      m.get_bool("protocol.run_verification", c.protocol.run_verification);
  c.eval_synthetic = m.get_bool("protocol.synthetic_kb", c.eval_synthetic);

  m.reject_unknown_keys();

  c.weights.validate();
  c.gnn.validate();
  c.truth.validate();
  c.world.validate();
  if (c.predict_m < 1) throw ConfigError("pipeline.m must be >= 1");

  c.protocol.weights = c.weights;
  c.protocol.symmetrize_ee = c.symmetrize_ee;
  c.protocol.gnn = c.gnn;
  c.protocol.truth = c.truth;
  c.protocol.world = c.world;
  c.protocol.seed = c.seed;
  return c;
}

// ---- enrichment

struct PropertyDiagnostics {
  std::string property;
  double score = 0.0;
  int claim_count = 0;
};

struct EnrichedFact {
  Fact fact;
  double z = 0.0;
  bool label = false;
  std::vector<std::string> sources;
};

struct EnrichmentResult {
  std::string entity;
  std::vector<PropertyDiagnostics> predicted;
  std::vector<EnrichedFact> facts;
  bool verifier_converged = true;
};

// Predict m properties for the entity, pull claims for each (entity,
// property) through the extractors, verify, and return every claimed fact
// with its inferred truth. No claims at all -> empty result with diagnostics.
inline EnrichmentResult enrich(const KnowledgeBase& kb, const EntityPropertyGraph& graph,
                               const GnnParams& params, const GnnConfig& gcfg,
                               const std::vector<const Extractor*>& extractors,
                               const TruthConfig& tcfg, const std::string& entity, int m) {
  if (m < 1) throw ConfigError("enrich: m must be >= 1");
  EnrichmentResult result;
  result.entity = entity;

  std::vector<ScoredProperty> ranked = rank_properties(graph, params, gcfg, entity, m);
  std::vector<std::vector<Claim>> gathered;
  for (const ScoredProperty& sp : ranked) {
    PropertyDiagnostics diag;
    diag.property = sp.property;
    diag.score = sp.score;
    for (const Extractor* ex : extractors) {
      std::vector<Claim> claims = ex->extract(entity, sp.property);
      diag.claim_count += static_cast<int>(claims.size());
      gathered.push_back(std::move(claims));
    }
    result.predicted.push_back(diag);
  }
  std::vector<Claim> claims = merge_claims(gathered);
  if (claims.empty()) return result;

  // facts already present in the KB act as prior truths
  std::vector<Fact> priors;
  std::set<std::string> claimed_props;
  for (const Claim& c : claims) {
    if (kb.contains(c.fact)) priors.push_back(c.fact);
    claimed_props.insert(c.fact.property);
  }
  std::sort(priors.begin(), priors.end());
  priors.erase(std::unique(priors.begin(), priors.end()), priors.end());

  std::vector<std::string> popular;
  for (const std::string& e : kb.entities()) {
    if (!kb.is_long_tail(e)) popular.push_back(e);
  }
  std::map<std::string, Cardinality> cardinality;
  for (const std::string& p : claimed_props) {
    cardinality[p] = predict_cardinality(kb, p, popular, tcfg.multi_value_threshold);
  }

  VerifyOutcome vo = verify_claims(claims, priors, cardinality, tcfg);
  result.verifier_converged = vo.assignment.converged;
  for (std::size_t i = 0; i < vo.assignment.facts.size(); ++i) {
    EnrichedFact ef;
    ef.fact = vo.assignment.facts[i];
    ef.z = vo.assignment.z[i];
    ef.label = vo.assignment.labels[i] != 0;
    ef.sources = vo.assignment.sources[i];
    result.facts.push_back(std::move(ef));
  }
  return result;
}

// ---- write-back

struct AuditEntry {
  std::string action;  // added | skipped-duplicate | new-entity | untyped-entity
  Fact fact;
  double z = 0.0;
  std::vector<std::string> sources;
  std::string note;
};

struct WriteBackResult {
  int added = 0;
  int skipped = 0;
  std::vector<AuditEntry> log;
};

// Inserts true-labeled facts. Relation values resolve to existing entities by
// exact id, then by unique name-property literal; otherwise a new entity is
// created, typed by the relation's declared range when available.
inline WriteBackResult write_back(KnowledgeBase& kb, const EnrichmentResult& enrichment) {
  // name -> entities carrying it, for relation-value resolution
  std::map<std::string, std::vector<std::string>> by_name;
  for (const Fact& f : kb.facts()) {
    if (f.property == kNameProperty && f.object.kind == ValueKind::Literal) {
      by_name[f.object.text].push_back(f.subject);
    }
  }
  // property -> declared range class
  std::map<std::string, std::string> range_of;
  for (const Fact& f : kb.facts()) {
    if (f.property == kRangeProperty && f.object.kind == ValueKind::Class) {
      range_of[f.subject] = f.object.text;
    }
  }

  WriteBackResult result;
  for (const EnrichedFact& ef : enrichment.facts) {
    if (!ef.label) continue;
    Fact fact = ef.fact;
    std::string note;

    if (fact.object.kind == ValueKind::Entity && !kb.has_entity(fact.object.text)) {
      auto named = by_name.find(fact.object.text);
      if (named != by_name.end() && named->second.size() == 1) {
        note = "resolved by name to " + named->second.front();
        fact.object.text = named->second.front();
      } else {
        if (named != by_name.end()) note = "ambiguous name, created new entity";
        std::string new_id = fact.object.text;
        auto range = range_of.find(fact.property);
        if (range != range_of.end()) {
          Fact type_fact = make_fact(new_id, kTypeProperty, ValueKind::Class, range->second);
          if (kb.add_fact(type_fact)) {
            result.log.push_back({"new-entity", type_fact, ef.z, ef.sources,
                                  "typed by range of " + fact.property});
            ++result.added;
          }
        } else {
          result.log.push_back({"untyped-entity",
                                make_fact(new_id, kTypeProperty, ValueKind::Class, ""), ef.z,
                                ef.sources, "no declared range for " + fact.property});
        }
      }
    }

    if (kb.add_fact(fact)) {
      result.log.push_back({"added", fact, ef.z, ef.sources, note});
      ++result.added;
    } else {
      result.log.push_back({"skipped-duplicate", fact, ef.z, ef.sources, note});
      ++result.skipped;
    }
  }
  return result;
}

inline nlohmann::ordered_json enrichment_to_json(const EnrichmentResult& r) {
  nlohmann::ordered_json j;
  j["format"] = "enrichment";
  j["version"] = 1;
  j["entity"] = r.entity;
  j["verifier_converged"] = r.verifier_converged;
  j["predicted"] = nlohmann::ordered_json::array();
  for (const PropertyDiagnostics& d : r.predicted) {
    nlohmann::ordered_json row;
    row["property"] = d.property;
    row["score"] = d.score;
    row["claims"] = d.claim_count;
    j["predicted"].push_back(row);
  }
  j["facts"] = nlohmann::ordered_json::array();
  for (const EnrichedFact& ef : r.facts) {
    nlohmann::ordered_json row;
    row["entity"] = ef.fact.subject;
    row["property"] = ef.fact.property;
    row["value"] = ef.fact.object.text;
    row["kind"] = to_string(ef.fact.object.kind);
    row["z"] = ef.z;
    row["label"] = ef.label;
    row["sources"] = ef.sources;
    j["facts"].push_back(row);
  }
  return j;
}

inline nlohmann::ordered_json audit_to_json(const WriteBackResult& r) {
  nlohmann::ordered_json j;
  j["format"] = "writeback-audit";
  j["version"] = 1;
  j["added"] = r.added;
  j["skipped"] = r.skipped;
  j["entries"] = nlohmann::ordered_json::array();
  for (const AuditEntry& e : r.log) {
    nlohmann::ordered_json row;
    row["action"] = e.action;
    row["entity"] = e.fact.subject;
    row["property"] = e.fact.property;
    row["value"] = e.fact.object.text;
    row["kind"] = to_string(e.fact.object.kind);
    row["z"] = e.z;
    row["sources"] = e.sources;
    row["note"] = e.note;
    j["entries"].push_back(row);
  }
  return j;
}

}  // namespace kbe
