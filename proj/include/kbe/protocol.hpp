// Synthetic evaluation protocol: a class-correlated KB generator, the
// per-class leave-n-out split -> train -> rank -> verify loop, and a
// schema-versioned JSON report with per-class and averaged rows.
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbe/ep_graph.hpp"
#include "kbe/errors.hpp"
#include "kbe/gnn.hpp"
#include "kbe/kb.hpp"
#include "kbe/metrics.hpp"
#include "kbe/rng.hpp"
#include "kbe/source_sim.hpp"
#include "kbe/truth_infer.hpp"

namespace kbe {

struct SynthKbConfig {
  int n_classes = 5;
  int entities_per_class = 60;
  int n_properties = 30;
  int common_properties = 4;   // generic properties shared across classes
  int profile_properties = 9;  // width of each class's property footprint
  int shared_profile = 0;      // leading footprint properties used class-wide
  int subgroups = 2;           // latent subgroups splitting the rest of the footprint
  double common_use_prob = 0.9;
  double profile_use_prob = 0.95;
  double off_profile_use_prob = 0.04;
  double profile_value_prob = 0.95;  // group-typical value vs shared noise value
  int noise_value_pool = 3;
  std::uint64_t seed = 11;

  void validate() const {
    if (n_classes < 1) throw ConfigError("synth: n_classes must be >= 1");
    if (entities_per_class < 1) throw ConfigError("synth: entities_per_class must be >= 1");
    if (common_properties < 0 || profile_properties < 1) {
      throw ConfigError("synth: bad property block sizes");
    }
    if (shared_profile < 0 || shared_profile > profile_properties) {
      throw ConfigError("synth: shared_profile must lie in [0, profile_properties]");
    }
    if (subgroups < 1) throw ConfigError("synth: subgroups must be >= 1");
    if (n_properties < common_properties + profile_properties) {
      throw ConfigError("synth: n_properties too small for the profile blocks");
    }
    for (double p : {common_use_prob, profile_use_prob, off_profile_use_prob, profile_value_prob}) {
      if (p < 0.0 || p > 1.0) throw ConfigError("synth: probabilities must lie in [0, 1]");
    }
    if (noise_value_pool < 1) throw ConfigError("synth: noise_value_pool must be >= 1");
  }
};

inline std::vector<std::string> synth_class_ids(const SynthKbConfig& cfg) {
  std::vector<std::string> out;
  for (int c = 0; c < cfg.n_classes; ++c) out.push_back("c" + std::to_string(c));
  return out;
}

// Entities use a few generic properties, their class footprint, and rare
// off-profile noise. The footprint splits into a class-wide shared part and
// latent subgroups: subgroup membership shows up both in which footprint
// properties an entity uses and in the values it holds, so similarity-driven
// neighbours carry finer-than-class signal while a class-level usage count
// does not. Every entity keeps at least kLongTailMaxProperties + 1 distinct
// properties so leave-n-out always removes something.
inline KnowledgeBase make_class_correlated_kb(const SynthKbConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  KnowledgeBase kb;

  int prop_width = 1;
  for (int n = cfg.n_properties - 1; n >= 10; n /= 10) ++prop_width;
  auto prop_id = [&](int p) {
    std::string s = std::to_string(p);
    while (static_cast<int>(s.size()) < prop_width) s.insert(s.begin(), '0');
    return "p" + s;
  };
  int ent_width = 1;
  for (int n = cfg.entities_per_class - 1; n >= 10; n /= 10) ++ent_width;

  int spread = cfg.n_properties - cfg.common_properties;
  for (int c = 0; c < cfg.n_classes; ++c) {
    std::string class_id = "c" + std::to_string(c);
    std::vector<int> footprint;
    int start = (c * spread) / cfg.n_classes;
    for (int i = 0; i < cfg.profile_properties; ++i) {
      footprint.push_back(cfg.common_properties + (start + i) % spread);
    }
    for (int e = 0; e < cfg.entities_per_class; ++e) {
      std::string num = std::to_string(e);
      while (static_cast<int>(num.size()) < ent_width) num.insert(num.begin(), '0');
      std::string entity = class_id + "_e" + num;
      kb.add_fact(make_fact(entity, kTypeProperty, ValueKind::Class, class_id));

      int group = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.subgroups)));
      std::string group_tag = class_id + "g" + std::to_string(group);
      std::vector<int> profile;  // footprint properties this entity's group uses
      for (int i = 0; i < cfg.profile_properties; ++i) {
        if (i < cfg.shared_profile || (i - cfg.shared_profile) % cfg.subgroups == group) {
          profile.push_back(footprint[static_cast<std::size_t>(i)]);
        }
      }

      std::set<int> in_profile(profile.begin(), profile.end());
      std::set<int> chosen;
      for (int p = 0; p < cfg.n_properties; ++p) {
        double use_prob = p < cfg.common_properties ? cfg.common_use_prob
                          : in_profile.count(p)     ? cfg.profile_use_prob
                                                    : cfg.off_profile_use_prob;
        if (rng.uniform01() < use_prob) chosen.insert(p);
      }
      for (int p : profile) {
        if (static_cast<int>(chosen.size()) >= kLongTailMaxProperties + 1) break;
        chosen.insert(p);
      }
      for (int p : chosen) {
        std::string typical = p < cfg.common_properties ? class_id : group_tag;
        std::string value =
            rng.uniform01() < cfg.profile_value_prob
                ? prop_id(p) + "=" + typical
                : prop_id(p) + "=x" + std::to_string(rng.below_int(cfg.noise_value_pool));
        kb.add_fact(make_fact(entity, prop_id(p), ValueKind::Literal, value));
      }
    }
  }
  return kb;
}

// Predictor defaults sized for the synthetic benchmark: 60-entity classes
// want a narrow net, a strong step size and a neighbor pool covering most of
// a class; the wide library defaults train poorly at this scale.
inline GnnConfig protocol_gnn_defaults() {
  GnnConfig g;
  g.d1 = 4;
  g.d2 = 4;
  g.k = 40;
  g.learning_rate = 0.1;
  g.batch_size = 64;
  return g;
}

struct ProtocolConfig {
  int n_train = 40;
  int n_val = 5;
  int n_test = 15;
  int distractors_per_fact = 1;
  bool run_verification = true;
  bool symmetrize_ee = false;
  SimilarityWeights weights;
  GnnConfig gnn = protocol_gnn_defaults();
  TruthConfig truth;
  WorldConfig world;  // n_facts is overridden per class
  std::uint64_t seed = 123;
};

struct MethodRanking {
  double precision_at_5 = 0.0;
  double ndcg_at_5 = 0.0;
  double precision_at_10 = 0.0;
  double ndcg_at_10 = 0.0;
  double map = 0.0;
};

struct ClassOutcome {
  std::string class_id;
  int n_test = 0;
  MethodRanking gnn;
  MethodRanking popularity;
  bool verified = false;
  bool verify_converged = true;
  Prf verifier;
  Prf majority;
};

namespace detail {

inline nlohmann::ordered_json ranking_json(const MethodRanking& r) {
  nlohmann::ordered_json j;
  j["precision_at_5"] = r.precision_at_5;
  j["ndcg_at_5"] = r.ndcg_at_5;
  j["precision_at_10"] = r.precision_at_10;
  j["ndcg_at_10"] = r.ndcg_at_10;
  j["map"] = r.map;
  return j;
}

inline nlohmann::ordered_json prf_json(const Prf& p) {
  nlohmann::ordered_json j;
  j["precision"] = p.precision;
  j["recall"] = p.recall;
  j["f1"] = p.f1;
  return j;
}

}  // namespace detail

// Ranking + verification for one class; the building block of the report.
inline ClassOutcome run_protocol_class(const KnowledgeBase& kb, const std::string& class_id,
                                       const ProtocolConfig& cfg) {
  ClassOutcome outcome;
  outcome.class_id = class_id;

  DatasetSplit split = sample_synthetic_split(kb, class_id, cfg.n_train, cfg.n_val, cfg.n_test,
                                              derive_seed(cfg.seed, "split:" + class_id));
  KnowledgeBase train_kb = training_kb(kb, split);
  EntityPropertyGraph graph = build_graph(train_kb, cfg.weights, cfg.gnn.k, cfg.symmetrize_ee);

  GnnConfig gcfg = cfg.gnn;
  gcfg.seed = derive_seed(cfg.seed, "gnn:" + class_id);
  TrainResult trained = train_gnn(graph, gcfg);

  outcome.n_test = static_cast<int>(split.test.size());
  std::vector<RankingCase> gnn_cases, pop_cases;
  double g_p5 = 0, g_n5 = 0, g_p10 = 0, g_n10 = 0;
  double p_p5 = 0, p_n5 = 0, p_p10 = 0, p_n10 = 0;
  for (const std::string& entity : split.test) {
    std::set<std::string> relevant;
    for (const std::string& p : split.removed.at(entity).properties) {
      if (graph.property_index.count(p)) relevant.insert(p);
    }
    std::vector<std::string> gnn_ranked;
    for (const ScoredProperty& sp : rank_properties(graph, trained.params, gcfg, entity)) {
      gnn_ranked.push_back(sp.property);
    }
    std::vector<std::string> pop_ranked = popularity_baseline(train_kb, class_id, entity);

    g_p5 += precision_at_m(gnn_ranked, relevant, 5);
    g_n5 += ndcg_at_m(gnn_ranked, relevant, 5);
    g_p10 += precision_at_m(gnn_ranked, relevant, 10);
    g_n10 += ndcg_at_m(gnn_ranked, relevant, 10);
    p_p5 += precision_at_m(pop_ranked, relevant, 5);
    p_n5 += ndcg_at_m(pop_ranked, relevant, 5);
    p_p10 += precision_at_m(pop_ranked, relevant, 10);
    p_n10 += ndcg_at_m(pop_ranked, relevant, 10);
    gnn_cases.push_back({std::move(gnn_ranked), relevant});
    pop_cases.push_back({std::move(pop_ranked), std::move(relevant)});
  }
  double nt = static_cast<double>(split.test.size());
  outcome.gnn = {g_p5 / nt, g_n5 / nt, g_p10 / nt, g_n10 / nt, mean_average_precision(gnn_cases)};
  outcome.popularity =
      {p_p5 / nt, p_n5 / nt, p_p10 / nt, p_n10 / nt, mean_average_precision(pop_cases)};

  if (!cfg.run_verification) return outcome;
  outcome.verified = true;

  // claims world over the held-out facts plus conflicting distractor values
  std::vector<Fact> world_facts;
  std::vector<char> planted;
  std::vector<Fact> gold;
  for (const std::string& entity : split.test) {
    for (const Fact& f : split.removed.at(entity).facts) {
      gold.push_back(f);
      world_facts.push_back(f);
      planted.push_back(1);
      for (int d = 0; d < cfg.distractors_per_fact; ++d) {
        Fact alt = f;
        alt.object.text += "#d" + std::to_string(d);
        world_facts.push_back(alt);
        planted.push_back(0);
      }
    }
  }
  WorldConfig wcfg = cfg.world;
  wcfg.n_facts = static_cast<int>(world_facts.size());
  wcfg.seed = derive_seed(cfg.seed, "world:" + class_id);
  World world = generate_world_for_facts(world_facts, planted, wcfg);

  std::vector<std::string> popular;
  for (const std::string& e : train_kb.entities()) {
    if (!train_kb.is_long_tail(e)) popular.push_back(e);
  }
  std::set<std::string> claimed_props;
  for (const Fact& f : world.facts) claimed_props.insert(f.property);
  std::map<std::string, Cardinality> cardinality;
  for (const std::string& p : claimed_props) {
    cardinality[p] = predict_cardinality(train_kb, p, popular, cfg.truth.multi_value_threshold);
  }

  std::vector<Fact> priors = cfg.truth.use_prior_truths ? world.prior_truths : std::vector<Fact>{};
  VerifyOutcome vo = verify_claims(world.claims, priors, cardinality, cfg.truth, world.facts);
  outcome.verify_converged = vo.assignment.converged;
  outcome.verifier = fact_prf(vo.assignment.true_facts(), gold);

  TruthAssignment maj = majority_init(world.claims, cfg.truth.z_clamp);
  std::vector<Fact> maj_true;
  for (std::size_t i = 0; i < maj.facts.size(); ++i) {
    if (maj.z[i] >= cfg.truth.epsilon) maj_true.push_back(maj.facts[i]);
  }
  outcome.majority = fact_prf(maj_true, gold);
  return outcome;
}

inline nlohmann::ordered_json run_synthetic_protocol(const KnowledgeBase& kb,
                                                     const std::vector<std::string>& classes,
                                                     const ProtocolConfig& cfg) {
  if (classes.empty()) throw ConfigError("run_synthetic_protocol: no classes given");
  nlohmann::ordered_json report;
  report["format"] = "eval-report";
  report["version"] = 1;
  report["seed"] = cfg.seed;
  report["classes"] = nlohmann::ordered_json::array();

  std::vector<ClassOutcome> outcomes;
  for (const std::string& c : classes) {
    try {
      outcomes.push_back(run_protocol_class(kb, c, cfg));
    } catch (const Error& e) {
      throw Error("class '" + c + "': " + e.what());
    }
  }

  MethodRanking avg_gnn, avg_pop;
  Prf avg_ver, avg_maj;
  bool any_verified = false;
  for (const ClassOutcome& o : outcomes) {
    nlohmann::ordered_json row;
    row["class"] = o.class_id;
    row["n_test"] = o.n_test;
    row["ranking"]["gnn"] = detail::ranking_json(o.gnn);
    row["ranking"]["popularity"] = detail::ranking_json(o.popularity);
    if (o.verified) {
      row["verification"]["converged"] = o.verify_converged;
      row["verification"]["verifier"] = detail::prf_json(o.verifier);
      row["verification"]["majority"] = detail::prf_json(o.majority);
      any_verified = true;
    }
    report["classes"].push_back(row);

    double n = static_cast<double>(outcomes.size());
    avg_gnn.precision_at_5 += o.gnn.precision_at_5 / n;
    avg_gnn.ndcg_at_5 += o.gnn.ndcg_at_5 / n;
    avg_gnn.precision_at_10 += o.gnn.precision_at_10 / n;
    avg_gnn.ndcg_at_10 += o.gnn.ndcg_at_10 / n;
    avg_gnn.map += o.gnn.map / n;
    avg_pop.precision_at_5 += o.popularity.precision_at_5 / n;
    avg_pop.ndcg_at_5 += o.popularity.ndcg_at_5 / n;
    avg_pop.precision_at_10 += o.popularity.precision_at_10 / n;
    avg_pop.ndcg_at_10 += o.popularity.ndcg_at_10 / n;
    avg_pop.map += o.popularity.map / n;
    avg_ver.precision += o.verifier.precision / n;
    avg_ver.recall += o.verifier.recall / n;
    avg_ver.f1 += o.verifier.f1 / n;
    avg_maj.precision += o.majority.precision / n;
    avg_maj.recall += o.majority.recall / n;
    avg_maj.f1 += o.majority.f1 / n;
  }

  nlohmann::ordered_json avg;
  avg["ranking"]["gnn"] = detail::ranking_json(avg_gnn);
  avg["ranking"]["popularity"] = detail::ranking_json(avg_pop);
  if (any_verified) {
    avg["verification"]["verifier"] = detail::prf_json(avg_ver);
    avg["verification"]["majority"] = detail::prf_json(avg_maj);
  }
  report["average"] = avg;
  return report;
}

}  // namespace kbe
