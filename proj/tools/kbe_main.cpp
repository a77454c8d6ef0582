// kbe: command-line front end for the enrichment library.
//
// Exit codes: 0 ok (including empty results), 1 bad configuration or usage,
// 2 bad input data, 3 inference did not converge.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kbe/ep_graph.hpp"
#include "kbe/errors.hpp"
#include "kbe/gnn.hpp"
#include "kbe/kb.hpp"
#include "kbe/metrics.hpp"
#include "kbe/pipeline.hpp"
#include "kbe/protocol.hpp"
#include "kbe/similarity.hpp"
#include "kbe/source_sim.hpp"
#include "kbe/truth_infer.hpp"

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw kbe::DataError("cannot write " + path);
  out << text;
}

void emit_json(const nlohmann::ordered_json& j, const std::string& path) {
  std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

struct KbInput {
  std::string path;
  std::string format = "tsv";
  kbe::KnowledgeBase load() const { return kbe::load_kb(path, format); }
};

void add_kb_options(CLI::App* cmd, KbInput& in) {
  cmd->add_option("--kb", in.path, "knowledge base file")->required();
  cmd->add_option("--format", in.format, "kb file format: tsv or jsonl")
      ->check(CLI::IsMember({"tsv", "jsonl"}));
}

void add_weight_options(CLI::App* cmd, kbe::SimilarityWeights& w) {
  cmd->add_option("--alpha1", w.alpha1, "type similarity weight");
  cmd->add_option("--alpha2", w.alpha2, "property similarity weight");
  cmd->add_option("--alpha3", w.alpha3, "value similarity weight");
}

int cmd_kb_stats(const KbInput& in) {
  kbe::KnowledgeBase kb = in.load();
  std::size_t long_tail = 0;
  for (const std::string& e : kb.entities()) {
    if (kb.is_long_tail(e)) ++long_tail;
  }
  std::cout << "facts\t" << kb.facts().size() << "\n"
            << "entities\t" << kb.entities().size() << "\n"
            << "properties\t" << kb.properties().size() << "\n"
            << "classes\t" << kb.classes().size() << "\n"
            << "long_tail_entities\t" << long_tail << "\n";
  return 0;
}

int cmd_sim_topk(const KbInput& in, const kbe::SimilarityWeights& w, const std::string& entity,
                 int k) {
  kbe::KnowledgeBase kb = in.load();
  kbe::CorpusStats stats = kbe::CorpusStats::compute(kb);
  auto ranked = kbe::top_k_neighbors(kb, stats, w, entity, k);
  for (const auto& [id, score] : ranked) {
    std::cout << id << "\t" << fmt_num(score) << "\n";
  }
  return 0;
}

int cmd_graph_build(const KbInput& in, const kbe::SimilarityWeights& w, int k, bool symmetrize,
                    const std::string& out) {
  kbe::KnowledgeBase kb = in.load();
  kbe::EntityPropertyGraph g = kbe::build_graph(kb, w, k, symmetrize);
  kbe::save_graph(g, out);
  std::cout << "graph: " << g.n_entities() << " entities, " << g.n_properties()
            << " properties, " << g.usage_edge_count() << " usage edges -> " << out << "\n";
  return 0;
}

int cmd_gnn_train(const std::string& graph_path, const kbe::GnnConfig& cfg,
                  const std::string& out) {
  kbe::EntityPropertyGraph g = kbe::load_graph(graph_path);
  kbe::TrainResult r = kbe::train_gnn(g, cfg);
  for (std::size_t i = 0; i < r.epoch_losses.size(); ++i) {
    std::cerr << "epoch " << (i + 1) << " loss " << fmt_num(r.epoch_losses[i]) << "\n";
  }
  kbe::save_checkpoint(r.params, cfg, g, out);
  std::cout << "trained " << r.epoch_losses.size() << " epochs, final loss "
            << fmt_num(r.epoch_losses.empty() ? 0.0 : r.epoch_losses.back()) << " -> " << out
            << "\n";
  return 0;
}

int cmd_gnn_rank(const std::string& graph_path, const std::string& ckpt_path,
                 const std::string& entity, int m) {
  kbe::EntityPropertyGraph g = kbe::load_graph(graph_path);
  kbe::Checkpoint ck = kbe::load_checkpoint(ckpt_path);
  if (ck.entities != g.entity_ids || ck.properties != g.property_ids) {
    throw kbe::DataError("checkpoint was trained on a different graph");
  }
  for (const kbe::ScoredProperty& sp : kbe::rank_properties(g, ck.params, ck.config, entity, m)) {
    std::cout << sp.property << "\t" << fmt_num(sp.score) << "\n";
  }
  return 0;
}

int cmd_world_generate(const kbe::WorldConfig& cfg, const std::string& out_claims,
                       const std::string& out_truths) {
  kbe::World w = kbe::generate_world(cfg);
  kbe::save_claims_jsonl(w.claims, out_claims);
  kbe::save_truths_jsonl(w, out_truths);
  std::cout << "world: " << w.facts.size() << " facts, " << w.sources.size() << " sources, "
            << w.claims.size() << " claims, " << w.prior_truths.size() << " priors\n";
  return 0;
}

std::string verified_facts_tsv(const kbe::TruthAssignment& za) {
  std::string text;
  for (std::size_t i = 0; i < za.facts.size(); ++i) {
    const kbe::Fact& f = za.facts[i];
    text += kbe::escape_field(f.subject) + "\t" + kbe::escape_field(f.property) + "\t" +
            kbe::escape_field(f.object.text) + "\t" + kbe::to_string(f.object.kind) + "\t" +
            fmt_num(za.z[i]) + "\t" + (za.labels[i] ? "true" : "false") + "\n";
  }
  return text;
}

std::string reliability_tsv(const std::map<std::string, kbe::SourceStats>& stats) {
  std::string text;
  for (const auto& [id, st] : stats) {
    text += kbe::escape_field(id) + "\t" + fmt_num(st.nu) + "\t" + fmt_num(st.tau2) + "\t" +
            fmt_num(st.reliability) + "\n";
  }
  return text;
}

int cmd_verify(const std::string& claims_path, const std::string& truths_path,
               const std::string& kb_path, const std::string& kb_format,
               const std::vector<std::string>& single_props, const kbe::TruthConfig& cfg,
               const std::string& out_facts, const std::string& out_reliability) {
  std::vector<kbe::Claim> claims = kbe::load_claims_jsonl(claims_path);
  if (claims.empty()) {
    write_text(out_facts, "");
    write_text(out_reliability, "");
    std::cerr << "no claims; nothing to verify\n";
    return 0;
  }

  std::vector<kbe::Fact> priors;
  if (!truths_path.empty()) {
    for (const kbe::PlantedFact& pf : kbe::load_truths_jsonl(truths_path)) {
      if (pf.prior) priors.push_back(pf.fact);
    }
  }

  std::map<std::string, kbe::Cardinality> cardinality;
  if (!kb_path.empty()) {
    kbe::KnowledgeBase kb = kbe::load_kb(kb_path, kb_format);
    std::vector<std::string> popular;
    for (const std::string& e : kb.entities()) {
      if (!kb.is_long_tail(e)) popular.push_back(e);
    }
    std::set<std::string> props;
    for (const kbe::Claim& c : claims) props.insert(c.fact.property);
    for (const std::string& p : props) {
      cardinality[p] = kbe::predict_cardinality(kb, p, popular, cfg.multi_value_threshold);
    }
  }
  for (const std::string& p : single_props) cardinality[p] = kbe::Cardinality::Single;

  kbe::VerifyOutcome vo = kbe::verify_claims(claims, priors, cardinality, cfg);
  write_text(out_facts, verified_facts_tsv(vo.assignment));
  write_text(out_reliability, reliability_tsv(vo.stats));
  std::cout << "verified " << vo.assignment.facts.size() << " facts from "
            << vo.stats.size() << " sources, objective " << fmt_num(vo.assignment.objective)
            << "\n";
  if (!vo.assignment.converged) {
    std::cerr << "warning: MAP inference hit the iteration limit\n";
    return 3;
  }
  return 0;
}

int cmd_enrich(const KbInput& in, const std::string& graph_path, const std::string& ckpt_path,
               const std::string& claims_path, const std::string& entity, int m,
               const kbe::TruthConfig& cfg, const std::string& out, bool do_write_back,
               const std::string& out_kb, const std::string& audit_path) {
  kbe::KnowledgeBase kb = in.load();
  kbe::EntityPropertyGraph g = kbe::load_graph(graph_path);
  kbe::Checkpoint ck = kbe::load_checkpoint(ckpt_path);
  if (ck.entities != g.entity_ids || ck.properties != g.property_ids) {
    throw kbe::DataError("checkpoint was trained on a different graph");
  }

  std::vector<kbe::Claim> corpus = kbe::load_claims_jsonl(claims_path);
  kbe::SimulatedExtractor extractor(corpus, "file");
  std::vector<const kbe::Extractor*> extractors = {&extractor};

  kbe::EnrichmentResult result =
      kbe::enrich(kb, g, ck.params, ck.config, extractors, cfg, entity, m);
  emit_json(kbe::enrichment_to_json(result), out);

  if (do_write_back) {
    kbe::WriteBackResult wb = kbe::write_back(kb, result);
    kbe::save_kb(kb, out_kb, in.format);
    if (!audit_path.empty()) emit_json(kbe::audit_to_json(wb), audit_path);
    std::cerr << "write-back: " << wb.added << " added, " << wb.skipped << " skipped\n";
  }
  if (!result.verifier_converged) {
    std::cerr << "warning: MAP inference hit the iteration limit\n";
    return 3;
  }
  return 0;
}

int cmd_eval_run(const std::string& config_path, std::string out) {
  kbe::PipelineConfig cfg = kbe::load_pipeline_config(config_path);
  kbe::KnowledgeBase kb;
  std::vector<std::string> classes;
  if (!cfg.eval_synthetic && !cfg.kb_path.empty()) {
    kb = kbe::load_kb(cfg.kb_path, cfg.kb_format);
    classes.assign(kb.classes().begin(), kb.classes().end());
  } else {
    kb = kbe::make_class_correlated_kb(cfg.synth);
    classes = kbe::synth_class_ids(cfg.synth);
  }
  nlohmann::ordered_json report = kbe::run_synthetic_protocol(kb, classes, cfg.protocol);
  if (out.empty()) out = cfg.report_path;
  emit_json(report, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"long-tail knowledge-base enrichment toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  // kb stats
  auto* kb_cmd = app.add_subcommand("kb", "knowledge base utilities")->require_subcommand(1);
  auto* stats_cmd = kb_cmd->add_subcommand("stats", "print corpus statistics");
  static KbInput stats_in;
  add_kb_options(stats_cmd, stats_in);
  stats_cmd->callback([&] { rc = cmd_kb_stats(stats_in); });

  // sim topk
  auto* sim_cmd = app.add_subcommand("sim", "entity similarity")->require_subcommand(1);
  auto* topk_cmd = sim_cmd->add_subcommand("topk", "most similar entities");
  static KbInput sim_in;
  static kbe::SimilarityWeights sim_w;
  static std::string sim_entity;
  static int sim_k = 10;
  add_kb_options(topk_cmd, sim_in);
  add_weight_options(topk_cmd, sim_w);
  topk_cmd->add_option("--entity", sim_entity, "query entity id")->required();
  topk_cmd->add_option("--k", sim_k, "number of neighbours");
  topk_cmd->callback([&] { rc = cmd_sim_topk(sim_in, sim_w, sim_entity, sim_k); });

  // graph build
  auto* graph_cmd = app.add_subcommand("graph", "entity-property graph")->require_subcommand(1);
  auto* gbuild_cmd = graph_cmd->add_subcommand("build", "build and save the graph");
  static KbInput graph_in;
  static kbe::SimilarityWeights graph_w;
  static int graph_k = 100;
  static bool graph_sym = false;
  static std::string graph_out;
  add_kb_options(gbuild_cmd, graph_in);
  add_weight_options(gbuild_cmd, graph_w);
  gbuild_cmd->add_option("--k", graph_k, "similar-entity edges per entity");
  gbuild_cmd->add_flag("--symmetrize-ee", graph_sym, "make entity-entity edges symmetric");
  gbuild_cmd->add_option("--out", graph_out, "output graph json")->required();
  gbuild_cmd->callback(
      [&] { rc = cmd_graph_build(graph_in, graph_w, graph_k, graph_sym, graph_out); });

  // gnn train / rank
  auto* gnn_cmd = app.add_subcommand("gnn", "property prediction model")->require_subcommand(1);
  auto* train_cmd = gnn_cmd->add_subcommand("train", "train on a graph");
  static std::string train_graph, train_out;
  static kbe::GnnConfig train_cfg;
  static bool no_attention = false;
  train_cmd->add_option("--graph", train_graph, "graph json")->required();
  train_cmd->add_option("--out", train_out, "output checkpoint json")->required();
  train_cmd->add_option("--d1", train_cfg.d1, "embedding width");
  train_cmd->add_option("--d2", train_cfg.d2, "attention hidden width");
  train_cmd->add_option("--layers", train_cfg.mlp_layers, "hidden layers in the scorer");
  train_cmd->add_option("--lr", train_cfg.learning_rate, "initial learning rate");
  train_cmd->add_option("--negatives", train_cfg.negatives_per_positive,
                        "negative samples per positive");
  train_cmd->add_option("--batch", train_cfg.batch_size, "batch size");
  train_cmd->add_option("--epochs", train_cfg.epochs, "training epochs");
  train_cmd->add_option("--seed", train_cfg.seed, "rng seed");
  train_cmd->add_flag("--no-attention", no_attention, "uniform neighbour weights");
  train_cmd->add_flag("--per-role-attention", train_cfg.per_role_attention,
                      "separate attention parameters per neighbour role");
  train_cmd->callback([&] {
    train_cfg.attention_enabled = !no_attention;
    rc = cmd_gnn_train(train_graph, train_cfg, train_out);
  });

  auto* rank_cmd = gnn_cmd->add_subcommand("rank", "rank candidate properties for an entity");
  static std::string rank_graph, rank_ckpt, rank_entity;
  static int rank_m = -1;
  rank_cmd->add_option("--graph", rank_graph, "graph json")->required();
  rank_cmd->add_option("--checkpoint", rank_ckpt, "trained checkpoint")->required();
  rank_cmd->add_option("--entity", rank_entity, "entity id")->required();
  rank_cmd->add_option("--m", rank_m, "number of properties (-1 = all unused)");
  rank_cmd->callback([&] { rc = cmd_gnn_rank(rank_graph, rank_ckpt, rank_entity, rank_m); });

  // world generate
  auto* world_cmd = app.add_subcommand("world", "simulated claim corpus")->require_subcommand(1);
  auto* wgen_cmd = world_cmd->add_subcommand("generate", "sample a synthetic claim world");
  static kbe::WorldConfig world_cfg;
  static std::string world_claims, world_truths;
  wgen_cmd->add_option("--facts", world_cfg.n_facts, "number of candidate facts");
  wgen_cmd->add_option("--sources", world_cfg.n_sources, "number of sources");
  wgen_cmd->add_option("--exponent", world_cfg.powerlaw_exponent, "claim-count tail exponent");
  wgen_cmd->add_option("--variance-min", world_cfg.variance_min, "lowest source error variance");
  wgen_cmd->add_option("--variance-max", world_cfg.variance_max, "highest source error variance");
  wgen_cmd->add_option("--truth-prior", world_cfg.truth_prior, "probability a fact is true");
  wgen_cmd->add_option("--prior-fraction", world_cfg.prior_fraction,
                       "fraction of facts revealed as prior truths");
  wgen_cmd->add_option("--seed", world_cfg.seed, "rng seed");
  wgen_cmd->add_option("--out-claims", world_claims, "claims jsonl")->required();
  wgen_cmd->add_option("--out-truths", world_truths, "planted truths jsonl")->required();
  wgen_cmd->callback([&] { rc = cmd_world_generate(world_cfg, world_claims, world_truths); });

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "infer fact truth from claims");
  static std::string v_claims, v_truths, v_kb, v_kb_format = "tsv", v_out_facts, v_out_rel;
  static std::vector<std::string> v_single;
  static kbe::TruthConfig v_cfg;
  static bool v_no_ci = false, v_no_priors = false;
  verify_cmd->add_option("--claims", v_claims, "claims jsonl")->required();
  verify_cmd->add_option("--truths", v_truths, "planted truths jsonl (prior rows only are used)");
  verify_cmd->add_option("--kb", v_kb, "knowledge base for cardinality prediction");
  verify_cmd->add_option("--format", v_kb_format, "kb file format")
      ->check(CLI::IsMember({"tsv", "jsonl"}));
  verify_cmd->add_option("--single", v_single, "treat property as single-valued (repeatable)");
  verify_cmd->add_option("--beta1", v_cfg.beta1, "beta prior (true)");
  verify_cmd->add_option("--beta0", v_cfg.beta0, "beta prior (false)");
  verify_cmd->add_option("--significance", v_cfg.significance, "CI significance level");
  verify_cmd->add_option("--epsilon", v_cfg.epsilon, "truth threshold for labeling");
  verify_cmd->add_option("--refine-rounds", v_cfg.refine_rounds, "variance refinement rounds");
  verify_cmd->add_option("--max-iters", v_cfg.max_iterations, "MAP iteration cap");
  verify_cmd->add_flag("--no-ci", v_no_ci, "plain variance estimate instead of CI bound");
  verify_cmd->add_flag("--no-priors", v_no_priors, "ignore prior truths when fitting variances");
  verify_cmd->add_option("--out-facts", v_out_facts, "verified facts tsv")->required();
  verify_cmd->add_option("--out-reliability", v_out_rel, "source reliability tsv")->required();
  verify_cmd->callback([&] {
    v_cfg.use_ci_estimator = !v_no_ci;
    v_cfg.use_prior_truths = !v_no_priors;
    rc = cmd_verify(v_claims, v_truths, v_kb, v_kb_format, v_single, v_cfg, v_out_facts,
                    v_out_rel);
  });

  // enrich
  auto* enrich_cmd = app.add_subcommand("enrich", "predict, extract and verify new facts");
  static KbInput e_in;
  static std::string e_graph, e_ckpt, e_claims, e_entity, e_out, e_out_kb, e_audit;
  static int e_m = 10;
  static kbe::TruthConfig e_cfg;
  static bool e_write_back = false;
  add_kb_options(enrich_cmd, e_in);
  enrich_cmd->add_option("--graph", e_graph, "graph json")->required();
  enrich_cmd->add_option("--checkpoint", e_ckpt, "trained checkpoint")->required();
  enrich_cmd->add_option("--claims", e_claims, "extraction corpus jsonl")->required();
  enrich_cmd->add_option("--entity", e_entity, "entity to enrich")->required();
  enrich_cmd->add_option("--m", e_m, "properties to predict");
  enrich_cmd->add_option("--epsilon", e_cfg.epsilon, "truth threshold for labeling");
  enrich_cmd->add_option("--out", e_out, "enrichment json ('-' or empty = stdout)");
  enrich_cmd->add_flag("--write-back", e_write_back, "insert accepted facts into the kb");
  enrich_cmd->add_option("--out-kb", e_out_kb, "updated kb path (with --write-back)");
  enrich_cmd->add_option("--audit", e_audit, "write-back audit json");
  enrich_cmd->callback([&] {
    if (e_write_back && e_out_kb.empty()) {
      throw kbe::ConfigError("--write-back requires --out-kb");
    }
    rc = cmd_enrich(e_in, e_graph, e_ckpt, e_claims, e_entity, e_m, e_cfg, e_out, e_write_back,
                    e_out_kb, e_audit);
  });

  // eval run
  auto* eval_cmd = app.add_subcommand("eval", "evaluation protocol")->require_subcommand(1);
  auto* run_cmd = eval_cmd->add_subcommand("run", "run the ranking + verification protocol");
  static std::string eval_config, eval_out;
  run_cmd->add_option("--config", eval_config, "pipeline config file")->required();
  run_cmd->add_option("--out", eval_out, "report json ('-' or empty = stdout)");
  run_cmd->callback([&] { rc = cmd_eval_run(eval_config, eval_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const kbe::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const kbe::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const kbe::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
