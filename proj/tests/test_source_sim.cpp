#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "kbe/errors.hpp"
#include "kbe/source_sim.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;
using Catch::Matchers::WithinAbs;

namespace {

std::map<kbe::Fact, bool> truth_map(const kbe::World& w) {
  std::map<kbe::Fact, bool> m;
  for (std::size_t i = 0; i < w.facts.size(); ++i) m[w.facts[i]] = w.truth[i] != 0;
  return m;
}

// share of facts whose mean observation lands on the planted side of 0.5
double majority_accuracy(const kbe::World& w) {
  std::map<kbe::Fact, std::pair<double, int>> sums;
  for (const kbe::Claim& c : w.claims) {
    auto& [total, count] = sums[c.fact];
    total += c.observation;
    ++count;
  }
  std::map<kbe::Fact, bool> truth = truth_map(w);
  int hits = 0, covered = 0;
  for (const auto& [fact, agg] : sums) {
    ++covered;
    bool vote = agg.first / agg.second >= 0.5;
    if (vote == truth.at(fact)) ++hits;
  }
  return covered == 0 ? 0.0 : static_cast<double>(hits) / covered;
}

}  // namespace

TEST_CASE("synthetic facts tile entities properties and values", "[source_sim]") {
  kbe::WorldConfig cfg;
  cfg.n_facts = 10;
  cfg.n_sources = 12;
  cfg.seed = 2;
  kbe::World w = kbe::generate_world(cfg);
  REQUIRE(w.facts.size() == 10);
  REQUIRE(w.truth.size() == 10);
  REQUIRE(w.facts[0].subject == "e0");
  REQUIRE(w.facts[0].property == "p0");
  REQUIRE(w.facts[0].object.text == "v0");
  REQUIRE(w.facts[1].object.text == "v1");
  REQUIRE(w.facts[2].property == "p1");
  REQUIRE(w.facts[9].subject == "e1");
  REQUIRE(w.facts[9].property == "p0");
  for (const kbe::Fact& f : w.facts) REQUIRE(f.object.kind == kbe::ValueKind::Literal);

  REQUIRE(w.sources.size() == 12);
  REQUIRE(w.sources[0].id == "s00");
  REQUIRE(w.sources[11].id == "s11");
  REQUIRE(w.sources[0].source_type == std::string("vertical"));
  REQUIRE(w.sources[1].source_type == std::string("text"));
  REQUIRE(w.sources[2].source_type == std::string("structured"));
  REQUIRE(w.sources[3].source_type == std::string("vertical"));
  for (const kbe::Source& s : w.sources) {
    REQUIRE(s.true_error_variance >= cfg.variance_min);
    REQUIRE(s.true_error_variance <= cfg.variance_max);
    REQUIRE(s.claim_target >= 1);
    REQUIRE(s.claim_target <= cfg.n_facts);
  }
}

TEST_CASE("near-zero noise pins observations to the planted truth", "[source_sim]") {
  kbe::WorldConfig cfg;
  cfg.n_facts = 60;
  cfg.n_sources = 20;
  cfg.variance_min = 1e-6;
  cfg.variance_max = 1e-6;
  cfg.seed = 3;
  kbe::World w = kbe::generate_world(cfg);
  REQUIRE_FALSE(w.claims.empty());
  std::map<kbe::Fact, bool> truth = truth_map(w);
  for (const kbe::Claim& c : w.claims) {
    double target = truth.at(c.fact) ? 1.0 : 0.0;
    REQUIRE_THAT(c.observation, WithinAbs(target, 0.01));
  }
}

TEST_CASE("same seed reproduces the world, different seed does not", "[source_sim]") {
  kbe::WorldConfig cfg;
  cfg.n_facts = 80;
  cfg.n_sources = 25;
  cfg.seed = 11;
  kbe::World a = kbe::generate_world(cfg);
  kbe::World b = kbe::generate_world(cfg);
  REQUIRE(a.facts == b.facts);
  REQUIRE(a.truth == b.truth);
  REQUIRE(a.claims == b.claims);
  REQUIRE(a.prior_truths == b.prior_truths);
  REQUIRE(a.sources.size() == b.sources.size());
  for (std::size_t i = 0; i < a.sources.size(); ++i) {
    REQUIRE(a.sources[i].id == b.sources[i].id);
    REQUIRE(a.sources[i].true_error_variance == b.sources[i].true_error_variance);
    REQUIRE(a.sources[i].claim_target == b.sources[i].claim_target);
  }
  cfg.seed = 12;
  kbe::World c = kbe::generate_world(cfg);
  REQUIRE(a.facts == c.facts);  // layout is seed-free
  REQUIRE_FALSE(a.claims == c.claims);
}

TEST_CASE("claim counts follow a heavy-tailed profile", "[source_sim]") {
  kbe::WorldConfig cfg;
  cfg.n_facts = 200;
  cfg.n_sources = 200;
  cfg.powerlaw_exponent = 2.0;
  cfg.seed = 9;
  kbe::World w = kbe::generate_world(cfg);

  std::map<std::string, int> per_source;
  for (const kbe::Source& s : w.sources) per_source[s.id] = 0;
  for (const kbe::Claim& c : w.claims) ++per_source[c.source];
  for (const kbe::Source& s : w.sources) {
    REQUIRE(per_source[s.id] == s.claim_target);
  }

  std::vector<int> counts;
  int total = 0;
  int small = 0;
  for (const auto& [id, n] : per_source) {
    counts.push_back(n);
    total += n;
    if (n <= 3) ++small;
  }
  REQUIRE(small >= 120);  // >= 60% of 200 sources stay tiny
  std::sort(counts.rbegin(), counts.rend());
  int top = 0;
  for (int i = 0; i < 10; ++i) top += counts[i];  // top 5%
  REQUIRE(top >= static_cast<int>(0.4 * total));
}

TEST_CASE("claims reference known facts and sources and stay clamped", "[source_sim]") {
  for (std::uint64_t seed : {1u, 6u, 14u}) {
    kbe::WorldConfig cfg;
    cfg.n_facts = 50;
    cfg.n_sources = 15;
    cfg.variance_max = 0.25;
    cfg.seed = seed;
    kbe::World w = kbe::generate_world(cfg);
    std::set<kbe::Fact> facts(w.facts.begin(), w.facts.end());
    std::set<std::string> sources;
    for (const kbe::Source& s : w.sources) sources.insert(s.id);
    std::set<std::pair<kbe::Fact, std::string>> seen;
    for (const kbe::Claim& c : w.claims) {
      REQUIRE(facts.count(c.fact) == 1);
      REQUIRE(sources.count(c.source) == 1);
      REQUIRE(c.observation >= 0.0);
      REQUIRE(c.observation <= 1.0);
      REQUIRE(seen.insert({c.fact, c.source}).second);  // one claim per pair
    }

    std::map<kbe::Fact, bool> truth = truth_map(w);
    std::size_t n_true = 0;
    for (char t : w.truth) n_true += t ? 1 : 0;
    std::size_t want = static_cast<std::size_t>(std::lround(cfg.prior_fraction * cfg.n_facts));
    REQUIRE(w.prior_truths.size() == std::min(want, n_true));
    REQUIRE(std::is_sorted(w.prior_truths.begin(), w.prior_truths.end()));
    for (const kbe::Fact& f : w.prior_truths) REQUIRE(truth.at(f));
  }
}

TEST_CASE("cleaner worlds win more majority votes", "[source_sim]") {
  kbe::WorldConfig clean;
  clean.n_facts = 300;
  clean.n_sources = 100;
  clean.variance_min = 0.01;
  clean.variance_max = 0.02;
  clean.seed = 4;
  kbe::WorldConfig noisy = clean;
  noisy.variance_min = 0.20;
  noisy.variance_max = 0.25;
  double clean_acc = majority_accuracy(kbe::generate_world(clean));
  double noisy_acc = majority_accuracy(kbe::generate_world(noisy));
  REQUIRE(clean_acc > noisy_acc);
  REQUIRE(clean_acc > 0.9);
}

TEST_CASE("merge keeps disjoint claims and maxes colliding ones", "[source_sim]") {
  kbe::Claim a = t::claim("e1", "p1", "x", "s1", 0.7);
  kbe::Claim b = t::claim("e1", "p1", "y", "s2", 0.3);
  kbe::Claim c = t::claim("e2", "p2", "z", "s1", 0.9);
  std::vector<kbe::Claim> merged = kbe::merge_claims({{a}, {b, c}});
  REQUIRE(merged.size() == 3);
  REQUIRE(std::is_sorted(merged.begin(), merged.end()));
  REQUIRE(std::count(merged.begin(), merged.end(), a) == 1);
  REQUIRE(std::count(merged.begin(), merged.end(), b) == 1);
  REQUIRE(std::count(merged.begin(), merged.end(), c) == 1);

  kbe::Claim low = t::claim("e1", "p1", "x", "s1", 0.4);
  kbe::Claim high = t::claim("e1", "p1", "x", "s1", 0.9);
  std::vector<kbe::Claim> collided = kbe::merge_claims({{low}, {high}});
  REQUIRE(collided.size() == 1);
  REQUIRE(collided[0].observation == 0.9);
  REQUIRE(kbe::merge_claims({}).empty());
  REQUIRE(kbe::merge_claims({{}, {}}).empty());
}

TEST_CASE("typed extractors partition the world claims", "[source_sim]") {
  kbe::WorldConfig cfg;
  cfg.n_facts = 40;
  cfg.n_sources = 9;
  cfg.seed = 21;
  kbe::World w = kbe::generate_world(cfg);
  kbe::SimulatedExtractor vertical = kbe::SimulatedExtractor::for_type(w, "vertical");
  kbe::SimulatedExtractor text = kbe::SimulatedExtractor::for_type(w, "text");
  kbe::SimulatedExtractor structured = kbe::SimulatedExtractor::for_type(w, "structured");
  REQUIRE(vertical.source_type() == "vertical");

  std::set<std::pair<std::string, std::string>> slots;
  for (const kbe::Fact& f : w.facts) slots.insert({f.subject, f.property});

  std::vector<kbe::Claim> collected;
  for (const auto& [entity, property] : slots) {
    for (const kbe::Extractor* ex :
         {static_cast<const kbe::Extractor*>(&vertical), static_cast<const kbe::Extractor*>(&text),
          static_cast<const kbe::Extractor*>(&structured)}) {
      std::vector<kbe::Claim> got = ex->extract(entity, property);
      REQUIRE(std::is_sorted(got.begin(), got.end()));
      for (const kbe::Claim& c : got) {
        REQUIRE(c.fact.subject == entity);
        REQUIRE(c.fact.property == property);
        collected.push_back(c);
      }
    }
  }
  std::sort(collected.begin(), collected.end());
  std::vector<kbe::Claim> world_claims = w.claims;
  std::sort(world_claims.begin(), world_claims.end());
  REQUIRE(collected == world_claims);
  REQUIRE(vertical.extract("no_such", "slot").empty());
}

TEST_CASE("claims and truths survive a file round trip", "[source_sim]") {
  kbe::WorldConfig cfg;
  cfg.n_facts = 30;
  cfg.n_sources = 8;
  cfg.seed = 33;
  kbe::World w = kbe::generate_world(cfg);
  t::TempDir dir;
  kbe::save_claims_jsonl(w.claims, dir.file("claims.jsonl"));
  std::vector<kbe::Claim> back = kbe::load_claims_jsonl(dir.file("claims.jsonl"));
  REQUIRE(back == w.claims);

  kbe::save_truths_jsonl(w, dir.file("truths.jsonl"));
  std::vector<kbe::PlantedFact> planted = kbe::load_truths_jsonl(dir.file("truths.jsonl"));
  REQUIRE(planted.size() == w.facts.size());
  std::set<kbe::Fact> priors(w.prior_truths.begin(), w.prior_truths.end());
  for (std::size_t i = 0; i < planted.size(); ++i) {
    REQUIRE(planted[i].fact == w.facts[i]);
    REQUIRE(planted[i].truth == (w.truth[i] != 0));
    REQUIRE(planted[i].prior == (priors.count(w.facts[i]) > 0));
  }

  t::write_file(dir.file("bad.jsonl"),
                R"({"entity":"e","property":"p","value":"v","kind":"literal","source":"s","observation":1.5})"
                "\n");
  REQUIRE_THROWS_MATCHES(kbe::load_claims_jsonl(dir.file("bad.jsonl")), kbe::ParseError,
                         MessageMatches(ContainsSubstring("observation outside [0, 1]")));
  t::write_file(dir.file("junk.jsonl"), "not json\n");
  REQUIRE_THROWS_MATCHES(kbe::load_claims_jsonl(dir.file("junk.jsonl")), kbe::ParseError,
                         MessageMatches(ContainsSubstring(":1:")));
  t::write_file(dir.file("gap.jsonl"), R"({"entity":"e","property":"p","value":"v"})"
                                       "\n");
  REQUIRE_THROWS_AS(kbe::load_truths_jsonl(dir.file("gap.jsonl")), kbe::ParseError);
  REQUIRE_THROWS_AS(kbe::load_claims_jsonl(dir.file("absent.jsonl")), kbe::DataError);
}

TEST_CASE("world configuration is validated", "[source_sim]") {
  kbe::WorldConfig cfg;
  cfg.n_facts = 0;
  REQUIRE_THROWS_MATCHES(cfg.validate(), kbe::ConfigError,
                         MessageMatches(ContainsSubstring("n_facts must be >= 1")));
  cfg = {};
  cfg.powerlaw_exponent = 1.0;
  REQUIRE_THROWS_MATCHES(cfg.validate(), kbe::ConfigError,
                         MessageMatches(ContainsSubstring("powerlaw_exponent must be > 1")));
  cfg = {};
  cfg.variance_min = 0.0;
  REQUIRE_THROWS_MATCHES(cfg.validate(), kbe::ConfigError,
                         MessageMatches(ContainsSubstring("variance range")));
  cfg = {};
  cfg.variance_min = 0.5;
  cfg.variance_max = 0.4;
  REQUIRE_THROWS_AS(cfg.validate(), kbe::ConfigError);
  cfg = {};
  cfg.truth_prior = 1.5;
  REQUIRE_THROWS_AS(cfg.validate(), kbe::ConfigError);
  cfg = {};
  cfg.prior_fraction = -0.1;
  REQUIRE_THROWS_AS(cfg.validate(), kbe::ConfigError);

  std::vector<kbe::Fact> facts = {t::lit("e", "p", "v")};
  REQUIRE_THROWS_MATCHES(kbe::generate_world_for_facts(facts, {1, 0}, kbe::WorldConfig{}),
                         kbe::ConfigError,
                         MessageMatches(ContainsSubstring("facts/truth size mismatch")));
  REQUIRE_THROWS_MATCHES(kbe::generate_world_for_facts({}, {}, kbe::WorldConfig{}),
                         kbe::ConfigError, MessageMatches(ContainsSubstring("no facts")));
}
