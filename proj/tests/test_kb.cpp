#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "kbe/errors.hpp"
#include "kbe/kb.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

std::vector<kbe::Fact> sorted_union(std::vector<kbe::Fact> a, const std::vector<kbe::Fact>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  return a;
}

// ten-member class fixture for the split tests; each member gets its own
// property footprint so leave-out has something to do
kbe::KnowledgeBase class_fixture(int props_per_member) {
  kbe::KnowledgeBase kb;
  for (int i = 0; i < 10; ++i) {
    std::string id = "m" + std::to_string(i);
    kb.add_fact(t::typed(id, "c"));
    for (int p = 0; p < props_per_member; ++p) {
      kb.add_fact(t::lit(id, "p" + std::to_string(p), "v" + std::to_string(i)));
    }
  }
  return kb;
}

}  // namespace

TEST_CASE("empty file loads to an empty kb", "[kb]") {
  t::TempDir dir;
  t::write_file(dir.file("empty.tsv"), "");
  kbe::KnowledgeBase kb = kbe::load_kb_tsv(dir.file("empty.tsv"));
  REQUIRE(kb.empty());
  REQUIRE(kb.fact_count() == 0);
  REQUIRE(kb.entities().empty());
  REQUIRE(kb.properties().empty());
  REQUIRE(kb.classes().empty());
  REQUIRE(kb.literals().empty());
}

TEST_CASE("single literal triple populates every index once", "[kb]") {
  t::TempDir dir;
  t::write_file(dir.file("one.tsv"), "e1\tp1\tx\tliteral\n");
  kbe::KnowledgeBase kb = kbe::load_kb(dir.file("one.tsv"), "tsv");
  REQUIRE(kb.entities() == std::set<std::string>{"e1"});
  REQUIRE(kb.properties() == std::set<std::string>{"p1"});
  REQUIRE(kb.literals() == std::set<std::string>{"x"});
  REQUIRE(kb.fact_count() == 1);
  REQUIRE(kb.classes().empty());
  REQUIRE(kb.values_of("e1") == std::set<std::string>{"x"});
  REQUIRE(kb.properties_of("e1") == std::set<std::string>{"p1"});
  REQUIRE(kb.types_of("e1").empty());
  REQUIRE(kb.is_long_tail("e1"));
}

TEST_CASE("ten-triple fixture matches a line-by-line recount", "[kb]") {
  std::vector<std::array<std::string, 4>> rows = {
      {"e1", "type", "person", "class"},
      {"e1", "name", "Ada", "literal"},
      {"e1", "knows", "e2", "entity"},
      {"e1", "born", "1815", "literal"},
      {"e2", "type", "person", "class"},
      {"e2", "name", "Charles", "literal"},
      {"e3", "type", "city", "class"},
      {"e3", "name", "London", "literal"},
      {"e2", "lived", "e3", "entity"},
      {"e3", "likes", "city", "class"},
  };
  std::string body;
  for (const auto& r : rows) body += r[0] + "\t" + r[1] + "\t" + r[2] + "\t" + r[3] + "\n";
  t::TempDir dir;
  t::write_file(dir.file("ten.tsv"), body);
  kbe::KnowledgeBase kb = kbe::load_kb_tsv(dir.file("ten.tsv"));

  // independent recount straight off the rows
  std::set<std::string> entities, properties, classes, literals;
  std::map<std::string, std::set<std::string>> type_index, value_index;
  for (const auto& r : rows) {
    entities.insert(r[0]);
    if (r[3] == "entity") entities.insert(r[2]);
    if (r[3] == "class") {
      classes.insert(r[2]);
      if (r[1] == "type") type_index[r[0]].insert(r[2]);
    }
    if (r[3] == "literal") literals.insert(r[2]);
    if (r[1] != "type") properties.insert(r[1]);
    value_index[r[0]].insert(r[2]);
  }
  REQUIRE(kb.fact_count() == rows.size());
  REQUIRE(kb.entities() == entities);
  REQUIRE(kb.properties() == properties);
  REQUIRE(kb.classes() == classes);
  REQUIRE(kb.literals() == literals);
  REQUIRE(kb.type_index() == type_index);
  REQUIRE(kb.value_index() == value_index);
  REQUIRE(kb.members_of_class("person") == std::vector<std::string>{"e1", "e2"});
  REQUIRE(kb.properties_of("e3") == std::set<std::string>{"likes", "name"});
}

TEST_CASE("escaped fields round trip byte-exactly", "[kb]") {
  kbe::KnowledgeBase kb = t::kb_from({
      t::lit("e\t1", "p\n1", "a\\b"),
      t::lit("e\t1", "p2", "line1\nline2"),
      t::rel("e\t1", "p3", "other"),
      t::typed("other", "c\\lass"),
  });
  t::TempDir dir;
  kbe::save_kb_tsv(kb, dir.file("kb.tsv"));
  kbe::KnowledgeBase back = kbe::load_kb_tsv(dir.file("kb.tsv"));
  REQUIRE(back == kb);
  kbe::save_kb_tsv(back, dir.file("again.tsv"));
  REQUIRE(t::read_file(dir.file("again.tsv")) == t::read_file(dir.file("kb.tsv")));

  kbe::save_kb(kb, dir.file("kb.jsonl"), "jsonl");
  REQUIRE(kbe::load_kb(dir.file("kb.jsonl"), "jsonl") == kb);
}

TEST_CASE("parse errors carry line numbers", "[kb]") {
  t::TempDir dir;
  t::write_file(dir.file("short.tsv"), "e1\tp1\tx\tliteral\ne2\tp1\ty\n");
  REQUIRE_THROWS_MATCHES(kbe::load_kb_tsv(dir.file("short.tsv")), kbe::ParseError,
                         MessageMatches(ContainsSubstring(":2: expected 4 tab-separated fields, got 3")));

  t::write_file(dir.file("kind.tsv"), "e1\tp1\tx\tblob\n");
  REQUIRE_THROWS_MATCHES(kbe::load_kb_tsv(dir.file("kind.tsv")), kbe::ParseError,
                         MessageMatches(ContainsSubstring("unknown object kind 'blob'")));

  t::write_file(dir.file("dangle.tsv"), "e1\tp1\tx\\\tliteral\n");
  REQUIRE_THROWS_MATCHES(kbe::load_kb_tsv(dir.file("dangle.tsv")), kbe::ParseError,
                         MessageMatches(ContainsSubstring("dangling backslash")));

  t::write_file(dir.file("badesc.tsv"), "e1\tp1\tx\\qy\tliteral\n");
  REQUIRE_THROWS_MATCHES(kbe::load_kb_tsv(dir.file("badesc.tsv")), kbe::ParseError,
                         MessageMatches(ContainsSubstring("bad escape")));

  t::write_file(dir.file("bad.jsonl"), "{not json\n");
  REQUIRE_THROWS_MATCHES(kbe::load_kb_jsonl(dir.file("bad.jsonl")), kbe::ParseError,
                         MessageMatches(ContainsSubstring(":1:")));
  t::write_file(dir.file("missing.jsonl"), R"({"subject":"e1","property":"p1","object":"x"})"
                                           "\n");
  REQUIRE_THROWS_MATCHES(kbe::load_kb_jsonl(dir.file("missing.jsonl")), kbe::ParseError,
                         MessageMatches(ContainsSubstring("missing string field 'kind'")));

  REQUIRE_THROWS_MATCHES(kbe::load_kb(dir.file("short.tsv"), "xml"), kbe::ConfigError,
                         MessageMatches(ContainsSubstring("unknown kb format 'xml'")));
  REQUIRE_THROWS_AS(kbe::load_kb_tsv(dir.file("nope.tsv")), kbe::DataError);
}

TEST_CASE("duplicate triples are rejected regardless of label", "[kb]") {
  kbe::KnowledgeBase kb;
  kbe::Fact f = t::lit("e1", "p1", "x");
  REQUIRE(kb.add_fact(f));
  REQUIRE_FALSE(kb.add_fact(f));
  kbe::Fact relabeled = f;
  relabeled.label = true;
  REQUIRE_FALSE(kb.add_fact(relabeled));
  REQUIRE(kb.fact_count() == 1);
  REQUIRE(kb.contains(f));
}

TEST_CASE("type and range rows shape the indices", "[kb]") {
  kbe::KnowledgeBase kb = t::kb_from({
      t::typed("e1", "c1"),
      t::lit("e1", "p1", "x"),
      t::cls("p1", "range", "c2"),  // schema row about p1, not an entity fact
      t::cls("e2", "likes", "c3"),  // class-valued payload property
  });
  REQUIRE(kb.entities() == std::set<std::string>{"e1", "e2"});
  REQUIRE(kb.properties() == std::set<std::string>{"likes", "p1"});
  REQUIRE(kb.classes() == std::set<std::string>{"c1", "c2", "c3"});
  REQUIRE(kb.types_of("e1") == std::set<std::string>{"c1"});
  REQUIRE(kb.types_of("e2").empty());
  // the type object shows up as a value, the range object does not
  REQUIRE(kb.values_of("e1") == std::set<std::string>{"c1", "x"});
  REQUIRE(kb.values_of("p1").empty());
  REQUIRE(kb.properties_of("e1") == std::set<std::string>{"p1"});
  REQUIRE(kb.properties_of("e2") == std::set<std::string>{"likes"});
}

TEST_CASE("long-tail cutoff sits at five distinct properties", "[kb]") {
  std::vector<kbe::Fact> five, six;
  for (int p = 0; p < 6; ++p) {
    kbe::Fact f = t::lit("e", "p" + std::to_string(p), "v");
    if (p < 5) five.push_back(f);
    six.push_back(f);
  }
  five.push_back(t::typed("e", "c"));
  six.push_back(t::typed("e", "c"));
  REQUIRE(t::kb_from(five).is_long_tail("e"));
  REQUIRE_FALSE(t::kb_from(six).is_long_tail("e"));
}

TEST_CASE("rebuilding indices reproduces derived state exactly", "[kb]") {
  for (std::uint64_t seed : {3u, 17u, 99u}) {
    kbe::KnowledgeBase kb = t::random_kb(seed);
    auto entities = kb.entities();
    auto properties = kb.properties();
    auto classes = kb.classes();
    auto literals = kb.literals();
    auto types = kb.type_index();
    auto values = kb.value_index();
    kb.rebuild_indices();
    REQUIRE(kb.entities() == entities);
    REQUIRE(kb.properties() == properties);
    REQUIRE(kb.classes() == classes);
    REQUIRE(kb.literals() == literals);
    REQUIRE(kb.type_index() == types);
    REQUIRE(kb.value_index() == values);

    // insertion order must not matter
    std::vector<kbe::Fact> facts(kb.facts().begin(), kb.facts().end());
    std::reverse(facts.begin(), facts.end());
    kbe::KnowledgeBase again = t::kb_from(facts);
    REQUIRE(again == kb);
    t::TempDir dir;
    kbe::save_kb_tsv(kb, dir.file("a.tsv"));
    kbe::save_kb_tsv(again, dir.file("b.tsv"));
    REQUIRE(t::read_file(dir.file("a.tsv")) == t::read_file(dir.file("b.tsv")));
  }
}

TEST_CASE("closure invariant holds on random kbs", "[kb]") {
  for (std::uint64_t seed : {5u, 21u, 42u}) {
    kbe::KnowledgeBase kb = t::random_kb(seed);
    for (const kbe::Fact& f : kb.facts()) {
      REQUIRE(kb.entities().count(f.subject) == 1);
      if (f.property == kbe::kTypeProperty) {
        REQUIRE(kb.classes().count(f.object.text) == 1);
        continue;
      }
      REQUIRE(kb.properties().count(f.property) == 1);
      switch (f.object.kind) {
        case kbe::ValueKind::Entity:
          REQUIRE(kb.entities().count(f.object.text) == 1);
          break;
        case kbe::ValueKind::Class:
          REQUIRE(kb.classes().count(f.object.text) == 1);
          break;
        case kbe::ValueKind::Literal:
          REQUIRE(kb.literals().count(f.object.text) == 1);
          break;
      }
    }
  }
}

TEST_CASE("leave_n_out keeps everything when n covers the entity", "[kb]") {
  kbe::KnowledgeBase kb = t::kb_from({
      t::typed("e", "c"),
      t::lit("e", "p0", "a"),
      t::lit("e", "p1", "b"),
      t::lit("e", "p2", "c"),
  });
  kbe::LeaveOutResult lo = kbe::leave_n_out(kb, "e", 5, 7);
  REQUIRE(lo.removed.empty());
  REQUIRE(lo.removed_properties.empty());
  REQUIRE(lo.kept.size() == 4);  // type fact rides along
}

TEST_CASE("leave_n_out partitions an eight-property entity", "[kb]") {
  std::vector<kbe::Fact> facts{t::typed("e", "c")};
  for (int p = 0; p < 8; ++p) {
    facts.push_back(t::lit("e", "p" + std::to_string(p), "v" + std::to_string(p)));
    facts.push_back(t::lit("e", "p" + std::to_string(p), "w" + std::to_string(p)));
  }
  kbe::KnowledgeBase kb = t::kb_from(facts);
  kbe::LeaveOutResult lo = kbe::leave_n_out(kb, "e", 5, 123);

  std::set<std::string> kept_props;
  bool kept_type = false;
  for (const kbe::Fact& f : lo.kept) {
    if (f.property == kbe::kTypeProperty) {
      kept_type = true;
    } else {
      kept_props.insert(f.property);
    }
  }
  REQUIRE(kept_type);
  REQUIRE(kept_props.size() == 5);
  REQUIRE(lo.removed_properties.size() == 3);
  for (const std::string& p : lo.removed_properties) REQUIRE(kept_props.count(p) == 0);
  for (const kbe::Fact& f : lo.removed) REQUIRE(lo.removed_properties.count(f.property) == 1);

  // kept + removed = the entity's facts, disjointly
  std::vector<kbe::Fact> all;
  for (const kbe::Fact* f : kb.facts_of("e")) all.push_back(*f);
  std::sort(all.begin(), all.end());
  REQUIRE(sorted_union(lo.kept, lo.removed) == all);

  kbe::LeaveOutResult again = kbe::leave_n_out(kb, "e", 5, 123);
  REQUIRE(again.kept == lo.kept);
  REQUIRE(again.removed == lo.removed);
  REQUIRE(kbe::leave_n_out(kb, "e", 5, 124).removed_properties != lo.removed_properties);
}

TEST_CASE("leave_n_out partition holds across random kbs and seeds", "[kb]") {
  for (std::uint64_t seed : {1u, 8u, 33u}) {
    kbe::KnowledgeBase kb = t::random_kb(seed);
    for (const std::string& e : kb.entities()) {
      if (kb.properties_of(e).empty()) continue;
      for (std::uint64_t s = 0; s < 5; ++s) {
        kbe::LeaveOutResult lo = kbe::leave_n_out(kb, e, 2, s);
        std::vector<kbe::Fact> all;
        for (const kbe::Fact* f : kb.facts_of(e)) all.push_back(*f);
        std::sort(all.begin(), all.end());
        REQUIRE(sorted_union(lo.kept, lo.removed) == all);
        for (const kbe::Fact& f : lo.kept) {
          REQUIRE(lo.removed_properties.count(f.property) == 0);
        }
      }
    }
  }
}

TEST_CASE("leave_n_out rejects bad input", "[kb]") {
  kbe::KnowledgeBase kb = t::kb_from({t::typed("only_typed", "c"), t::lit("e", "p", "v")});
  REQUIRE_THROWS_AS(kbe::leave_n_out(kb, "e", 0, 1), kbe::ConfigError);
  REQUIRE_THROWS_MATCHES(kbe::leave_n_out(kb, "ghost", 5, 1), kbe::DataError,
                         MessageMatches(ContainsSubstring("unknown entity 'ghost'")));
  REQUIRE_THROWS_MATCHES(kbe::leave_n_out(kb, "only_typed", 5, 1), kbe::DataError,
                         MessageMatches(ContainsSubstring("has no properties")));
}

TEST_CASE("split boundary puts every member in test", "[kb]") {
  kbe::KnowledgeBase kb = class_fixture(2);
  kbe::DatasetSplit split = kbe::sample_synthetic_split(kb, "c", 0, 0, 10, 5);
  REQUIRE(split.train.empty());
  REQUIRE(split.validation.empty());
  REQUIRE(split.test == kb.members_of_class("c"));
  REQUIRE(split.removed.size() == 10);
  REQUIRE(split.kept.size() == 10);
}

TEST_CASE("split is deterministic disjoint and sized", "[kb]") {
  kbe::KnowledgeBase kb = class_fixture(8);
  kbe::DatasetSplit a = kbe::sample_synthetic_split(kb, "c", 4, 2, 4, 9);
  kbe::DatasetSplit b = kbe::sample_synthetic_split(kb, "c", 4, 2, 4, 9);
  REQUIRE(a.train == b.train);
  REQUIRE(a.validation == b.validation);
  REQUIRE(a.test == b.test);
  REQUIRE(a.train.size() == 4);
  REQUIRE(a.validation.size() == 2);
  REQUIRE(a.test.size() == 4);

  std::set<std::string> seen;
  for (const auto& part : {a.train, a.validation, a.test}) {
    for (const std::string& e : part) REQUIRE(seen.insert(e).second);
  }
  for (const std::string& e : a.test) {
    const auto& held = a.removed.at(e);
    REQUIRE(held.properties.size() == 3);  // 8 props, keep 5
    std::set<std::string> kept_props;
    for (const kbe::Fact& f : a.kept.at(e)) {
      if (f.property != kbe::kTypeProperty) kept_props.insert(f.property);
    }
    REQUIRE(kept_props.size() == 5);
    for (const std::string& p : held.properties) REQUIRE(kept_props.count(p) == 0);
    REQUIRE(b.removed.at(e).properties == held.properties);
  }

  REQUIRE_THROWS_AS(kbe::sample_synthetic_split(kb, "c", -1, 0, 4, 9), kbe::ConfigError);
  REQUIRE_THROWS_AS(kbe::sample_synthetic_split(kb, "c", 0, 0, 0, 9), kbe::ConfigError);
  REQUIRE_THROWS_MATCHES(kbe::sample_synthetic_split(kb, "c", 8, 2, 4, 9), kbe::DataError,
                         MessageMatches(ContainsSubstring("class 'c' has 10 members, need 14")));
}

TEST_CASE("split inclusion frequencies follow the sampling design", "[kb]") {
  kbe::KnowledgeBase kb = class_fixture(2);
  std::vector<std::string> members = kb.members_of_class("c");
  std::map<std::string, int> test_count, train_count;
  const int draws = 100;
  for (int s = 1; s <= draws; ++s) {
    kbe::DatasetSplit split =
        kbe::sample_synthetic_split(kb, "c", 4, 2, 4, static_cast<std::uint64_t>(s));
    for (const std::string& e : split.test) ++test_count[e];
    for (const std::string& e : split.train) ++train_count[e];
  }
  // each entity lands in a 4-of-10 part with p=0.4; 3 sigma around 40 of 100
  double sigma = std::sqrt(draws * 0.4 * 0.6);
  for (const std::string& e : members) {
    REQUIRE(std::fabs(test_count[e] - 40.0) <= 3.0 * sigma);
    REQUIRE(std::fabs(train_count[e] - 40.0) <= 3.0 * sigma);
  }
}

TEST_CASE("training kb merges kept facts with train and validation", "[kb]") {
  kbe::KnowledgeBase kb = class_fixture(8);
  kbe::DatasetSplit split = kbe::sample_synthetic_split(kb, "c", 5, 2, 3, 31);
  kbe::KnowledgeBase train = kbe::training_kb(kb, split);

  for (const std::string& e : split.train) {
    for (const kbe::Fact* f : kb.facts_of(e)) REQUIRE(train.contains(*f));
  }
  for (const std::string& e : split.validation) {
    for (const kbe::Fact* f : kb.facts_of(e)) REQUIRE(train.contains(*f));
  }
  std::size_t expected = 0;
  for (const std::string& e : split.train) expected += kb.facts_of(e).size();
  for (const std::string& e : split.validation) expected += kb.facts_of(e).size();
  for (const std::string& e : split.test) {
    expected += split.kept.at(e).size();
    for (const kbe::Fact& f : split.kept.at(e)) REQUIRE(train.contains(f));
    for (const kbe::Fact& f : split.removed.at(e).facts) REQUIRE_FALSE(train.contains(f));
  }
  REQUIRE(train.fact_count() == expected);
}
