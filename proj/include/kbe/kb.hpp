// Knowledge-base model: facts over entities, properties, classes and literals,
// with the derived indices the rest of the pipeline leans on, plus TSV / JSON
// Lines persistence and the entity split / leave-n-out sampling used by the
// evaluation protocol.
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "kbe/errors.hpp"
#include "kbe/rng.hpp"

namespace kbe {

// Entities with at most this many distinct properties count as long-tail.
inline constexpr int kLongTailMaxProperties = 5;

// Property-id conventions used by write-back and the protocol generator.
inline constexpr const char* kTypeProperty = "type";
inline constexpr const char* kNameProperty = "name";
inline constexpr const char* kRangeProperty = "range";

enum class ValueKind { Entity, Class, Literal };

inline const char* to_string(ValueKind k) {
  switch (k) {
    case ValueKind::Entity: return "entity";
    case ValueKind::Class: return "class";
    case ValueKind::Literal: return "literal";
  }
  return "literal";
}

inline ValueKind value_kind_from_string(const std::string& s) {
  if (s == "entity") return ValueKind::Entity;
  if (s == "class") return ValueKind::Class;
  if (s == "literal") return ValueKind::Literal;
  throw ParseError("unknown object kind '" + s + "'");
}

struct Value {
  ValueKind kind = ValueKind::Literal;
  std::string text;

  friend bool operator==(const Value& a, const Value& b) {
    return a.kind == b.kind && a.text == b.text;
  }
  friend bool operator<(const Value& a, const Value& b) {
    return std::tie(a.kind, a.text) < std::tie(b.kind, b.text);
  }
};

struct Fact {
  std::string subject;
  std::string property;
  Value object;
  std::optional<bool> label;  // verification outcome; not part of identity

  friend bool operator==(const Fact& a, const Fact& b) {
    return a.subject == b.subject && a.property == b.property && a.object == b.object;
  }
  friend bool operator<(const Fact& a, const Fact& b) {
    return std::tie(a.subject, a.property, a.object) <
           std::tie(b.subject, b.property, b.object);
  }
};

inline Fact make_fact(std::string subject, std::string property, ValueKind kind,
                      std::string text) {
  return Fact{std::move(subject), std::move(property), Value{kind, std::move(text)}, {}};
}

class KnowledgeBase {
 public:
  // Facts are the source of truth; everything else is an index over them.
  // Stored sorted, which doubles as the canonical serialization order.
  const std::set<Fact>& facts() const { return facts_; }
  const std::set<std::string>& entities() const { return entities_; }
  const std::set<std::string>& properties() const { return properties_; }
  const std::set<std::string>& classes() const { return classes_; }
  const std::set<std::string>& literals() const { return literals_; }
  const std::map<std::string, std::set<std::string>>& type_index() const { return type_index_; }
  const std::map<std::string, std::set<std::string>>& value_index() const { return value_index_; }

  std::size_t fact_count() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }

  bool has_entity(const std::string& id) const { return entities_.count(id) > 0; }
  bool contains(const Fact& f) const { return facts_.count(f) > 0; }

  // False if the (subject, property, object) triple is already present.
  bool add_fact(const Fact& f) {
    auto [it, fresh] = facts_.insert(f);
    if (!fresh) return false;
    index_fact(*it);
    return true;
  }

  const std::set<std::string>& types_of(const std::string& entity) const {
    return lookup(type_index_, entity);
  }
  const std::set<std::string>& values_of(const std::string& entity) const {
    return lookup(value_index_, entity);
  }
  const std::set<std::string>& properties_of(const std::string& entity) const {
    return lookup(used_properties_, entity);
  }
  std::vector<const Fact*> facts_of(const std::string& entity) const {
    auto it = facts_by_subject_.find(entity);
    if (it == facts_by_subject_.end()) return {};
    return it->second;
  }

  bool is_long_tail(const std::string& entity) const {
    return static_cast<int>(properties_of(entity).size()) <= kLongTailMaxProperties;
  }

  // Entities carrying the given class in their type set, in id order.
  std::vector<std::string> members_of_class(const std::string& class_id) const {
    std::vector<std::string> out;
    for (const auto& [entity, types] : type_index_) {
      if (types.count(class_id)) out.push_back(entity);
    }
    return out;
  }

  void rebuild_indices() {
    entities_.clear();
    properties_.clear();
    classes_.clear();
    literals_.clear();
    type_index_.clear();
    value_index_.clear();
    used_properties_.clear();
    facts_by_subject_.clear();
    for (const Fact& f : facts_) index_fact(f);
  }

  friend bool operator==(const KnowledgeBase& a, const KnowledgeBase& b) {
    return a.facts_ == b.facts_;
  }

 private:
  static const std::set<std::string>& lookup(
      const std::map<std::string, std::set<std::string>>& m, const std::string& key) {
    static const std::set<std::string> empty;
    auto it = m.find(key);
    return it == m.end() ? empty : it->second;
  }

  void index_fact(const Fact& f) {
    // Range declarations are schema rows about a property, not statements
    // about an entity; they only contribute the class id.
    if (f.property == kRangeProperty && f.object.kind == ValueKind::Class) {
      classes_.insert(f.object.text);
      return;
    }
    entities_.insert(f.subject);
    switch (f.object.kind) {
      case ValueKind::Entity:
        entities_.insert(f.object.text);
        break;
      case ValueKind::Class:
        classes_.insert(f.object.text);
        if (f.property == kTypeProperty) type_index_[f.subject].insert(f.object.text);
        break;
      case ValueKind::Literal:
        literals_.insert(f.object.text);
        break;
    }
    value_index_[f.subject].insert(f.object.text);
    // Class membership is structural, not a payload property: it stays out of
    // the property universe that ranking, similarity and leave-n-out see.
    if (f.property != kTypeProperty) {
      properties_.insert(f.property);
      used_properties_[f.subject].insert(f.property);
    }
    facts_by_subject_[f.subject].push_back(&f);
  }

  std::set<Fact> facts_;
  std::set<std::string> entities_, properties_, classes_, literals_;
  std::map<std::string, std::set<std::string>> type_index_;
  std::map<std::string, std::set<std::string>> value_index_;
  std::map<std::string, std::set<std::string>> used_properties_;
  std::map<std::string, std::vector<const Fact*>> facts_by_subject_;
};

// ---- TSV persistence: subject \t property \t object \t kind, one fact per
// line, with \t, \n and \\ escaped so round-trips are byte-exact.

inline std::string escape_field(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_field(const std::string& s, const std::string& where) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) throw ParseError(where + ": dangling backslash");
    char c = s[++i];
    switch (c) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case '\\': out += '\\'; break;
      default: throw ParseError(where + ": bad escape '\\" + std::string(1, c) + "'");
    }
  }
  return out;
}

inline void save_kb_tsv(const KnowledgeBase& kb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const Fact& f : kb.facts()) {
    out << escape_field(f.subject) << '\t' << escape_field(f.property) << '\t'
        << escape_field(f.object.text) << '\t' << to_string(f.object.kind) << '\n';
  }
}

inline KnowledgeBase load_kb_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  KnowledgeBase kb;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(line_no);
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        parts.push_back(line.substr(start));
        break;
      }
      parts.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (parts.size() != 4) {
      throw ParseError(where + ": expected 4 tab-separated fields, got " +
                       std::to_string(parts.size()));
    }
    ValueKind kind;
    try {
      kind = value_kind_from_string(unescape_field(parts[3], where));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    kb.add_fact(make_fact(unescape_field(parts[0], where), unescape_field(parts[1], where),
                          kind, unescape_field(parts[2], where)));
  }
  return kb;
}

// ---- JSON Lines persistence: one {"subject", "property", "object", "kind"}
// object per line.

inline void save_kb_jsonl(const KnowledgeBase& kb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const Fact& f : kb.facts()) {
    nlohmann::ordered_json j;
    j["subject"] = f.subject;
    j["property"] = f.property;
    j["object"] = f.object.text;
    j["kind"] = to_string(f.object.kind);
    out << j.dump() << '\n';
  }
}

inline KnowledgeBase load_kb_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  KnowledgeBase kb;
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
    for (const char* key : {"subject", "property", "object", "kind"}) {
      if (!j.contains(key) || !j[key].is_string()) {
        throw ParseError(where + ": missing string field '" + key + "'");
      }
    }
    ValueKind kind;
    try {
      kind = value_kind_from_string(j["kind"].get<std::string>());
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    kb.add_fact(make_fact(j["subject"].get<std::string>(), j["property"].get<std::string>(),
                          kind, j["object"].get<std::string>()));
  }
  return kb;
}

inline KnowledgeBase load_kb(const std::string& path, const std::string& format) {
  if (format == "tsv") return load_kb_tsv(path);
  if (format == "jsonl") return load_kb_jsonl(path);
  throw ConfigError("unknown kb format '" + format + "' (expected tsv or jsonl)");
}

inline void save_kb(const KnowledgeBase& kb, const std::string& path,
                    const std::string& format) {
  if (format == "tsv") return save_kb_tsv(kb, path);
  if (format == "jsonl") return save_kb_jsonl(kb, path);
  throw ConfigError("unknown kb format '" + format + "' (expected tsv or jsonl)");
}

// ---- Entity sampling for the evaluation protocol.

struct LeaveOutResult {
  std::vector<Fact> kept;
  std::set<std::string> removed_properties;
  std::vector<Fact> removed;
};

// Keeps facts of n randomly chosen distinct properties of the entity and
// removes the rest, making the entity look long-tail. Class memberships are
// always kept so the entity stays in its class.
inline LeaveOutResult leave_n_out(const KnowledgeBase& kb, const std::string& entity, int n,
                                  std::uint64_t seed) {
  if (n < 1) throw ConfigError("leave_n_out: n must be >= 1");
  if (!kb.has_entity(entity)) throw DataError("leave_n_out: unknown entity '" + entity + "'");
  const auto& used = kb.properties_of(entity);
  if (used.empty()) throw DataError("leave_n_out: entity '" + entity + "' has no properties");
  std::vector<std::string> props(used.begin(), used.end());
  Rng rng(seed);
  rng.shuffle(props);
  std::set<std::string> keep(props.begin(),
                             props.begin() + std::min<std::size_t>(props.size(),
                                                                   static_cast<std::size_t>(n)));
  LeaveOutResult out;
  for (const Fact* f : kb.facts_of(entity)) {
    if (f->property == kTypeProperty || keep.count(f->property)) {
      out.kept.push_back(*f);
    } else {
      out.removed_properties.insert(f->property);
      out.removed.push_back(*f);
    }
  }
  return out;
}

struct DatasetSplit {
  std::vector<std::string> train, validation, test;
  struct HeldOut {
    std::set<std::string> properties;
    std::vector<Fact> facts;
  };
  std::map<std::string, HeldOut> removed;        // per test entity
  std::map<std::string, std::vector<Fact>> kept; // per test entity
};

// Samples disjoint train/validation/test entities of one class and applies
// leave-kLongTailMaxProperties-out to each test entity.
inline DatasetSplit sample_synthetic_split(const KnowledgeBase& kb, const std::string& class_id,
                                           int n_train, int n_val, int n_test,
                                           std::uint64_t seed) {
  if (n_train < 0 || n_val < 0 || n_test < 1) {
    throw ConfigError("sample_synthetic_split: bad split sizes");
  }
  std::vector<std::string> members = kb.members_of_class(class_id);
  std::size_t need = static_cast<std::size_t>(n_train) + n_val + n_test;
  if (members.size() < need) {
    throw DataError("class '" + class_id + "' has " + std::to_string(members.size()) +
                    " members, need " + std::to_string(need));
  }
  Rng rng(seed);
  rng.shuffle(members);
  DatasetSplit split;
  auto take = [&](int offset, int count) {
    std::vector<std::string> out(members.begin() + offset, members.begin() + offset + count);
    std::sort(out.begin(), out.end());
    return out;
  };
  split.train = take(0, n_train);
  split.validation = take(n_train, n_val);
  split.test = take(n_train + n_val, n_test);
  for (const std::string& entity : split.test) {
    LeaveOutResult lo =
        leave_n_out(kb, entity, kLongTailMaxProperties, derive_seed(seed, "leave:" + entity));
    split.removed[entity] = {lo.removed_properties, lo.removed};
    split.kept[entity] = lo.kept;
  }
  return split;
}

// Training KB for a split: all facts of train/validation entities plus only
// the kept facts of test entities.
inline KnowledgeBase training_kb(const KnowledgeBase& kb, const DatasetSplit& split) {
  KnowledgeBase out;
  for (const std::string& e : split.train) {
    for (const Fact* f : kb.facts_of(e)) out.add_fact(*f);
  }
  for (const std::string& e : split.validation) {
    for (const Fact* f : kb.facts_of(e)) out.add_fact(*f);
  }
  for (const auto& [entity, kept] : split.kept) {
    for (const Fact& f : kept) out.add_fact(f);
  }
  return out;
}

}  // namespace kbe
