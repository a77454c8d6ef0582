// Shared test fixtures: fact/claim shorthands, scratch directories, file
// helpers and a small random-KB generator with enough collisions to exercise
// shared types, properties and values.
#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kbe/kb.hpp"
#include "kbe/rng.hpp"
#include "kbe/source_sim.hpp"

namespace t {

inline kbe::Fact lit(std::string s, std::string p, std::string o) {
  return kbe::make_fact(std::move(s), std::move(p), kbe::ValueKind::Literal, std::move(o));
}

inline kbe::Fact rel(std::string s, std::string p, std::string o) {
  return kbe::make_fact(std::move(s), std::move(p), kbe::ValueKind::Entity, std::move(o));
}

inline kbe::Fact cls(std::string s, std::string p, std::string o) {
  return kbe::make_fact(std::move(s), std::move(p), kbe::ValueKind::Class, std::move(o));
}

inline kbe::Fact typed(std::string s, std::string c) {
  return cls(std::move(s), kbe::kTypeProperty, std::move(c));
}

inline kbe::KnowledgeBase kb_from(const std::vector<kbe::Fact>& facts) {
  kbe::KnowledgeBase kb;
  for (const kbe::Fact& f : facts) kb.add_fact(f);
  return kb;
}

inline kbe::Claim claim(std::string subject, std::string property, std::string value,
                        std::string source, double obs) {
  return {lit(std::move(subject), std::move(property), std::move(value)), std::move(source), obs};
}

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("kbe-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Entities draw types, properties and values from small pools so overlaps
// occur; every entity carries at least one payload fact.
inline kbe::KnowledgeBase random_kb(std::uint64_t seed, int n_entities = 12, int n_properties = 6,
                                    int n_classes = 3, int n_values = 8) {
  kbe::Rng rng(seed);
  kbe::KnowledgeBase kb;
  for (int e = 0; e < n_entities; ++e) {
    std::string id = "e" + std::to_string(e);
    if (rng.uniform01() < 0.8) {
      kb.add_fact(typed(id, "c" + std::to_string(rng.below_int(n_classes))));
    }
    int nf = 1 + rng.below_int(n_properties);
    for (int i = 0; i < nf; ++i) {
      kb.add_fact(lit(id, "p" + std::to_string(rng.below_int(n_properties)),
                      "v" + std::to_string(rng.below_int(n_values))));
    }
    if (rng.uniform01() < 0.25) {
      kb.add_fact(rel(id, "linked", "e" + std::to_string(rng.below_int(n_entities))));
    }
  }
  return kb;
}

}  // namespace t
