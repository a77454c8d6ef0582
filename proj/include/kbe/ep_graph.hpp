// Entity-property graph: bipartite usage edges plus directed entity->entity
// edges to each entity's top-k most similar peers. Node indices follow sorted
// id order so rebuilds are reproducible.
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbe/errors.hpp"
#include "kbe/kb.hpp"
#include "kbe/similarity.hpp"

namespace kbe {

struct EntityPropertyGraph {
  std::vector<std::string> entity_ids;    // sorted
  std::vector<std::string> property_ids;  // sorted
  std::map<std::string, int> entity_index;
  std::map<std::string, int> property_index;

  std::vector<std::vector<int>> entity_props;     // per entity: used property nodes
  std::vector<std::vector<int>> prop_entities;    // per property: using entity nodes
  std::vector<std::vector<int>> entity_neighbors; // per entity: similar entity nodes

  int k = 0;
  bool symmetrized = false;
  SimilarityWeights weights;

  int n_entities() const { return static_cast<int>(entity_ids.size()); }
  int n_properties() const { return static_cast<int>(property_ids.size()); }

  std::size_t usage_edge_count() const {
    std::size_t n = 0;
    for (const auto& v : entity_props) n += v.size();
    return n;
  }

  int require_entity(const std::string& id) const {
    auto it = entity_index.find(id);
    if (it == entity_index.end()) throw DataError("graph: unknown entity '" + id + "'");
    return it->second;
  }

  void rebuild_lookup() {
    entity_index.clear();
    property_index.clear();
    for (int i = 0; i < n_entities(); ++i) entity_index[entity_ids[i]] = i;
    for (int j = 0; j < n_properties(); ++j) property_index[property_ids[j]] = j;
    prop_entities.assign(property_ids.size(), {});
    for (int i = 0; i < n_entities(); ++i) {
      for (int j : entity_props[static_cast<std::size_t>(i)]) {
        prop_entities[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }
};

inline EntityPropertyGraph build_graph(const KnowledgeBase& kb, const SimilarityWeights& weights,
                                       int k, bool symmetrize_ee = false) {
  if (kb.empty()) throw DataError("build_graph: empty knowledge base");
  if (k < 0) throw ConfigError("build_graph: k must be >= 0");
  weights.validate();

  EntityPropertyGraph g;
  g.k = k;
  g.symmetrized = symmetrize_ee;
  g.weights = weights;
  g.entity_ids.assign(kb.entities().begin(), kb.entities().end());
  g.property_ids.assign(kb.properties().begin(), kb.properties().end());
  for (int i = 0; i < g.n_entities(); ++i) g.entity_index[g.entity_ids[i]] = i;
  for (int j = 0; j < g.n_properties(); ++j) g.property_index[g.property_ids[j]] = j;

  g.entity_props.assign(g.entity_ids.size(), {});
  g.prop_entities.assign(g.property_ids.size(), {});
  for (int i = 0; i < g.n_entities(); ++i) {
    for (const std::string& p : kb.properties_of(g.entity_ids[static_cast<std::size_t>(i)])) {
      int j = g.property_index.at(p);
      g.entity_props[static_cast<std::size_t>(i)].push_back(j);
      g.prop_entities[static_cast<std::size_t>(j)].push_back(i);
    }
  }

  g.entity_neighbors.assign(g.entity_ids.size(), {});
  if (k > 0 && g.n_entities() > 1) {
    CorpusStats st = CorpusStats::compute(kb);
    for (int i = 0; i < g.n_entities(); ++i) {
      auto top = top_k_neighbors(kb, st, weights, g.entity_ids[static_cast<std::size_t>(i)], k);
      for (const auto& [id, score] : top) {
        g.entity_neighbors[static_cast<std::size_t>(i)].push_back(g.entity_index.at(id));
      }
    }
    if (symmetrize_ee) {
      std::vector<std::vector<char>> present(
          g.entity_ids.size(), std::vector<char>(g.entity_ids.size(), 0));
      for (int i = 0; i < g.n_entities(); ++i) {
        for (int j : g.entity_neighbors[static_cast<std::size_t>(i)]) {
          present[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
        }
      }
      for (int i = 0; i < g.n_entities(); ++i) {
        for (int j = 0; j < g.n_entities(); ++j) {
          if (present[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
              !present[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
            present[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = 1;
          }
        }
      }
      for (int i = 0; i < g.n_entities(); ++i) {
        auto& nbrs = g.entity_neighbors[static_cast<std::size_t>(i)];
        nbrs.clear();
        for (int j = 0; j < g.n_entities(); ++j) {
          if (i != j && present[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
            nbrs.push_back(j);
          }
        }
      }
    }
  }
  return g;
}

inline nlohmann::ordered_json graph_to_json(const EntityPropertyGraph& g) {
  nlohmann::ordered_json j;
  j["format"] = "ep-graph";
  j["version"] = 1;
  j["k"] = g.k;
  j["symmetrize_ee"] = g.symmetrized;
  j["weights"] = {g.weights.alpha1, g.weights.alpha2, g.weights.alpha3};
  j["entities"] = g.entity_ids;
  j["properties"] = g.property_ids;
  j["entity_props"] = g.entity_props;
  j["entity_neighbors"] = g.entity_neighbors;
  return j;
}

inline EntityPropertyGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "ep-graph") {
    throw ParseError("graph file: not an ep-graph document");
  }
  if (j.value("version", 0) != 1) throw ParseError("graph file: unsupported version");
  EntityPropertyGraph g;
  try {
    g.k = j.at("k").get<int>();
    g.symmetrized = j.at("symmetrize_ee").get<bool>();
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != 3) throw ParseError("graph file: weights must have 3 entries");
    g.weights = SimilarityWeights{w[0], w[1], w[2]};
    g.entity_ids = j.at("entities").get<std::vector<std::string>>();
    g.property_ids = j.at("properties").get<std::vector<std::string>>();
    g.entity_props = j.at("entity_props").get<std::vector<std::vector<int>>>();
    g.entity_neighbors = j.at("entity_neighbors").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph file: ") + e.what());
  }
  if (g.entity_props.size() != g.entity_ids.size() ||
      g.entity_neighbors.size() != g.entity_ids.size()) {
    throw ParseError("graph file: adjacency size mismatch");
  }
  for (const auto& nbrs : g.entity_props) {
    for (int p : nbrs) {
      if (p < 0 || p >= static_cast<int>(g.property_ids.size())) {
        throw ParseError("graph file: property index out of range");
      }
    }
  }
  for (const auto& nbrs : g.entity_neighbors) {
    for (int e : nbrs) {
      if (e < 0 || e >= static_cast<int>(g.entity_ids.size())) {
        throw ParseError("graph file: entity index out of range");
      }
    }
  }
  g.rebuild_lookup();
  return g;
}

inline void save_graph(const EntityPropertyGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << graph_to_json(g).dump() << '\n';
}

inline EntityPropertyGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return graph_from_json(j);
}

}  // namespace kbe
