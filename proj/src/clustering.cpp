#include "nerclust/clustering.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <unordered_map>

#include "json.hpp"
#include "nerclust/error.hpp"
#include "nerclust/random.hpp"
#include "nerclust/text.hpp"

namespace nerclust {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ListKind kind) {
  switch (kind) {
    case ListKind::Persons: return "P";
    case ListKind::Organizations: return "O";
    case ListKind::Combined: return "PO";
  }
  return "?";
}

std::string ListVariant::name() const { return "T" + std::to_string(n) + "_" + std::string(to_string(kind)); }

ListVariant ListVariant::parse(std::string_view name) {
  const auto bad = [&] {
    return Error("malformed list variant '" + std::string(name) + "' (expected T<n>_P, T<n>_O or T<n>_PO)");
  };
  if (name.size() < 4 || name[0] != 'T') throw bad();
  const auto underscore = name.find('_');
  if (underscore == std::string_view::npos || underscore < 2) throw bad();
  const auto digits = name.substr(1, underscore - 1);
  if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) throw bad();
  ListVariant v;
  v.n = std::stoul(std::string(digits));
  const auto kind = name.substr(underscore + 1);
  if (kind == "P") {
    v.kind = ListKind::Persons;
  } else if (kind == "O") {
    v.kind = ListKind::Organizations;
  } else if (kind == "PO") {
    v.kind = ListKind::Combined;
  } else {
    throw bad();
  }
  if (v.n == 0) throw bad();
  return v;
}

std::vector<ListVariant> default_list_variants() {
  return {{ListKind::Persons, 100},
          {ListKind::Persons, 200},
          {ListKind::Organizations, 100},
          {ListKind::Organizations, 200},
          {ListKind::Combined, 100}};
}

TopList rank_entities(const TokenCorpus& corpus, ListKind kind, std::size_t n) {
  if (n == 0) throw Error("top list size must be >= 1");
  std::unordered_map<std::string, std::uint64_t> df;
  for (const auto& doc : corpus) {
    std::vector<std::string_view> seen;
    for (const auto& tok : doc.tokens) {
      if (is_entity_token(tok)) seen.push_back(tok);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto tok : seen) ++df[std::string(tok)];
  }

  auto top = [&](bool persons, std::vector<std::string>& warnings) {
    std::vector<TopListEntry> all;
    for (const auto& [tok, count] : df) {
      if (persons ? is_person_token(tok) : is_organization_token(tok)) all.push_back({tok, count});
    }
    std::sort(all.begin(), all.end(), [](const TopListEntry& a, const TopListEntry& b) {
      if (a.document_frequency != b.document_frequency) return a.document_frequency > b.document_frequency;
      return a.token < b.token;
    });
    if (all.size() < n) {
      warnings.push_back("requested top " + std::to_string(n) + (persons ? " persons" : " organizations") +
                         " but only " + std::to_string(all.size()) + " exist");
    } else {
      all.resize(n);
    }
    return all;
  };

  TopList list;
  list.kind = kind;
  list.n_requested = n;
  if (kind != ListKind::Organizations) list.entries = top(true, list.warnings);
  if (kind != ListKind::Persons) {
    auto orgs = top(false, list.warnings);
    list.entries.insert(list.entries.end(), orgs.begin(), orgs.end());
  }
  return list;
}

SimilarityMatrix build_matrix(const std::vector<std::string>& entities, const EmbeddingModel& model) {
  std::vector<std::span<const float>> vectors;
  for (const auto& e : entities) {
    if (!model.vocab.contains(e)) {
      throw Error("entity \"" + e + "\" is missing from the embedding vocabulary (lower min_count or shrink the list)");
    }
    vectors.push_back(model.vector(e));
  }
  SimilarityMatrix m;
  m.entities = entities;
  const std::size_t n = entities.size();
  m.values = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = cosine(vectors[i], vectors[j]);
      m.values(i, j) = c;
      m.values(j, i) = c;
    }
  }
  return m;
}

SimilarityMatrix build_matrix(const TopList& top_list, const EmbeddingModel& model) {
  std::vector<std::string> tokens;
  for (const auto& e : top_list.entries) tokens.push_back(e.token);
  return build_matrix(tokens, model);
}

std::size_t choose_k(std::size_t n_entities) {
  if (n_entities < 1) throw Error("choose_k needs at least one entity");
  return std::max<std::size_t>(1, n_entities / 10);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::vector<std::size_t>> Clustering::members() const {
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t p = 0; p < assignment.size(); ++p) out[assignment[p]].push_back(p);
  return out;
}

namespace {

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows;
  Matrix centers(k, points.cols);
  std::vector<bool> chosen(n, false);
  auto take = [&](std::size_t c, std::size_t p) {
    std::copy(points.row(p).begin(), points.row(p).end(), centers.row(c).begin());
    chosen[p] = true;
  };
  take(0, rng.below(n));
  std::vector<double> d2(n);
  for (std::size_t p = 0; p < n; ++p) d2[p] = squared_distance(points.row(p), centers.row(0));

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0) {
      const double target = rng.uniform() * total;
      double acc = 0;
      for (std::size_t p = 0; p < n; ++p) {
        if (d2[p] <= 0) continue;
        acc += d2[p];
        pick = p;
        if (acc > target) break;
      }
    } else {
      // Every remaining point coincides with a center.
      std::vector<std::size_t> free;
      for (std::size_t p = 0; p < n; ++p) {
        if (!chosen[p]) free.push_back(p);
      }
      pick = free.empty() ? rng.below(n) : free[rng.below(free.size())];
    }
    take(c, pick);
    for (std::size_t p = 0; p < n; ++p) d2[p] = std::min(d2[p], squared_distance(points.row(p), centers.row(c)));
  }
  return centers;
}

Clustering lloyd(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iterations) {
  const std::size_t n = points.rows;
  Rng rng(seed);
  Clustering result;
  result.k = k;
  result.centroids = seed_plus_plus(points, k, rng);
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  result.assignment.assign(n, kNone);
  std::vector<std::size_t> counts(k);

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      double best_d = squared_distance(points.row(p), result.centroids.row(0));
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(points.row(p), result.centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (result.assignment[p] != best) {
        result.assignment[p] = best;
        changed = true;
      }
    }

    std::fill(counts.begin(), counts.end(), 0);
    for (auto a : result.assignment) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = kNone;
      double far_d = -1;
      for (std::size_t p = 0; p < n; ++p) {
        if (counts[result.assignment[p]] < 2) continue;
        const double d = squared_distance(points.row(p), result.centroids.row(result.assignment[p]));
        if (d > far_d) {
          far_d = d;
          far = p;
        }
      }
      --counts[result.assignment[far]];
      result.assignment[far] = c;
      counts[c] = 1;
      std::copy(points.row(far).begin(), points.row(far).end(), result.centroids.row(c).begin());
      changed = true;
    }

    std::fill(result.centroids.data.begin(), result.centroids.data.end(), 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      auto row = result.centroids.row(result.assignment[p]);
      const auto pt = points.row(p);
      for (std::size_t j = 0; j < pt.size(); ++j) row[j] += pt[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (auto& v : result.centroids.row(c)) v /= static_cast<double>(counts[c]);
    }

    double inertia = 0;
    for (std::size_t p = 0; p < n; ++p) {
      inertia += squared_distance(points.row(p), result.centroids.row(result.assignment[p]));
    }
    result.inertia = inertia;
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;
    if (!changed) break;
  }
  return result;
}

}  // namespace

Clustering kmeans(const Matrix& points, const KMeansOptions& options) {
  if (points.rows == 0) throw Error("k-means needs at least one point");
  if (options.k < 1) throw Error("k must be >= 1");
  if (options.k > points.rows) {
    throw Error("k (" + std::to_string(options.k) + ") exceeds the number of points (" +
                std::to_string(points.rows) + ")");
  }
  if (options.max_iterations < 1) throw Error("k-means needs at least one iteration");
  const std::size_t runs = std::max<std::size_t>(options.restarts, 1);
  Clustering best;
  for (std::size_t r = 0; r < runs; ++r) {
    Clustering c = lloyd(points, options.k, options.seed + r, options.max_iterations);
    if (r == 0 || c.inertia < best.inertia) {
      best = std::move(c);
      best.best_run = r;
    }
  }
  best.seed = options.seed;
  best.restarts = runs;
  return best;
}

// ---------------------------------------------------------------------------
// Persistence

std::string write_top_list_json(const TopList& list, std::string_view config_hash) {
  ordered_json entries = ordered_json::array();
  for (const auto& e : list.entries) entries.push_back({{"token", e.token}, {"document_frequency", e.document_frequency}});
  ordered_json j;
  j["list_kind"] = std::string(to_string(list.kind));
  j["n_requested"] = list.n_requested;
  j["entries"] = entries;
  j["warnings"] = list.warnings;
  if (!config_hash.empty()) j["config_hash"] = std::string(config_hash);
  return j.dump(2) + "\n";
}

TopList read_top_list_json(const std::string& path) {
  try {
    const json j = json::parse(text::read_file(path));
    TopList list;
    const auto kind = j.at("list_kind").get<std::string>();
    list.kind = kind == "P" ? ListKind::Persons : kind == "O" ? ListKind::Organizations : ListKind::Combined;
    if (kind != "P" && kind != "O" && kind != "PO") throw Error("bad list_kind \"" + kind + "\"");
    list.n_requested = j.at("n_requested").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      list.entries.push_back({e.at("token").get<std::string>(), e.at("document_frequency").get<std::uint64_t>()});
    }
    if (j.contains("warnings")) list.warnings = j["warnings"].get<std::vector<std::string>>();
    return list;
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string write_matrix_tsv(const SimilarityMatrix& m) {
  std::string out = text::join(m.entities, "\t") + "\n";
  char buf[32];
  for (std::size_t i = 0; i < m.entities.size(); ++i) {
    out += m.entities[i];
    for (std::size_t j = 0; j < m.entities.size(); ++j) {
      std::snprintf(buf, sizeof buf, "\t%.6f", m.values(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

SimilarityMatrix read_matrix_tsv(std::string_view contents, std::string_view origin) {
  auto lines = text::split(contents, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(std::string(origin) + ": empty matrix file");
  SimilarityMatrix m;
  m.entities = text::split(lines[0], '\t');
  if (!m.entities.empty() && m.entities.front().empty()) m.entities.erase(m.entities.begin());
  const std::size_t n = m.entities.size();
  if (lines.size() != n + 1) {
    throw Error(std::string(origin) + ": header names " + std::to_string(n) + " entities but file has " +
                std::to_string(lines.size() - 1) + " rows");
  }
  m.values = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = text::split(lines[i + 1], '\t');
    const auto where = std::string(origin) + ":" + std::to_string(i + 2);
    if (fields.size() != n + 1) throw Error(where + ": expected " + std::to_string(n + 1) + " fields");
    if (fields[0] != m.entities[i]) throw Error(where + ": row label \"" + fields[0] + "\" does not match header");
    for (std::size_t j = 0; j < n; ++j) {
      char* end = nullptr;
      const double v = std::strtod(fields[j + 1].c_str(), &end);
      if (end != fields[j + 1].c_str() + fields[j + 1].size()) throw Error(where + ": bad value \"" + fields[j + 1] + "\"");
      m.values(i, j) = v;
    }
  }
  return m;
}

SimilarityMatrix load_matrix_tsv(const std::string& path) { return read_matrix_tsv(text::read_file(path), path); }

ClusterMembership membership(const Clustering& clustering, const std::vector<std::string>& entities) {
  ClusterMembership m;
  m.k = clustering.k;
  m.clusters.resize(clustering.k);
  for (std::size_t p = 0; p < clustering.assignment.size(); ++p) m.clusters[clustering.assignment[p]].push_back(entities[p]);
  return m;
}

std::string write_clustering_json(const Clustering& clustering, const std::vector<std::string>& entities,
                                  const ClusterFileInfo& info) {
  const auto m = membership(clustering, entities);
  ordered_json clusters = ordered_json::array();
  for (std::size_t c = 0; c < m.clusters.size(); ++c) clusters.push_back({{"id", c}, {"entities", m.clusters[c]}});
  ordered_json j;
  j["k"] = clustering.k;
  j["seed"] = clustering.seed;
  j["restarts"] = clustering.restarts;
  j["inertia"] = clustering.inertia;
  j["clusters"] = clusters;
  if (!info.list_variant.empty()) j["list_variant"] = info.list_variant;
  if (!info.model_kind.empty()) j["model_kind"] = info.model_kind;
  if (!info.config_hash.empty()) j["config_hash"] = info.config_hash;
  return j.dump(2) + "\n";
}

ClusterMembership read_clustering_json(const std::string& path) {
  try {
    const json j = json::parse(text::read_file(path));
    ClusterMembership m;
    m.k = j.at("k").get<std::size_t>();
    m.clusters.resize(m.k);
    for (const auto& c : j.at("clusters")) {
      const auto id = c.at("id").get<std::size_t>();
      if (id >= m.k) throw Error("cluster id " + std::to_string(id) + " out of range");
      m.clusters[id] = c.at("entities").get<std::vector<std::string>>();
    }
    if (j.contains("list_variant")) m.info.list_variant = j["list_variant"].get<std::string>();
    if (j.contains("model_kind")) m.info.model_kind = j["model_kind"].get<std::string>();
    if (j.contains("config_hash")) m.info.config_hash = j["config_hash"].get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace nerclust
