#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nerclust/embeddings.hpp"
#include "nerclust/entities.hpp"

namespace nerclust {

enum class ListKind { Persons, Organizations, Combined };

std::string_view to_string(ListKind kind);  // "P", "O", "PO"

// A named top list such as T100_P: n entities of the given kind. Combined
// lists hold the top n persons followed by the top n organizations.
struct ListVariant {
  ListKind kind = ListKind::Persons;
  std::size_t n = 100;

  std::string name() const;  // "T100_P"
  static ListVariant parse(std::string_view name);
  bool operator==(const ListVariant&) const = default;
};

// T100_P, T200_P, T100_O, T200_O, T100_PO.
std::vector<ListVariant> default_list_variants();

struct TopListEntry {
  std::string token;
  std::uint64_t document_frequency = 0;
  bool operator==(const TopListEntry&) const = default;
};

struct TopList {
  ListKind kind = ListKind::Persons;
  std::size_t n_requested = 0;
  std::vector<TopListEntry> entries;
  std::vector<std::string> warnings;  // shortfalls
};

// Ranks entity tokens by the number of distinct documents containing them,
// ties broken by token. Returns every match with a warning when fewer than n
// exist.
TopList rank_entities(const TokenCorpus& corpus, ListKind kind, std::size_t n);

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

struct SimilarityMatrix {
  std::vector<std::string> entities;
  Matrix values;
};

// values(i, j) = cosine of the entities' vectors; each pair is computed once
// and mirrored, the diagonal is exactly 1.
SimilarityMatrix build_matrix(const TopList& top_list, const EmbeddingModel& model);
SimilarityMatrix build_matrix(const std::vector<std::string>& entities, const EmbeddingModel& model);

// floor(n / 10), at least 1.
std::size_t choose_k(std::size_t n_entities);

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 1;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
};

struct Clustering {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // point -> cluster in [0, k)
  Matrix centroids;                     // k x dim
  double inertia = 0;
  std::uint64_t seed = 0;
  std::size_t restarts = 0;
  std::size_t best_run = 0;
  std::size_t iterations = 0;
  // Inertia after each Lloyd iteration of the winning run.
  std::vector<double> inertia_history;

  std::vector<std::vector<std::size_t>> members() const;
};

// k-means++ seeding and Lloyd iterations under squared Euclidean distance.
// Run r of `restarts` uses seed + r; the lowest inertia wins, ties to the
// earlier run. Empty clusters are re-seeded with the point farthest from its
// centroid.
Clustering kmeans(const Matrix& points, const KMeansOptions& options);

double squared_distance(std::span<const double> a, std::span<const double> b);

// Persistence.
std::string write_top_list_json(const TopList& list, std::string_view config_hash = {});
TopList read_top_list_json(const std::string& path);

// Header row of entity tokens, then "token<TAB>v1<TAB>...<TAB>vN" with six
// decimals.
std::string write_matrix_tsv(const SimilarityMatrix& matrix);
SimilarityMatrix read_matrix_tsv(std::string_view contents, std::string_view origin = "<matrix>");
SimilarityMatrix load_matrix_tsv(const std::string& path);

struct ClusterFileInfo {
  std::string list_variant;
  std::string model_kind;
  std::string config_hash;
};

// {k, seed, restarts, inertia, clusters: [{id, entities}]} plus the optional
// provenance fields in ClusterFileInfo.
std::string write_clustering_json(const Clustering& clustering, const std::vector<std::string>& entities,
                                  const ClusterFileInfo& info = {});

// Each inner vector holds the entity tokens of one cluster, indexed by id.
struct ClusterMembership {
  std::size_t k = 0;
  std::vector<std::vector<std::string>> clusters;
  ClusterFileInfo info;
};

ClusterMembership membership(const Clustering& clustering, const std::vector<std::string>& entities);
ClusterMembership read_clustering_json(const std::string& path);

}  // namespace nerclust
