#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nerclust/clustering.hpp"

namespace nerclust {

struct ClusterAnnotation {
  std::size_t cluster_id = 0;
  std::optional<std::string> label;  // nullopt: the judge could not name the cluster
  std::vector<std::string> irrelevant;
};

// One record per cluster, indexed by cluster id.
struct JudgeAnnotations {
  std::vector<ClusterAnnotation> clusters;
};

// JSON array of {cluster_id, label: string|null, irrelevant: [token, ...]}.
// Every cluster must appear exactly once; irrelevant tokens must be members.
JudgeAnnotations parse_annotations(std::string_view json_text, const ClusterMembership& clusters,
                                   std::string_view origin = "<annotations>");
JudgeAnnotations load_annotations(const std::string& path, const ClusterMembership& clusters);

struct CoherenceResult {
  std::vector<double> per_cluster;
  double average = 0;
};

// Labeled cluster: relevant / size. Unlabeled cluster: 0. The average is the
// unweighted mean over clusters.
CoherenceResult coherence(const ClusterMembership& clusters, const JudgeAnnotations& annotations);

struct PrecisionResult {
  double value = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
};

// Pooled TP / (TP + FP); every member of an unlabeled cluster is a false
// positive.
PrecisionResult precision(const ClusterMembership& clusters, const JudgeAnnotations& annotations);

// A cluster is accurate when it is labeled and fewer than half its members
// are irrelevant.
bool is_accurate(const ClusterAnnotation& annotation, std::size_t cluster_size);
double coherent_clusters(const ClusterMembership& clusters, const JudgeAnnotations& annotations);

using GroundTruth = std::map<std::string, std::size_t>;  // entity token -> group id

double purity(const ClusterMembership& clusters, const GroundTruth& truth);
double adjusted_rand_index(const ClusterMembership& clusters, const GroundTruth& truth);
// Same index over two label vectors of equal length.
double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

// groups x clusters counts.
std::vector<std::vector<std::size_t>> confusion(const ClusterMembership& clusters, const GroundTruth& truth,
                                                std::size_t groups);

struct MetricsReport {
  std::string list_variant;
  std::string model_kind;
  std::size_t k = 0;
  std::optional<CoherenceResult> coherence;
  std::optional<PrecisionResult> precision;
  std::optional<double> coherent_clusters;
  std::optional<double> purity;
  std::optional<double> ari;
};

// Judge metrics when annotations are given, ground-truth metrics when truth
// is given.
MetricsReport evaluate(const ClusterMembership& clusters, const JudgeAnnotations* annotations,
                       const GroundTruth* truth);

std::string write_metrics_json(const MetricsReport& report, std::string_view config_hash = {});

// Aligned plain-text table: one column per list variant plus an average, one
// row per metric and model kind.
std::string render_summary_table(const std::vector<MetricsReport>& reports);

GroundTruth read_ground_truth_json(const std::string& path);

}  // namespace nerclust
