#include "nerclust/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "nerclust/error.hpp"
#include "nerclust/text.hpp"

namespace nerclust {

using nlohmann::json;
using nlohmann::ordered_json;

JudgeAnnotations parse_annotations(std::string_view json_text, const ClusterMembership& clusters,
                                   std::string_view origin) {
  const std::string where(origin);
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(where + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(where + ": expected a JSON array of cluster annotations");

  JudgeAnnotations out;
  out.clusters.resize(clusters.k);
  std::vector<bool> seen(clusters.k, false);
  for (const auto& rec : doc) {
    try {
      const auto id = rec.at("cluster_id").get<std::size_t>();
      if (id >= clusters.k) throw Error("unknown cluster id " + std::to_string(id));
      if (seen[id]) throw Error("duplicate entry for cluster " + std::to_string(id));
      seen[id] = true;
      ClusterAnnotation a;
      a.cluster_id = id;
      const auto& label = rec.at("label");
      if (!label.is_null()) a.label = label.get<std::string>();
      if (rec.contains("irrelevant")) a.irrelevant = rec["irrelevant"].get<std::vector<std::string>>();
      const auto& members = clusters.clusters[id];
      std::set<std::string> unique;
      for (const auto& tok : a.irrelevant) {
        if (std::find(members.begin(), members.end(), tok) == members.end()) {
          throw Error("irrelevant token \"" + tok + "\" is not a member of cluster " + std::to_string(id));
        }
        if (!unique.insert(tok).second) throw Error("token \"" + tok + "\" marked irrelevant twice in cluster " + std::to_string(id));
      }
      if (!a.label && !a.irrelevant.empty()) {
        throw Error("cluster " + std::to_string(id) + " has no label but lists irrelevant entities");
      }
      out.clusters[id] = std::move(a);
    } catch (const json::exception& e) {
      throw Error(where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
  }
  for (std::size_t id = 0; id < seen.size(); ++id) {
    if (!seen[id]) throw Error(where + ": missing annotation for cluster " + std::to_string(id));
  }
  return out;
}

JudgeAnnotations load_annotations(const std::string& path, const ClusterMembership& clusters) {
  return parse_annotations(text::read_file(path), clusters, path);
}

CoherenceResult coherence(const ClusterMembership& clusters, const JudgeAnnotations& annotations) {
  CoherenceResult r;
  double sum = 0;
  for (std::size_t c = 0; c < clusters.k; ++c) {
    const auto& a = annotations.clusters[c];
    const auto size = clusters.clusters[c].size();
    double v = 0;
    if (a.label && size > 0) v = static_cast<double>(size - a.irrelevant.size()) / static_cast<double>(size);
    r.per_cluster.push_back(v);
    sum += v;
  }
  r.average = clusters.k ? sum / static_cast<double>(clusters.k) : 0.0;
  return r;
}

PrecisionResult precision(const ClusterMembership& clusters, const JudgeAnnotations& annotations) {
  PrecisionResult r;
  for (std::size_t c = 0; c < clusters.k; ++c) {
    const auto& a = annotations.clusters[c];
    const auto size = clusters.clusters[c].size();
    if (a.label) {
      r.true_positives += size - a.irrelevant.size();
      r.false_positives += a.irrelevant.size();
    } else {
      r.false_positives += size;
    }
  }
  const auto total = r.true_positives + r.false_positives;
  if (total == 0) throw Error("precision is undefined for an empty clustering");
  r.value = static_cast<double>(r.true_positives) / static_cast<double>(total);
  return r;
}

bool is_accurate(const ClusterAnnotation& annotation, std::size_t cluster_size) {
  return annotation.label.has_value() && 2 * annotation.irrelevant.size() < cluster_size;
}

double coherent_clusters(const ClusterMembership& clusters, const JudgeAnnotations& annotations) {
  if (clusters.k == 0) throw Error("coherent-clusters measure is undefined for k = 0");
  std::size_t accurate = 0;
  for (std::size_t c = 0; c < clusters.k; ++c) {
    if (is_accurate(annotations.clusters[c], clusters.clusters[c].size())) ++accurate;
  }
  return static_cast<double>(accurate) / static_cast<double>(clusters.k);
}

namespace {

std::size_t group_of(const GroundTruth& truth, const std::string& token) {
  auto it = truth.find(token);
  if (it == truth.end()) throw Error("entity \"" + token + "\" has no ground-truth group");
  return it->second;
}

double choose2(double n) { return n * (n - 1) / 2; }

}  // namespace

double purity(const ClusterMembership& clusters, const GroundTruth& truth) {
  std::size_t total = 0, majority = 0;
  for (const auto& members : clusters.clusters) {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& tok : members) ++counts[group_of(truth, tok)];
    std::size_t best = 0;
    for (const auto& [g, n] : counts) best = std::max(best, n);
    majority += best;
    total += members.size();
  }
  if (total == 0) throw Error("purity is undefined for an empty clustering");
  return static_cast<double>(majority) / static_cast<double>(total);
}

double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw Error("ARI needs label vectors of equal length");
  const std::size_t n = a.size();
  if (n < 2) throw Error("ARI needs at least 2 entities");
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> table;
  std::map<std::size_t, std::size_t> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    ++table[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  double index = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, c] : table) index += choose2(static_cast<double>(c));
  for (const auto& [key, c] : rows) sum_a += choose2(static_cast<double>(c));
  for (const auto& [key, c] : cols) sum_b += choose2(static_cast<double>(c));
  const double expected = sum_a * sum_b / choose2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (index - expected) / (max_index - expected);
}

double adjusted_rand_index(const ClusterMembership& clusters, const GroundTruth& truth) {
  std::vector<std::size_t> predicted, actual;
  for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
    for (const auto& tok : clusters.clusters[c]) {
      predicted.push_back(c);
      actual.push_back(group_of(truth, tok));
    }
  }
  return adjusted_rand_index(actual, predicted);
}

std::vector<std::vector<std::size_t>> confusion(const ClusterMembership& clusters, const GroundTruth& truth,
                                                std::size_t groups) {
  std::vector<std::vector<std::size_t>> out(groups, std::vector<std::size_t>(clusters.clusters.size(), 0));
  for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
    for (const auto& tok : clusters.clusters[c]) {
      const auto g = group_of(truth, tok);
      if (g >= groups) throw Error("ground-truth group " + std::to_string(g) + " out of range");
      ++out[g][c];
    }
  }
  return out;
}

MetricsReport evaluate(const ClusterMembership& clusters, const JudgeAnnotations* annotations,
                       const GroundTruth* truth) {
  MetricsReport r;
  r.list_variant = clusters.info.list_variant;
  r.model_kind = clusters.info.model_kind;
  r.k = clusters.k;
  if (annotations) {
    r.coherence = coherence(clusters, *annotations);
    r.precision = precision(clusters, *annotations);
    r.coherent_clusters = coherent_clusters(clusters, *annotations);
  }
  if (truth) {
    r.purity = purity(clusters, *truth);
    r.ari = adjusted_rand_index(clusters, *truth);
  }
  return r;
}

std::string write_metrics_json(const MetricsReport& r, std::string_view config_hash) {
  ordered_json j;
  j["list_variant"] = r.list_variant;
  j["model_kind"] = r.model_kind;
  j["k"] = r.k;
  if (r.coherence) {
    j["coherence"] = {{"per_cluster", r.coherence->per_cluster}, {"average", r.coherence->average}};
  }
  if (r.precision) {
    j["precision"] = {{"value", r.precision->value},
                      {"true_positives", r.precision->true_positives},
                      {"false_positives", r.precision->false_positives}};
  }
  if (r.coherent_clusters) j["coherent_clusters"] = *r.coherent_clusters;
  if (r.purity) j["purity"] = *r.purity;
  if (r.ari) j["ari"] = *r.ari;
  if (!config_hash.empty()) j["config_hash"] = std::string(config_hash);
  return j.dump(2) + "\n";
}

namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string render_summary_table(const std::vector<MetricsReport>& reports) {
  std::vector<std::string> variants;
  std::vector<std::string> models;
  for (const auto& r : reports) {
    if (std::find(variants.begin(), variants.end(), r.list_variant) == variants.end()) variants.push_back(r.list_variant);
    if (std::find(models.begin(), models.end(), r.model_kind) == models.end()) models.push_back(r.model_kind);
  }
  // CBOW before SkipGram, as in the usual presentation.
  std::stable_sort(models.begin(), models.end(), [](const std::string& a, const std::string& b) {
    return (a == "cbow" ? 0 : 1) < (b == "cbow" ? 0 : 1);
  });
  auto find = [&](const std::string& v, const std::string& m) -> const MetricsReport* {
    for (const auto& r : reports) {
      if (r.list_variant == v && r.model_kind == m) return &r;
    }
    return nullptr;
  };

  using Getter = std::optional<double> (*)(const MetricsReport&);
  struct Row {
    std::string name;
    Getter get;
    bool as_percent;
  };
  const std::vector<Row> rows = {
      {"Coherence measure", [](const MetricsReport& r) -> std::optional<double> {
         return r.coherence ? std::optional<double>(r.coherence->average) : std::nullopt;
       }, true},
      {"Precision measure", [](const MetricsReport& r) -> std::optional<double> {
         return r.precision ? std::optional<double>(r.precision->value) : std::nullopt;
       }, true},
      {"Coherent clusters measure", [](const MetricsReport& r) { return r.coherent_clusters; }, true},
      {"Purity", [](const MetricsReport& r) { return r.purity; }, true},
      {"Adjusted Rand index", [](const MetricsReport& r) { return r.ari; }, false},
  };

  std::vector<std::vector<std::string>> table;
  {
    std::vector<std::string> header = {"List:", ""};
    header.insert(header.end(), variants.begin(), variants.end());
    header.push_back("Average");
    table.push_back(std::move(header));
    std::vector<std::string> ksize = {"K size:", ""};
    for (const auto& v : variants) {
      std::string cell = "-";
      for (const auto& r : reports) {
        if (r.list_variant == v) {
          cell = std::to_string(r.k);
          break;
        }
      }
      ksize.push_back(cell);
    }
    ksize.push_back("");
    table.push_back(std::move(ksize));
  }
  for (const auto& row : rows) {
    bool any = false;
    for (const auto& r : reports) any = any || row.get(r).has_value();
    if (!any) continue;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const auto& m = models[mi];
      std::vector<std::string> line = {mi == 0 ? row.name : "", m == "cbow" ? "CBOW" : m == "skipgram" ? "SkipGram" : m};
      double sum = 0;
      std::size_t count = 0;
      for (const auto& v : variants) {
        const MetricsReport* r = find(v, m);
        const auto value = r ? row.get(*r) : std::nullopt;
        if (value) {
          sum += *value;
          ++count;
          line.push_back(row.as_percent ? percent(*value) : fixed3(*value));
        } else {
          line.push_back("-");
        }
      }
      const double avg = count ? sum / static_cast<double>(count) : 0.0;
      line.push_back(count ? (row.as_percent ? percent(avg) : fixed3(avg)) : "-");
      table.push_back(std::move(line));
    }
  }

  std::vector<std::size_t> widths;
  for (const auto& line : table) {
    if (widths.size() < line.size()) widths.resize(line.size(), 0);
    for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
  }
  std::string out;
  for (const auto& line : table) {
    std::string s;
    for (std::size_t c = 0; c < line.size(); ++c) {
      s += pad(line[c], widths[c]);
      if (c + 1 < line.size()) s += "  ";
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    out += s + "\n";
  }
  return out;
}

GroundTruth read_ground_truth_json(const std::string& path) {
  try {
    const json j = json::parse(text::read_file(path));
    if (!j.is_object()) throw Error(path + ": ground truth must be a JSON object");
    GroundTruth truth;
    for (const auto& [key, value] : j.items()) {
      if (key == "spec") continue;
      truth[key] = value.get<std::size_t>();
    }
    return truth;
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace nerclust
