// Acceptance checks: one PASS/FAIL line per criterion; nonzero exit when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "../gradcheck.hpp"
#include "../test_util.hpp"
#include "nerclust/clustering.hpp"
#include "nerclust/corpus.hpp"
#include "nerclust/entities.hpp"
#include "nerclust/evaluation.hpp"
#include "nerclust/pipeline.hpp"
#include "nerclust/synthbench.hpp"
#include "nerclust/text.hpp"

namespace fs = std::filesystem;
using namespace nerclust;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

ClusterMembership make_clusters(std::vector<std::vector<std::string>> clusters) {
  ClusterMembership m;
  m.k = clusters.size();
  m.clusters = std::move(clusters);
  return m;
}

// ---------------------------------------------------------------------------

Outcome judged_cluster_metrics() {
  const auto m = make_clusters({
      {"Enron_Corp_ORG", "Enron_ORG", "WorldCom_ORG", "WorldCom_Inc._ORG", "Tyco_International_Ltd._ORG",
       "Pricewaterhouse_Coopers_ORG", "MCI_ORG", "Tyco_International_ORG", "Tyco_ORG"},
      {"Merrill_Lynch_ORG", "Goldman_Sachs_ORG", "Deutsche_Bank_ORG", "Morgan_Stanley_ORG",
       "Credit_Suisse_First_Boston_ORG", "Lehman_Brothers_ORG"},
      {"Arthur_Andersen_PER", "Dennis_Kozlowski_PER", "Bernard_Ebbers_PER", "Kenneth_Lay_PER", "Morgan_Stanley_PER",
       "Fannie_Mae_PER", "Martha_Stewart_PER", "Mark_Swartz_PER", "Freddie_Mac_PER"},
      {"Ira_Millstein_PER", "John_Coffee_PER", "Weil_PER", "Graef_Crystal_PER", "Joseph_Grundfest_PER",
       "Spencer_Stuart_PER", "Jay_Lorsch_PER"},
      {"Congress_ORG", "Senate_ORG", "Federal_Reserve_ORG", "House_ORG", "Delaware_Chancery_Court_ORG",
       "Senate_Banking_Committee_ORG", "European_Union_ORG", "Supreme_Court_ORG"},
      {"Columbia_University_ORG", "Harvard_Business_School_ORG", "Gotshal_&_Manges_ORG", "Stanford_University_ORG",
       "Harvard_University_ORG", "Harvard_ORG"},
  });
  const auto a = parse_annotations(R"([
    {"cluster_id": 0, "label": "Companies experiencing financial scandals and their auditors", "irrelevant": []},
    {"cluster_id": 1, "label": "Investment banks", "irrelevant": []},
    {"cluster_id": 2, "label": "Company leaders involved in scandal",
     "irrelevant": ["Morgan_Stanley_PER", "Fannie_Mae_PER", "Freddie_Mac_PER"]},
    {"cluster_id": 3, "label": "Corporate governance thought leaders", "irrelevant": ["Weil_PER", "Spencer_Stuart_PER"]},
    {"cluster_id": 4, "label": "Regulatory bodies", "irrelevant": []},
    {"cluster_id": 5, "label": "Universities", "irrelevant": ["Gotshal_&_Manges_ORG"]}
  ])", m);
  const auto c = coherence(m, a);
  const auto p = precision(m, a);
  const std::vector<double> expected = {1.0, 1.0, 0.667, 0.714, 1.0, 0.833};
  bool ok = c.per_cluster.size() == 6;
  for (std::size_t i = 0; ok && i < 6; ++i) ok = near(c.per_cluster[i], expected[i], 0.001);
  ok = ok && p.true_positives == 39 && p.true_positives + p.false_positives == 45 && near(p.value, 0.867, 0.001);
  std::string detail = "coherence {";
  for (std::size_t i = 0; i < c.per_cluster.size(); ++i) detail += (i ? ", " : "") + fmt("%.3f", c.per_cluster[i]);
  detail += "} precision " + std::to_string(p.true_positives) + "/" +
            std::to_string(p.true_positives + p.false_positives) + fmt(" = %.3f", p.value);
  return {ok, detail};
}

Outcome k_rule() {
  // Entity e of each type appears in the first 150 - e documents.
  TokenCorpus corpus;
  for (int d = 0; d < 150; ++d) {
    TokenDocument doc{"d" + std::to_string(d), {"the", "board", "met"}};
    for (int e = 0; e < 150 - d; ++e) {
      doc.tokens.push_back("Person" + std::to_string(e) + "_PER");
      doc.tokens.push_back("Company" + std::to_string(e) + "_ORG");
    }
    corpus.push_back(doc);
  }
  const auto po = rank_entities(corpus, ListKind::Combined, 100);
  std::size_t persons = 0, orgs = 0;
  for (const auto& e : po.entries) (is_person_token(e.token) ? persons : orgs)++;
  const std::size_t k_po = choose_k(po.entries.size());
  const bool ok = choose_k(100) == 10 && choose_k(200) == 20 && persons == 100 && orgs == 100 && k_po == 20;
  return {ok, "K(100)=" + std::to_string(choose_k(100)) + " K(200)=" + std::to_string(choose_k(200)) + " PO list " +
                  std::to_string(persons) + "+" + std::to_string(orgs) + " -> K=" + std::to_string(k_po)};
}

Outcome gradient_checks() {
  std::mt19937_64 rng(20240601);
  double worst_sg = 0, worst_cbow = 0;
  for (int t = 0; t < 100; ++t) {
    const auto g = testing::random_instance(rng, 8, 1, 1 + t % 5);
    worst_sg = std::max(worst_sg, testing::relative_error(testing::analytic_gradient(g, false),
                                                          testing::numeric_gradient(g, 1e-5)));
  }
  for (int t = 0; t < 100; ++t) {
    const auto g = testing::random_instance(rng, 8, 2 + t % 4, 1 + t % 5);
    worst_cbow = std::max(worst_cbow, testing::relative_error(testing::analytic_gradient(g, true),
                                                              testing::numeric_gradient(g, 1e-5)));
  }
  return {worst_sg < 1e-4 && worst_cbow < 1e-4,
          fmt("max relative error skip-gram %.2e, CBOW %.2e over 100 instances each", worst_sg, worst_cbow)};
}

BenchSpec recovery_spec(std::uint64_t seed, bool shared) {
  BenchSpec s;
  s.groups = 5;
  s.entities_per_group = 10;
  s.articles = 2000;
  s.seed = seed;
  s.shared_context = shared;
  return s;
}

RecoveryParams recovery_params() {
  RecoveryParams p = RecoveryParams::defaults();
  p.embedding.kind = ModelKind::SkipGram;
  p.embedding.dim = 50;
  p.embedding.window = 5;
  p.embedding.negatives = 5;
  p.embedding.epochs = 5;
  p.embedding.threads = 1;
  return p;
}

constexpr std::uint64_t kFirstSeed = 7;
constexpr int kSeeds = 10;

std::vector<double> planted_ari(kSeeds, std::numeric_limits<double>::quiet_NaN());

Outcome synthetic_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_recovery(recovery_spec(kFirstSeed, false), recovery_params());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  planted_ari[0] = r.ari;
  return {r.purity >= 0.9 && r.ari >= 0.8,
          fmt("purity %.3f ARI ", r.purity) + fmt("%.3f", r.ari) + " k=" + std::to_string(r.k) + fmt(" in %.1fs", secs)};
}

Outcome no_signal_control() {
  double sum = 0, worst_gap = std::numeric_limits<double>::infinity();
  std::string control;
  for (int i = 0; i < kSeeds; ++i) {
    const std::uint64_t seed = kFirstSeed + i;
    if (std::isnan(planted_ari[i])) planted_ari[i] = run_recovery(recovery_spec(seed, false), recovery_params()).ari;
    const double ari = run_recovery(recovery_spec(seed, true), recovery_params()).ari;
    sum += ari;
    worst_gap = std::min(worst_gap, planted_ari[i] - ari);
    control += (i ? " " : "") + fmt("%.3f", ari);
  }
  const double mean = sum / kSeeds;
  return {std::abs(mean) < 0.15 && worst_gap > 0,
          fmt("mean control ARI %.3f, smallest planted-minus-control gap %.3f; control ", mean, worst_gap) + control};
}

Outcome matrix_invariants() {
  BenchSpec spec;
  spec.groups = 4;
  spec.entities_per_group = 15;
  spec.articles = 400;
  const auto synthetic = generate(spec);
  const auto tokens = prepare_token_corpus(synthetic.corpus, Gazetteers::defaults());
  std::size_t matrices = 0, entries = 0;
  bool ok = true;
  for (auto kind : {ModelKind::Cbow, ModelKind::SkipGram}) {
    Hyperparameters h;
    h.kind = kind;
    h.dim = 24;
    h.window = 5;
    h.epochs = 2;
    h.min_count = 1;
    h.learning_rate = Hyperparameters::default_learning_rate(kind);
    const auto model = train(tokens, build_vocab(tokens, 1), h);
    for (const auto& v : default_list_variants()) {
      const auto m = build_matrix(rank_entities(tokens, v.kind, v.n), model);
      ++matrices;
      const std::size_t n = m.entities.size();
      for (std::size_t i = 0; i < n; ++i) {
        ok = ok && m.values(i, i) == 1.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double x = m.values(i, j);
          ok = ok && x == m.values(j, i) && x >= -1 - 1e-9 && x <= 1 + 1e-9;
          ++entries;
        }
      }
    }
  }
  return {ok, std::to_string(matrices) + " matrices, " + std::to_string(entries) + " entries checked"};
}

Outcome determinism() {
  testing::TempDir dir;
  BenchSpec spec;
  spec.groups = 4;
  spec.entities_per_group = 15;
  spec.articles = 400;
  const auto corpus = dir.write("corpus.jsonl", write_corpus_jsonl(generate(spec).corpus));
  auto config_for = [&](const std::string& out) {
    auto c = PipelineConfig::from_values({{"corpus.path", corpus},
                                          {"embedding.dim", "24"},
                                          {"embedding.window", "5"},
                                          {"embedding.epochs", "2"},
                                          {"embedding.min_count", "1"},
                                          {"embedding.threads", "1"}});
    c.output_dir = dir.file(out);
    return c;
  };
  const auto a = run_experiment(config_for("a"));
  const auto b = run_experiment(config_for("b"));
  bool ok = a.failures.empty() && b.failures.empty() && a.clustering_files.size() == 10 &&
            b.clustering_files.size() == 10;
  std::size_t same = 0;
  for (std::size_t i = 0; ok && i < a.clustering_files.size(); ++i) {
    const bool eq = fs::path(a.clustering_files[i]).filename() == fs::path(b.clustering_files[i]).filename() &&
                    text::read_file(a.clustering_files[i]) == text::read_file(b.clustering_files[i]);
    same += eq;
    ok = ok && eq;
  }
  return {ok, std::to_string(same) + "/" + std::to_string(a.clustering_files.size()) +
                  " clustering files byte-identical across two runs"};
}

Outcome linking_fixture() {
  Document doc{"a1",
               "Barack Obama spoke to the committee on the budget. Reporters later asked Barack H. Obama about "
               "taxes. The senators said Obama had answered well.",
               {}};
  doc = segment(doc);
  const auto mentions = resolve_overlaps(filter_types(tag_heuristic(doc, Gazetteers::defaults())));
  const auto entities = link_persons(mentions);
  std::vector<const CanonicalEntity*> persons;
  for (const auto& e : entities) {
    if (e.type == EntityType::Person) persons.push_back(&e);
  }
  const bool ok = persons.size() == 1 && persons[0]->entity_token == "Barack_H._Obama_PER" &&
                  persons[0]->mentions.size() == 3;
  std::string detail = std::to_string(persons.size()) + " PER entities";
  for (const auto* p : persons) detail += ", " + p->entity_token + " (" + std::to_string(p->mentions.size()) + " mentions)";
  return {ok, detail};
}

Outcome equal_size_identity() {
  std::mt19937_64 rng(99);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng() % 20, size = 1 + rng() % 25;
    std::vector<std::vector<std::string>> cl(k);
    JudgeAnnotations a;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < size; ++i) cl[c].push_back("E" + std::to_string(c) + "_" + std::to_string(i) + "_PER");
      if (rng() % 5 == 0) {
        a.clusters.push_back({c, std::nullopt, {}});
      } else {
        std::vector<std::string> members = cl[c];
        std::shuffle(members.begin(), members.end(), rng);
        members.resize(rng() % (size + 1));
        a.clusters.push_back({c, "label", members});
      }
    }
    const auto m = make_clusters(cl);
    worst = std::max(worst, std::abs(coherence(m, a).average - precision(m, a).value));
  }
  return {worst <= 1e-12, fmt("max |coherence - precision| %.2e over 1000 trials", worst)};
}

Outcome kmeans_oracle() {
  // 12 x 12 similarity matrix with two diagonal blocks of six; its rows are
  // the points.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  Matrix sim(12, 12);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = i; j < 12; ++j) {
      const double v = i == j ? 1.0 : ((i < 6) == (j < 6) ? 0.8 : 0.1) + jitter(rng);
      sim(i, j) = sim(j, i) = v;
    }
  }
  auto inertia_of = [&](const std::vector<std::size_t>& a) {
    double total = 0;
    for (std::size_t c = 0; c < 2; ++c) {
      std::vector<double> mean(12, 0.0);
      double n = 0;
      for (std::size_t i = 0; i < 12; ++i) {
        if (a[i] != c) continue;
        n += 1;
        for (std::size_t j = 0; j < 12; ++j) mean[j] += sim(i, j);
      }
      for (auto& x : mean) x /= n;
      for (std::size_t i = 0; i < 12; ++i) {
        if (a[i] == c) total += squared_distance(sim.row(i), mean);
      }
    }
    return total;
  };
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_assign;
  for (unsigned mask = 1; mask < (1u << 11); ++mask) {
    std::vector<std::size_t> a(12, 0);
    for (int i = 1; i < 12; ++i) a[i] = (mask >> (i - 1)) & 1u;
    const double in = inertia_of(a);
    if (in < best) {
      best = in;
      best_assign = a;
    }
  }
  const auto c = kmeans(sim, {2, 1, 10, 300});
  bool same = true;
  for (std::size_t i = 1; i < 12; ++i) same = same && ((c.assignment[i] == c.assignment[0]) == (best_assign[i] == best_assign[0]));
  bool blocks = true;
  for (std::size_t i = 0; i < 12; ++i) blocks = blocks && ((best_assign[i] == best_assign[0]) == (i < 6));
  return {same && blocks && near(c.inertia, best, 1e-9),
          fmt("k-means inertia %.6f, brute-force optimum %.6f over 2047 partitions", c.inertia, best)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"metric oracle on six judged example clusters", judged_cluster_metrics},
      {"K rule 100->10, 200->20, combined list K=20", k_rule},
      {"SGNS and CBOW gradients match finite differences", gradient_checks},
      {"synthetic recovery purity >= 0.9 and ARI >= 0.8", synthetic_recovery},
      {"no-signal control |mean ARI| < 0.15 and below planted runs", no_signal_control},
      {"similarity matrix symmetry, unit diagonal, range", matrix_invariants},
      {"deterministic runs give byte-identical clustering JSON", determinism},
      {"linking fixture yields one Barack_H._Obama_PER entity", linking_fixture},
      {"equal-size clusters: coherence equals precision", equal_size_identity},
      {"k-means matches brute-force optimum on 6+6 block fixture", kmeans_oracle},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
