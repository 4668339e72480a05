// Acceptance suite: one line per criterion, exit 1 if any required one fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "../oracles.hpp"
#include "pan/cli.hpp"
#include "pan/layers.hpp"
#include "pan/met.hpp"
#include "pan/model.hpp"
#include "pan/training.hpp"

using namespace pan;

namespace {

struct Verdict {
  enum Kind { Pass, Fail, Skip } kind;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PathWeights random_weights(std::size_t cutoff, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.01, 3.0);
  PathWeights w;
  w.cutoff = cutoff;
  for (std::size_t l = 0; l <= cutoff; ++l) w.w.push_back(pos(rng));
  return w;
}

Verdict met_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    auto edges = oracle::random_edges(n, 0.45, rng);
    const Graph g = build_graph(n, edges);
    const PathWeights w = random_weights(rng() % 5, rng);
    for (bool sym : {false, true}) {
      const auto met = met_matrix(g, w, sym ? Normalization::Symmetric : Normalization::RowStochastic);
      const auto ref = oracle::met(n, edges, w.w, sym);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(met.m(i, j) - ref[i][j]));
    }
  }
  const double t = seconds_since(t0);
  const bool ok = worst <= 1e-10 && t < 10.0;
  return {ok ? Verdict::Pass : Verdict::Fail, fmt("max abs err %.3e over 100 graphs, %.2fs", worst, t)};
}

std::vector<double> sorted_real_eigenvalues(const DenseMatrix& m, double& max_imag) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  Eigen::MatrixXd e(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) e(i, j) = m(i, j);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(e, false);
  std::vector<double> out;
  for (const auto& v : solver.eigenvalues()) {
    out.push_back(v.real());
    max_imag = std::max(max_imag, std::abs(v.imag()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Verdict normalization_properties() {
  std::mt19937_64 rng(202);
  double row_err = 0.0, sym_err = 0.0, eig_err = 0.0, imag = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    const Graph g = oracle::random_graph(n, 0.4, rng);
    const PathWeights w = random_weights(rng() % 5, rng);
    const auto row = met_matrix(g, w, Normalization::RowStochastic);
    const auto sym = met_matrix(g, w, Normalization::Symmetric);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s += row.m(i, j);
        sym_err = std::max(sym_err, std::abs(sym.m(i, j) - sym.m(j, i)));
      }
      row_err = std::max(row_err, std::abs(s - 1.0));
    }
    if (n <= 6) {
      const auto a = sorted_real_eigenvalues(row.m, imag);
      const auto b = sorted_real_eigenvalues(sym.m, imag);
      for (std::size_t k = 0; k < n; ++k) eig_err = std::max(eig_err, std::abs(a[k] - b[k]));
    }
  }
  const bool ok = row_err <= 1e-10 && sym_err <= 1e-10 && eig_err <= 1e-8 && imag <= 1e-8;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("row-sum err %.2e, asymmetry %.2e, eigenvalue gap %.2e (imag %.1e)", row_err, sym_err, eig_err, imag)};
}

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (Variant v : {Variant::PAN, Variant::HPAN}) {
    ModelConfig c;
    c.variant = v;
    c.emb_dim = 8;
    const auto report = cli::run_model_gradcheck(c, 1e-5, 1e-4);
    ok = ok && report.passed && report.worst_rel_error < 1e-4;
    detail += fmt("%s worst rel err %.2e over %zu groups; ", std::string(to_string(v)).c_str(),
                  report.worst_rel_error, report.groups.size());
  }
  const double t = seconds_since(t0);
  ok = ok && t < 60.0;
  return {ok ? Verdict::Pass : Verdict::Fail, detail + fmt("%.2fs", t)};
}

Verdict pooling_invariants() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> ratio_dist(0.01, 1.0);
  std::size_t size_bad = 0, adj_bad = 0, order_bad = 0, with_ties = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 16;
    const Graph g = oracle::random_graph(n, 0.35, rng);
    const double ratio = trial % 10 == 0 ? 1.0 : ratio_dist(rng);
    // Few distinct values so duplicates are common.
    std::vector<double> scores(n);
    for (double& s : scores) s = static_cast<double>(rng() % 4) * 0.25 - 0.5;
    if (std::set<double>(scores.begin(), scores.end()).size() < n) ++with_ties;

    Tape tape;
    const auto out = pan_pool_select(g, tape.constant(DenseMatrix(n, 3, 1.0)),
                                     tape.constant(DenseMatrix::column(scores)), ratio);
    const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(ratio * static_cast<double>(n))));
    if (out.kept.size() != k || out.graph.num_nodes() != k) ++size_bad;

    std::vector<std::size_t> ref(n);
    std::iota(ref.begin(), ref.end(), 0);
    std::sort(ref.begin(), ref.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    ref.resize(std::min(k, n));
    std::sort(ref.begin(), ref.end());
    const auto again = pan_pool_select(g, tape.constant(DenseMatrix(n, 3, 1.0)),
                                       tape.constant(DenseMatrix::column(scores)), ratio);
    if (out.kept != ref || again.kept != out.kept) ++order_bad;

    const DenseMatrix a = adjacency(g), sub = adjacency(out.graph);
    for (std::size_t i = 0; i < out.kept.size() && i < sub.rows(); ++i)
      for (std::size_t j = 0; j < out.kept.size() && j < sub.rows(); ++j)
        if (sub(i, j) != a(out.kept[i], out.kept[j])) {
          ++adj_bad;
          i = j = out.kept.size();
        }
  }
  const bool ok = size_bad == 0 && adj_bad == 0 && order_bad == 0 && with_ties > 0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("1000 cases (%zu with tied scores): size errors %zu, adjacency errors %zu, selection errors %zu", with_ties,
              size_bad, adj_bad, order_bad)};
}

Verdict loss_analytics() {
  const double ln2 = std::log(2.0);
  const double zero[] = {0.0};
  const int neg[] = {0}, pos[] = {1};
  const double e0 = std::abs(weighted_bce(zero, neg, 5.0) - ln2);
  const double e1 = std::abs(weighted_bce(zero, pos, 5.0) - 5.0 * ln2);
  std::mt19937_64 rng(505);
  std::normal_distribution<double> nd(0.0, 4.0);
  double e2 = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 64;
    std::vector<double> logits(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = nd(rng);
      labels[i] = static_cast<int>(rng() % 2);
    }
    e2 = std::max(e2, std::abs(weighted_bce(logits, labels, 1.0) - oracle::plain_bce(logits, labels)));
  }
  const bool ok = e0 <= 1e-12 && e1 <= 1e-12 && e2 <= 1e-12;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("|L-ln2| %.1e, |L-5ln2| %.1e, alpha=1 vs plain BCE %.1e", e0, e1, e2)};
}

Verdict auc_oracle() {
  const double fixed = roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1});
  std::mt19937_64 rng(606);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    const std::size_t levels = 1 + rng() % 40;  // ties are frequent when small
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng() % levels) / static_cast<double>(levels);
      labels[i] = static_cast<int>(rng() % 2);
    }
    // Both classes must be present.
    const std::size_t i = rng() % n;
    labels[i] = 0;
    labels[(i + 1 + rng() % (n - 1)) % n] = 1;
    if (roc_auc(scores, labels) != oracle::auc(scores, labels)) ++mismatches;
  }
  const bool ok = fixed == 0.75 && mismatches == 0;
  return {ok ? Verdict::Pass : Verdict::Fail, fmt("fixed case %.4f, %zu/500 mismatches", fixed, mismatches)};
}

Verdict end_to_end() {
  ModelConfig c;
  c.variant = Variant::HPAN;
  c.emb_dim = 16;
  c.conv_cutoffs = {3, 2};
  c.epochs = 200;
  c.batch_size = 40;
  c.learning_rate = 1e-2;
  c.alpha = 1.0;  // the synthetic set is balanced
  c.seed = 0;
  const Dataset ds = make_synthetic(SyntheticTask::TriangleDetection, 40, c.seed);
  const auto t0 = Clock::now();
  const TrainResult a = train(c, ds);
  const double t = seconds_since(t0);
  const TrainResult b = train(c, ds);
  bool same = a.log.size() == b.log.size();
  for (std::size_t i = 0; same && i < a.log.size(); ++i)
    same = a.log[i].mean_loss == b.log[i].mean_loss && a.log[i].train_auc == b.log[i].train_auc;
  const double auc = a.train_auc.value_or(0.0);
  const bool ok = auc >= 0.95 && t < 120.0 && same;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("train ROC-AUC %.4f (best epoch %zu), %.2fs per run, rerun %s", auc, a.best_epoch, t,
              same ? "identical" : "DIFFERS")};
}

Verdict permutation_invariance() {
  std::mt19937_64 rng(808);
  const std::vector<std::size_t> node_cards{6, 3}, edge_cards{4};
  ModelConfig c;
  c.emb_dim = 16;
  double worst = 0.0;
  for (Variant v : {Variant::PAN, Variant::HPAN}) {
    c.variant = v;
    c.seed = v == Variant::PAN ? 1 : 2;
    const Model m(c, node_cards, edge_cards);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng() % 14;
      const Graph g = oracle::random_graph(n, 0.3, rng, 2, 3, 1, 4);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Tape t1(&m.parameters()), t2(&m.parameters());
      const double a = m.forward(t1, g).scalar();
      const double b = m.forward(t2, permute_nodes(g, perm)).scalar();
      worst = std::max(worst, std::abs(a - b));
    }
  }
  return {worst <= 1e-9 ? Verdict::Pass : Verdict::Fail, fmt("max |logit difference| %.2e over 2 x 100 graphs", worst)};
}

Verdict parameter_report() {
  constexpr std::size_t kTable = 43676;
  const Model m(ModelConfig{}, {119, 5, 12, 12, 10, 6, 6, 2, 2}, {5, 6, 2});
  const auto r = m.count_parameters();
  std::size_t summed = 0;
  std::ostringstream s;
  for (const auto& [name, n] : r.components) {
    s << name << '=' << n << ' ';
    summed += n;
  }
  const long delta = static_cast<long>(r.total) - static_cast<long>(kTable);
  s << "total=" << r.total << " vs 43676 (delta " << delta << ")";
  const bool ok = summed == r.total && r.total == m.parameters().element_count();
  return {ok ? Verdict::Pass : Verdict::Fail, s.str()};
}

Verdict full_dataset() {
  const char* dir = std::getenv("PAN_MOLHIV_DIR");
  if (dir == nullptr || *dir == '\0') return {Verdict::Skip, "set PAN_MOLHIV_DIR to an ogbg-molhiv raw directory"};
  const auto out_dir = std::filesystem::temp_directory_path() / "pan_molhiv_acceptance";
  std::ostringstream out, err;
  const int code = cli::run({"train", "--dataset", dir, "--runs", "3", "--seed", "0", "--output", out_dir.string()},
                            out, err);
  if (code != 0) return {Verdict::Fail, "train exited " + std::to_string(code) + ": " + err.str()};
  const auto summary = nlohmann::json::parse(std::ifstream(out_dir / "summary.json"));
  const double test = summary["test_auc"]["mean"].get<double>();
  std::string table = out.str();
  table = table.substr(table.find("Model |"));
  while (!table.empty() && table.back() == '\n') table.pop_back();
  for (auto& ch : table)
    if (ch == '\n') ch = ';';
  return {test >= 0.70 ? Verdict::Pass : Verdict::Fail, fmt("mean test ROC-AUC %.4f; ", test) + table};
}

}  // namespace

// With no argument runs every criterion; with a number runs only that one.
// Exit status: 0 pass, 1 fail, 77 skipped (single criterion only).
int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"MET oracle equivalence", met_oracle},
      {"normalization properties", normalization_properties},
      {"gradient suite", gradient_suite},
      {"pooling invariants", pooling_invariants},
      {"loss analytics", loss_analytics},
      {"ROC-AUC oracle", auc_oracle},
      {"end-to-end learning", end_to_end},
      {"permutation invariance", permutation_invariance},
      {"parameter count report", parameter_report},
      {"full-dataset reproduction (optional)", full_dataset},
  };
  std::size_t first = 0, last = criteria.size();
  if (argc > 1) {
    const long which = std::strtol(argv[1], nullptr, 10);
    if (which < 1 || which > static_cast<long>(criteria.size())) {
      std::fprintf(stderr, "criterion must be 1-%zu\n", criteria.size());
      return 2;
    }
    first = static_cast<std::size_t>(which - 1);
    last = first + 1;
  }
  bool failed = false, skipped = false;
  for (std::size_t i = first; i < last; ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {Verdict::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = v.kind == Verdict::Pass ? "PASS" : v.kind == Verdict::Fail ? "FAIL" : "SKIP";
    std::printf("[%s] %2zu %s: %s\n", tag, i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
    failed = failed || v.kind == Verdict::Fail;
    skipped = v.kind == Verdict::Skip;
  }
  if (failed) return 1;
  return argc > 1 && skipped ? 77 : 0;
}
