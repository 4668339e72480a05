#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "pan/checkpoint.hpp"
#include "pan/cli.hpp"
#include "pan/error.hpp"

using namespace pan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("pan_cli_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome pan_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string bytes_of(const Model& m) {
  std::ostringstream s;
  write_checkpoint(s, m);
  return s.str();
}

void write_graphs(const fs::path& file, const std::vector<Graph>& graphs) {
  Dataset ds;
  ds.graphs = graphs;
  for (std::size_t i = 0; i < graphs.size(); ++i) ds.splits.train.push_back(i);
  infer_cardinalities(ds);
  save_json_graphs(file, ds);
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(1);
  ModelConfig c;
  c.emb_dim = 8;
  c.alpha = 7.5;
  Model m(c, {4, 3}, {2});
  for (auto& [name, buf] : m.buffers())
    for (double& x : buf->data()) x = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
  const std::string bytes = bytes_of(m);
  CHECK(bytes.substr(0, 4) == "PANW");
  std::istringstream in(bytes);
  const Model back = read_checkpoint(in);
  CHECK(back.config() == m.config());
  CHECK(back.node_cardinalities() == m.node_cardinalities());
  for (std::size_t p = 0; p < m.parameters().size(); ++p) CHECK(back.parameters()[p].value == m.parameters()[p].value);
  const auto a = m.buffers();
  const auto b = back.buffers();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);
  CHECK(bytes_of(back) == bytes);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const Model m(ModelConfig{.variant = Variant::PAN, .emb_dim = 4}, {2}, {});
  const std::string bytes = bytes_of(m);
  auto load = [](std::string b) {
    std::istringstream in(b);
    try {
      read_checkpoint(in);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(load("NOPE" + bytes.substr(4)) == ErrorCode::BadCheckpoint);
  CHECK(load(bytes.substr(0, bytes.size() - 3)) == ErrorCode::BadCheckpoint);
  CHECK(load(bytes.substr(0, 10)) == ErrorCode::BadCheckpoint);
}

TEST_CASE("cli: train writes logs, checkpoints and a summary") {
  TempDir dir("train");
  const fs::path config = dir.path / "run.json";
  std::ofstream(config) << json{{"dataset_format", "synthetic"}, {"synthetic_graphs", 12}, {"emb_dim", 8},
                                {"conv_cutoffs", {2, 1}}, {"epochs", 3}, {"output_dir", (dir.path / "out").string()}}
                               .dump();
  const auto r = pan_cli({"train", "--config", config.string(), "--runs", "2", "--seed", "1"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* f : {"run_0.jsonl", "run_1.jsonl", "run_0.ckpt", "run_1.ckpt", "summary.json"})
    CHECK(fs::exists(dir.path / "out" / f));
  std::ifstream log(dir.path / "out" / "run_1.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    CHECK(json::parse(line).contains("mean_loss"));
    ++lines;
  }
  CHECK(lines == 3);
  const json summary = json::parse(std::ifstream(dir.path / "out" / "summary.json"));
  CHECK(summary["runs"].size() == 2);
  CHECK(summary["runs"][1]["seed"] == 2);
  CHECK(r.out.find("HPAN | ") != std::string::npos);
}

TEST_CASE("cli: synthetic config overfits") {
  TempDir dir("overfit");
  const fs::path config = dir.path / "synthetic.json";
  std::ofstream(config) << json{{"dataset_format", "synthetic"}, {"synthetic_graphs", 40}, {"emb_dim", 16},
                                {"conv_cutoffs", {3, 2}}, {"epochs", 200}, {"batch_size", 40},
                                {"learning_rate", 0.01}, {"alpha", 1.0}, {"output_dir", dir.path.string()}}
                               .dump();
  const auto r = pan_cli({"train", "--config", config.string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const json summary = json::parse(std::ifstream(dir.path / "summary.json"));
  CHECK(summary["train_auc"]["mean"].get<double>() >= 0.95);
}

TEST_CASE("cli: exit codes") {
  TempDir dir("codes");
  CHECK(pan_cli({"train", "--dataset", (dir.path / "missing").string(), "--output", dir.path.string()}).code == 3);
  CHECK(pan_cli({"train", "--set", "colour=3", "--output", dir.path.string()}).code == 2);
  CHECK(pan_cli({"train", "--set", "emb_dim=-1"}).code == 2);
  CHECK(pan_cli({"train", "--bogus-flag"}).code == 2);
  CHECK(pan_cli({}).code == 2);
  CHECK(pan_cli({"--help"}).code == 0);
}

TEST_CASE("cli: eval is deterministic and checks emb_dim") {
  TempDir dir("eval");
  Dataset ds = make_synthetic(SyntheticTask::TriangleDetection, 10, 2);
  ds.splits.test = {6, 7, 8, 9};
  ds.splits.train = {0, 1, 2, 3, 4, 5};
  save_json_graphs(dir.path / "d.json", ds);
  ModelConfig c;
  c.emb_dim = 8;
  save_checkpoint(dir.path / "m.ckpt", Model(c, ds.node_cardinalities, ds.edge_cardinalities));
  const std::vector<std::string> args{"eval", "--checkpoint", (dir.path / "m.ckpt").string(), "--dataset",
                                      (dir.path / "d.json").string(), "--json"};
  const auto first = pan_cli(args);
  INFO(first.err);
  REQUIRE(first.code == 0);
  const double auc = json::parse(first.out)["roc_auc"];
  CHECK(auc >= 0.0);
  CHECK(auc <= 1.0);
  CHECK(pan_cli(args).out == first.out);
  auto wrong = args;
  wrong.insert(wrong.end(), {"--emb-dim", "16"});
  CHECK(pan_cli(wrong).code == 2);
}

TEST_CASE("cli: inspect-met") {
  TempDir dir("inspect");
  const fs::path file = dir.path / "g.json";
  write_graphs(file, {build_graph(3, {{0, 1}, {1, 2}, {0, 2}}), build_graph(4, {{1, 0}, {1, 2}, {1, 3}})});
  auto met_of = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"inspect-met", "--graphs", file.string(), "--json"};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = pan_cli(args);
    REQUIRE(r.code == 0);
    return json::parse(r.out);
  };
  const json k3 = met_of({"-L", "2"});
  for (int i = 0; i < 3; ++i) {
    CHECK(k3["diag"][i].get<double>() == doctest::Approx(k3["diag"][0].get<double>()).epsilon(1e-15));
    for (int j = 0; j < 3; ++j)
      CHECK(k3["met"][i][j].get<double>() == doctest::Approx(k3["met"][j][i].get<double>()).epsilon(1e-15));
  }
  const json id = met_of({"-L", "0"});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(id["met"][i][j].get<double>() == (i == j ? 1.0 : 0.0));
  // Unit path weights: the centre closes 3 two-step walks, each leaf 1.
  const json star = met_of({"--index", "1", "-L", "2", "-T", "1e12", "--normalization", "row"});
  CHECK(star["ranking"][0] == 1);
  CHECK(pan_cli({"inspect-met", "--graphs", file.string(), "-T", "0"}).code == 2);
  CHECK(pan_cli({"inspect-met", "--graphs", file.string(), "--index", "9"}).code == 3);
}

TEST_CASE("cli: gradcheck") {
  CHECK(pan_cli({"gradcheck"}).code == 0);
  CHECK(pan_cli({"gradcheck", "--variant", "pan"}).code == 0);
  CHECK(pan_cli({"gradcheck", "--tol", "1e-12"}).code == 5);
}

TEST_CASE("cli: ingest and params") {
  TempDir dir("ingest");
  const fs::path raw = dir.path / "ogb";
  fs::create_directories(raw);
  std::ofstream(raw / "edge.csv") << "0,1\n1,0\n";
  std::ofstream(raw / "num-node-list.csv") << "2\n1\n";
  std::ofstream(raw / "num-edge-list.csv") << "2\n0\n";
  std::ofstream(raw / "node-feat.csv") << "1\n2\n0\n";
  std::ofstream(raw / "edge-feat.csv") << "3\n3\n";
  std::ofstream(raw / "graph-label.csv") << "0\n1\n";
  std::ofstream(raw / "train.csv") << "0\n1\n";
  std::ofstream(raw / "valid.csv") << "";
  std::ofstream(raw / "test.csv") << "";
  const auto r = pan_cli({"ingest", "--input", raw.string(), "--output", (dir.path / "g.json").string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const Dataset ds = load_json_graphs(dir.path / "g.json");
  CHECK(ds.graphs.size() == 2);
  CHECK(ds.graphs[1].edge_feat().cols == 1);

  const auto p = pan_cli({"params", "--dataset", (dir.path / "g.json").string(), "--json"});
  REQUIRE(p.code == 0);
  const json report = json::parse(p.out);
  CHECK(report["components"]["atom_encoder"] == 3 * 64);
  CHECK(report["components"]["edge_encoder"] == 4 * 64);
  CHECK(pan_cli({"ingest", "--input", (dir.path / "nothing").string(), "--output", "x.json"}).code == 3);
}

TEST_CASE("format_mean_std") {
  const double v[] = {0.7, 0.8, 0.9};
  CHECK(cli::format_mean_std(v) == "80.00 ± 10.00");
}
