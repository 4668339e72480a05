#include "pan/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pan/error.hpp"

namespace pan {

namespace fs = std::filesystem;
using nlohmann::json;

void default_warning_sink(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

namespace {

/// Rows of a headerless integer CSV. gzopen reads plain files transparently.
std::vector<std::vector<std::int64_t>> read_int_csv(const fs::path& path) {
  std::unique_ptr<gzFile_s, decltype(&gzclose)> file(gzopen(path.string().c_str(), "rb"), &gzclose);
  if (!file) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());

  std::vector<std::vector<std::int64_t>> rows;
  std::string line;
  char buf[1 << 16];
  std::size_t line_no = 0;
  auto flush_line = [&]() {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) return;
    std::vector<std::int64_t> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::size_t end = comma == std::string::npos ? line.size() : comma;
      std::string_view field(line.data() + start, end - start);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::NonIntegerField,
                    path.string() + ":" + std::to_string(line_no) + ": '" + std::string(field) + "'");
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  };
  while (gzgets(file.get(), buf, sizeof(buf)) != nullptr) {
    line += buf;
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      flush_line();
      line.clear();
    }
  }
  if (!line.empty()) flush_line();
  return rows;
}

std::optional<fs::path> locate(const std::vector<fs::path>& dirs, const std::string& stem) {
  for (const auto& d : dirs) {
    for (const char* ext : {".csv", ".csv.gz"}) {
      fs::path p = d / (stem + ext);
      if (fs::exists(p)) return p;
    }
  }
  return std::nullopt;
}

fs::path require_file(const std::vector<fs::path>& dirs, const std::string& stem) {
  auto p = locate(dirs, stem);
  if (!p) throw Error(ErrorCode::MissingFile, stem + ".csv[.gz] not found under " + dirs.front().string());
  return *p;
}

std::vector<std::int64_t> single_column(const std::vector<std::vector<std::int64_t>>& rows, const std::string& name) {
  std::vector<std::int64_t> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 1) {
      throw Error(ErrorCode::RowCountMismatch, name + " row " + std::to_string(i) + " has " +
                                                   std::to_string(rows[i].size()) + " columns, expected 1");
    }
    out.push_back(rows[i][0]);
  }
  return out;
}

IntMatrix to_matrix(const std::vector<std::vector<std::int64_t>>& rows, std::size_t begin, std::size_t count,
                    std::size_t cols, const std::string& name) {
  IntMatrix m(count, cols);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& r = rows[begin + i];
    if (r.size() != cols) {
      throw Error(ErrorCode::RowCountMismatch, name + " row " + std::to_string(begin + i) + " has " +
                                                   std::to_string(r.size()) + " columns, expected " +
                                                   std::to_string(cols));
    }
    std::copy(r.begin(), r.end(), m.data.begin() + i * cols);
  }
  return m;
}

std::vector<std::size_t> to_indices(const std::vector<std::int64_t>& v, const std::string& name) {
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (auto x : v) {
    if (x < 0) throw Error(ErrorCode::SchemaViolation, name + " contains negative index " + std::to_string(x));
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

/// Collapses directed rows of one graph into undirected edges.
Graph assemble_graph(std::size_t gi, std::size_t num_nodes, const std::vector<std::vector<std::int64_t>>& edge_rows,
                     std::size_t edge_begin, std::size_t edge_count, const IntMatrix& edge_feat_all,
                     IntMatrix node_feat, std::optional<int> label, const WarningSink& warn) {
  struct Seen {
    std::size_t edge_index;
    bool forward = false;
    bool backward = false;
  };
  std::map<Edge, Seen> seen;
  std::vector<Edge> edges;
  std::vector<std::size_t> feat_rows;
  const std::string where = "graph " + std::to_string(gi);

  for (std::size_t k = 0; k < edge_count; ++k) {
    const auto& row = edge_rows[edge_begin + k];
    if (row.size() != 2) throw Error(ErrorCode::RowCountMismatch, "edge row " + std::to_string(edge_begin + k) + " needs 2 columns");
    if (row[0] < 0 || row[1] < 0 || static_cast<std::size_t>(row[0]) >= num_nodes ||
        static_cast<std::size_t>(row[1]) >= num_nodes) {
      throw Error(ErrorCode::OutOfRangeEndpoint, where + " edge row " + std::to_string(k) + " = (" +
                                                     std::to_string(row[0]) + ", " + std::to_string(row[1]) + ")");
    }
    const std::size_t u = static_cast<std::size_t>(row[0]);
    const std::size_t v = static_cast<std::size_t>(row[1]);
    const Edge key = u <= v ? Edge{u, v} : Edge{v, u};
    const bool is_forward = u <= v;
    auto it = seen.find(key);
    if (it == seen.end()) {
      Seen s{edges.size()};
      (is_forward ? s.forward : s.backward) = true;
      seen.emplace(key, s);
      edges.emplace_back(u, v);
      feat_rows.push_back(edge_begin + k);
      continue;
    }
    Seen& s = it->second;
    bool& dir = is_forward ? s.forward : s.backward;
    if (dir && u != v) {
      warn(where + ": directed edge (" + std::to_string(u) + ", " + std::to_string(v) + ") listed twice; extra row ignored");
      continue;
    }
    if (u == v) {
      warn(where + ": self-loop on node " + std::to_string(u) + " listed twice; extra row ignored");
      continue;
    }
    dir = true;
    const auto first = edge_feat_all.row(feat_rows[s.edge_index]);
    const auto second = edge_feat_all.row(edge_begin + k);
    if (!std::equal(first.begin(), first.end(), second.begin())) {
      warn(where + ": edge (" + std::to_string(key.first) + ", " + std::to_string(key.second) +
           ") has different features per direction; keeping the first row");
    }
  }
  for (const auto& [key, s] : seen) {
    if (key.first != key.second && !(s.forward && s.backward)) {
      warn(where + ": UnpairedDirectedEdge (" + std::to_string(key.first) + ", " + std::to_string(key.second) +
           "); kept as undirected");
    }
  }

  IntMatrix edge_feat(edges.size(), edge_feat_all.cols);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto r = edge_feat_all.row(feat_rows[e]);
    std::copy(r.begin(), r.end(), edge_feat.data.begin() + e * edge_feat_all.cols);
  }
  return build_graph(num_nodes, std::move(edges), std::move(node_feat), std::move(edge_feat), label);
}

[[noreturn]] void schema_error(const std::string& pointer, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, (pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

std::int64_t json_int(const json& j, const std::string& pointer) {
  if (!j.is_number_integer()) schema_error(pointer, "expected an integer");
  return j.get<std::int64_t>();
}

std::size_t json_count(const json& j, const std::string& pointer) {
  const auto v = json_int(j, pointer);
  if (v < 0) schema_error(pointer, "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

IntMatrix json_matrix(const json& j, const std::string& pointer) {
  if (!j.is_array()) schema_error(pointer, "expected an array of rows");
  IntMatrix m;
  m.rows = j.size();
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rp = pointer + "/" + std::to_string(r);
    if (!j[r].is_array()) schema_error(rp, "expected an array");
    if (r == 0) m.cols = j[r].size();
    if (j[r].size() != m.cols) schema_error(rp, "row width differs from row 0");
    for (std::size_t c = 0; c < j[r].size(); ++c) m.data.push_back(json_int(j[r][c], rp + "/" + std::to_string(c)));
  }
  return m;
}

}  // namespace

Dataset load_ogb_raw(const fs::path& dir, const WarningSink& warn) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, "dataset directory " + dir.string() + " not found");
  const std::vector<fs::path> data_dirs{dir, dir / "raw"};
  const std::vector<fs::path> split_dirs{dir, dir / "split" / "scaffold", dir / "split"};

  const auto num_nodes = single_column(read_int_csv(require_file(data_dirs, "num-node-list")), "num-node-list");
  const auto num_edges = single_column(read_int_csv(require_file(data_dirs, "num-edge-list")), "num-edge-list");
  const auto labels = single_column(read_int_csv(require_file(data_dirs, "graph-label")), "graph-label");
  const auto edge_rows = read_int_csv(require_file(data_dirs, "edge"));
  const auto node_rows = read_int_csv(require_file(data_dirs, "node-feat"));
  const auto edge_feat_path = locate(data_dirs, "edge-feat");
  const std::vector<std::vector<std::int64_t>> edge_feat_rows =
      edge_feat_path ? read_int_csv(*edge_feat_path) : std::vector<std::vector<std::int64_t>>(edge_rows.size());

  const std::size_t n_graphs = num_nodes.size();
  if (num_edges.size() != n_graphs || labels.size() != n_graphs) {
    throw Error(ErrorCode::RowCountMismatch, "num-node-list, num-edge-list and graph-label lengths differ (" +
                                                 std::to_string(n_graphs) + ", " + std::to_string(num_edges.size()) +
                                                 ", " + std::to_string(labels.size()) + ")");
  }
  auto total = [](const std::vector<std::int64_t>& v) {
    return std::accumulate(v.begin(), v.end(), std::int64_t{0});
  };
  if (static_cast<std::size_t>(total(num_nodes)) != node_rows.size()) {
    throw Error(ErrorCode::RowCountMismatch, "sum of num-node-list = " + std::to_string(total(num_nodes)) +
                                                 " but node-feat has " + std::to_string(node_rows.size()) + " rows");
  }
  if (static_cast<std::size_t>(total(num_edges)) != edge_rows.size()) {
    throw Error(ErrorCode::RowCountMismatch, "sum of num-edge-list = " + std::to_string(total(num_edges)) +
                                                 " but edge has " + std::to_string(edge_rows.size()) + " rows");
  }
  if (edge_feat_rows.size() != edge_rows.size()) {
    throw Error(ErrorCode::RowCountMismatch, "edge-feat has " + std::to_string(edge_feat_rows.size()) +
                                                 " rows, edge has " + std::to_string(edge_rows.size()));
  }

  const std::size_t node_cols = node_rows.empty() ? 0 : node_rows.front().size();
  const std::size_t edge_cols = edge_feat_rows.empty() ? 0 : edge_feat_rows.front().size();
  const IntMatrix edge_feat_all = to_matrix(edge_feat_rows, 0, edge_feat_rows.size(), edge_cols, "edge-feat");

  Dataset ds;
  ds.graphs.reserve(n_graphs);
  std::size_t node_offset = 0, edge_offset = 0;
  for (std::size_t gi = 0; gi < n_graphs; ++gi) {
    if (num_nodes[gi] < 0 || num_edges[gi] < 0) throw Error(ErrorCode::RowCountMismatch, "negative count for graph " + std::to_string(gi));
    const auto nn = static_cast<std::size_t>(num_nodes[gi]);
    const auto ne = static_cast<std::size_t>(num_edges[gi]);
    if (labels[gi] != 0 && labels[gi] != 1) {
      throw Error(ErrorCode::BadLabel, "graph " + std::to_string(gi) + " label " + std::to_string(labels[gi]));
    }
    ds.graphs.push_back(assemble_graph(gi, nn, edge_rows, edge_offset, ne, edge_feat_all,
                                       to_matrix(node_rows, node_offset, nn, node_cols, "node-feat"),
                                       static_cast<int>(labels[gi]), warn));
    node_offset += nn;
    edge_offset += ne;
  }

  for (auto [name, target] : {std::pair{"train", &ds.splits.train}, std::pair{"valid", &ds.splits.valid},
                              std::pair{"test", &ds.splits.test}}) {
    *target = to_indices(single_column(read_int_csv(require_file(split_dirs, name)), name), name);
  }
  validate_splits(ds);
  infer_cardinalities(ds);
  return ds;
}

Dataset parse_json_graphs(const json& doc) {
  if (!doc.is_object()) schema_error("", "expected an object");
  if (!doc.contains("graphs") || !doc["graphs"].is_array()) schema_error("/graphs", "expected an array");
  const json& graphs = doc["graphs"];
  if (graphs.empty()) schema_error("/graphs", "at least one graph is required");

  Dataset ds;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const std::string gp = "/graphs/" + std::to_string(gi);
    const json& g = graphs[gi];
    if (!g.is_object()) schema_error(gp, "expected an object");
    for (const auto& [key, value] : g.items()) {
      if (key != "num_nodes" && key != "edges" && key != "node_feat" && key != "edge_feat" && key != "label") {
        schema_error(gp + "/" + key, "unknown key");
      }
    }
    if (!g.contains("num_nodes")) schema_error(gp + "/num_nodes", "missing");
    const std::size_t n = json_count(g["num_nodes"], gp + "/num_nodes");

    std::vector<Edge> edges;
    if (g.contains("edges")) {
      const json& je = g["edges"];
      if (!je.is_array()) schema_error(gp + "/edges", "expected an array");
      for (std::size_t e = 0; e < je.size(); ++e) {
        const std::string ep = gp + "/edges/" + std::to_string(e);
        if (!je[e].is_array() || je[e].size() != 2) schema_error(ep, "expected [u, v]");
        edges.emplace_back(json_count(je[e][0], ep + "/0"), json_count(je[e][1], ep + "/1"));
      }
    }
    IntMatrix node_feat = g.contains("node_feat") ? json_matrix(g["node_feat"], gp + "/node_feat") : IntMatrix(n, 0);
    IntMatrix edge_feat =
        g.contains("edge_feat") ? json_matrix(g["edge_feat"], gp + "/edge_feat") : IntMatrix(edges.size(), 0);
    if (node_feat.rows == 0 && n == 0) node_feat = IntMatrix(0, 0);
    std::optional<int> label;
    if (g.contains("label") && !g["label"].is_null()) {
      const auto l = json_int(g["label"], gp + "/label");
      if (l != 0 && l != 1) schema_error(gp + "/label", "expected 0 or 1");
      label = static_cast<int>(l);
    }
    if (n == 0) schema_error(gp + "/num_nodes", "graphs need at least one node");
    try {
      ds.graphs.push_back(build_graph(n, std::move(edges), std::move(node_feat), std::move(edge_feat), label));
    } catch (const Error& e) {
      schema_error(gp, e.what());
    }
  }
  // An edgeless graph cannot state its edge field count in JSON; take it
  // from the first graph that has edges.
  const auto nc = ds.graphs.front().node_feat().cols;
  std::optional<std::size_t> ec;
  for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    const Graph& g = ds.graphs[gi];
    if (g.node_feat().cols != nc) {
      schema_error("/graphs/" + std::to_string(gi) + "/node_feat", "field count differs from graph 0");
    }
    if (g.num_edges() == 0) continue;
    if (!ec) ec = g.edge_feat().cols;
    if (g.edge_feat().cols != *ec) {
      schema_error("/graphs/" + std::to_string(gi) + "/edge_feat", "field count differs from earlier graphs");
    }
  }
  for (Graph& g : ds.graphs) {
    if (g.num_edges() == 0 && ec && g.edge_feat().cols != *ec) {
      g = build_graph(g.num_nodes(), {}, g.node_feat(), IntMatrix(0, *ec), g.label());
    }
  }

  if (doc.contains("splits")) {
    const json& js = doc["splits"];
    if (!js.is_object()) schema_error("/splits", "expected an object");
    for (const auto& [key, value] : js.items()) {
      std::vector<std::size_t>* target = key == "train" ? &ds.splits.train
                                         : key == "valid" ? &ds.splits.valid
                                         : key == "test" ? &ds.splits.test
                                                         : nullptr;
      if (target == nullptr) schema_error("/splits/" + key, "unknown split");
      if (!value.is_array()) schema_error("/splits/" + key, "expected an array");
      for (std::size_t i = 0; i < value.size(); ++i) {
        target->push_back(json_count(value[i], "/splits/" + key + "/" + std::to_string(i)));
      }
    }
  } else {
    ds.splits.train.resize(ds.graphs.size());
    std::iota(ds.splits.train.begin(), ds.splits.train.end(), 0);
  }
  validate_splits(ds);
  infer_cardinalities(ds);
  return ds;
}

Dataset load_json_graphs(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, file.string() + ": " + e.what());
  }
  return parse_json_graphs(doc);
}

json dataset_to_json(const Dataset& ds) {
  json graphs = json::array();
  for (const Graph& g : ds.graphs) {
    json jg;
    jg["num_nodes"] = g.num_nodes();
    json edges = json::array();
    for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
    jg["edges"] = std::move(edges);
    auto matrix = [](const IntMatrix& m) {
      json rows = json::array();
      for (std::size_t r = 0; r < m.rows; ++r) rows.push_back(std::vector<std::int64_t>(m.row(r).begin(), m.row(r).end()));
      return rows;
    };
    jg["node_feat"] = matrix(g.node_feat());
    jg["edge_feat"] = matrix(g.edge_feat());
    if (g.label()) jg["label"] = *g.label();
    graphs.push_back(std::move(jg));
  }
  json doc;
  doc["graphs"] = std::move(graphs);
  doc["splits"] = {{"train", ds.splits.train}, {"valid", ds.splits.valid}, {"test", ds.splits.test}};
  return doc;
}

void save_json_graphs(const fs::path& file, const Dataset& ds) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
  out << dataset_to_json(ds).dump() << '\n';
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> infer_cardinalities(Dataset& ds) {
  auto infer = [&](auto feat_of) {
    std::vector<std::size_t> dims;
    for (const Graph& g : ds.graphs) {
      const IntMatrix& m = feat_of(g);
      if (dims.size() < m.cols) dims.resize(m.cols, 1);
      for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) {
          if (m(r, c) < 0) throw Error(ErrorCode::CodeOutOfRange, "negative categorical code " + std::to_string(m(r, c)));
          dims[c] = std::max(dims[c], static_cast<std::size_t>(m(r, c)) + 1);
        }
    }
    return dims;
  };
  ds.node_cardinalities = infer([](const Graph& g) -> const IntMatrix& { return g.node_feat(); });
  ds.edge_cardinalities = infer([](const Graph& g) -> const IntMatrix& { return g.edge_feat(); });
  return {ds.node_cardinalities, ds.edge_cardinalities};
}

void validate_splits(const Dataset& ds) {
  std::vector<int> owner(ds.graphs.size(), -1);
  int which = 0;
  for (const auto* split : {&ds.splits.train, &ds.splits.valid, &ds.splits.test}) {
    for (std::size_t idx : *split) {
      if (idx >= ds.graphs.size()) {
        throw Error(ErrorCode::SchemaViolation, "split index " + std::to_string(idx) + " out of range");
      }
      if (owner[idx] != -1) {
        throw Error(ErrorCode::SchemaViolation, "graph " + std::to_string(idx) + " appears in more than one split slot");
      }
      owner[idx] = which;
    }
    ++which;
  }
}

Dataset make_synthetic(SyntheticTask task, std::size_t n_graphs, std::uint64_t seed) {
  if (task != SyntheticTask::TriangleDetection) throw Error(ErrorCode::InvalidArgument, "unknown synthetic task");
  if (n_graphs % 2 != 0) throw Error(ErrorCode::InvalidArgument, "n_graphs must be even");
  std::mt19937_64 rng(seed);
  Dataset ds;
  for (std::size_t gi = 0; gi < n_graphs; ++gi) {
    const bool positive = gi % 2 == 0;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(5, 10)(rng);
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    auto connect = [&](std::size_t a, std::size_t b) { adj[a][b] = adj[b][a] = true; };
    auto closes_triangle = [&](std::size_t a, std::size_t b) {
      for (std::size_t c = 0; c < n; ++c)
        if (adj[a][c] && adj[b][c]) return true;
      return false;
    };
    // Random tree, then extra edges that keep the graph triangle-free.
    for (std::size_t i = 1; i < n; ++i) connect(i, std::uniform_int_distribution<std::size_t>(0, i - 1)(rng));
    std::vector<Edge> pairs;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    std::bernoulli_distribution coin(0.3);
    for (const auto& [a, b] : pairs) {
      if (!adj[a][b] && coin(rng) && !closes_triangle(a, b)) connect(a, b);
    }
    if (positive) {
      std::vector<std::size_t> nodes(n);
      std::iota(nodes.begin(), nodes.end(), 0);
      std::shuffle(nodes.begin(), nodes.end(), rng);
      connect(nodes[0], nodes[1]);
      connect(nodes[1], nodes[2]);
      connect(nodes[0], nodes[2]);
    }
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        if (adj[a][b]) edges.emplace_back(a, b);
    const std::size_t m = edges.size();
    ds.graphs.push_back(build_graph(n, std::move(edges), IntMatrix(n, 1, 0), IntMatrix(m, 1, 0), positive ? 1 : 0));
  }
  ds.splits.train.resize(n_graphs);
  std::iota(ds.splits.train.begin(), ds.splits.train.end(), 0);
  infer_cardinalities(ds);
  return ds;
}

}  // namespace pan
