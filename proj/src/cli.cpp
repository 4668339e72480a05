#include "pan/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pan/checkpoint.hpp"
#include "pan/error.hpp"
#include "pan/met.hpp"
#include "pan/training.hpp"

namespace pan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// ModelConfig plus data, output and harness settings. Flat JSON keys.
struct RunConfig {
  ModelConfig model;
  std::string dataset;
  std::string dataset_format = "auto";  // auto | ogb | json | synthetic
  std::size_t synthetic_graphs = 40;
  std::string output_dir = "runs";
  std::size_t runs = 1;
  bool eval_train = false;
};

void apply_run_key(RunConfig& rc, const std::string& key, const json& value) {
  if (apply_config_key(rc.model, key, value)) return;
  try {
    if (key == "dataset") {
      rc.dataset = value.get<std::string>();
    } else if (key == "dataset_format") {
      rc.dataset_format = value.get<std::string>();
    } else if (key == "synthetic_graphs") {
      rc.synthetic_graphs = value.get<std::size_t>();
    } else if (key == "output_dir") {
      rc.output_dir = value.get<std::string>();
    } else if (key == "runs") {
      rc.runs = value.get<std::size_t>();
    } else if (key == "eval_train") {
      rc.eval_train = value.get<bool>();
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': " + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, "config file " + path + ": " + e.what());
  }
}

/// "key=value" where value is JSON, or a bare string if it does not parse.
std::pair<std::string, json> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::InvalidArgument, "override must be key=value: " + text);
  const std::string key = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return {key, value};
}

Dataset load_dataset(const std::string& path, const std::string& format, std::size_t synthetic_graphs,
                     std::uint64_t seed) {
  if (format == "synthetic") return make_synthetic(SyntheticTask::TriangleDetection, synthetic_graphs, seed);
  if (path.empty()) throw Error(ErrorCode::MissingFile, "no dataset path given");
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "dataset path " + path + " does not exist");
  const bool as_ogb = format == "ogb" || (format == "auto" && fs::is_directory(path));
  if (as_ogb) return load_ogb_raw(path);
  if (format == "json" || format == "auto") return load_json_graphs(path);
  throw Error(ErrorCode::InvalidArgument, "unknown dataset format '" + format + "'");
}

int compute_exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::CodeOutOfRange:
    case ErrorCode::BadLabel:
    case ErrorCode::DegenerateLabels:
    case ErrorCode::MissingFile:
      return kDataError;
    case ErrorCode::InvalidArgument:
      return kConfigError;
    default:
      return kNumericError;
  }
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << *v;
  return s.str();
}

std::string with_thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dataset;
  std::optional<std::string> format;
  std::optional<std::string> output;
  std::optional<std::size_t> epochs;
  std::optional<std::string> variant;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  try {
    if (!args.config.empty()) {
      const json doc = read_json_file(args.config);
      if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config file must hold a JSON object");
      for (const auto& [k, v] : doc.items()) apply_run_key(rc, k, v);
    }
    for (const auto& o : args.overrides) {
      auto [k, v] = parse_override(o);
      apply_run_key(rc, k, v);
    }
    if (args.runs) rc.runs = *args.runs;
    if (args.seed) rc.model.seed = *args.seed;
    if (args.dataset) rc.dataset = *args.dataset;
    if (args.format) rc.dataset_format = *args.format;
    if (args.output) rc.output_dir = *args.output;
    if (args.epochs) rc.model.epochs = *args.epochs;
    if (args.variant) rc.model.variant = parse_variant(*args.variant);
    rc.model.validate();
    if (rc.runs == 0) throw Error(ErrorCode::InvalidArgument, "runs must be >= 1");
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  Dataset ds;
  try {
    ds = load_dataset(rc.dataset, rc.dataset_format, rc.synthetic_graphs, rc.model.seed);
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }

  std::error_code ec;
  fs::create_directories(rc.output_dir, ec);
  if (ec) {
    err << "config error: cannot create output directory " << rc.output_dir << ": " << ec.message() << '\n';
    return kConfigError;
  }

  std::vector<double> train_aucs, val_aucs, test_aucs;
  json runs = json::array();
  std::size_t param_count = 0;
  const std::size_t threads = default_thread_count();
  for (std::size_t r = 0; r < rc.runs; ++r) {
    ModelConfig cfg = rc.model;
    cfg.seed = rc.model.seed + r;
    const fs::path log_path = fs::path(rc.output_dir) / ("run_" + std::to_string(r) + ".jsonl");
    std::ofstream log_file(log_path);
    TrainOptions options;
    options.threads = threads;
    options.eval_train = rc.eval_train;
    options.on_epoch = [&](const EpochLog& entry) {
      json line = to_json(entry);
      line["run"] = r;
      log_file << line.dump() << '\n';
    };
    try {
      TrainResult result = train(cfg, ds, options);
      save_checkpoint(fs::path(rc.output_dir) / ("run_" + std::to_string(r) + ".ckpt"), result.model);
      param_count = result.model.count_parameters().total;
      out << "run " << r << " seed " << cfg.seed << ": best epoch " << result.best_epoch
          << "  train_auc " << format_optional(result.train_auc) << "  val_auc " << format_optional(result.val_auc)
          << "  test_auc " << format_optional(result.test_auc) << '\n';
      if (result.train_auc) train_aucs.push_back(*result.train_auc);
      if (result.val_auc) val_aucs.push_back(*result.val_auc);
      if (result.test_auc) test_aucs.push_back(*result.test_auc);
      auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
      runs.push_back({{"run", r},
                      {"seed", cfg.seed},
                      {"best_epoch", result.best_epoch},
                      {"train_auc", opt(result.train_auc)},
                      {"val_auc", opt(result.val_auc)},
                      {"test_auc", opt(result.test_auc)}});
    } catch (const Error& e) {
      err << "run " << r << " failed: " << e.what() << '\n';
      return compute_exit_code(e);
    }
  }

  auto stats = [](const std::vector<double>& v) {
    return v.empty() ? json(nullptr) : json{{"mean", mean_of(v)}, {"std", sample_std(v)}, {"n", v.size()}};
  };
  json summary;
  summary["config"] = config_to_json(rc.model);
  summary["runs"] = runs;
  summary["train_auc"] = stats(train_aucs);
  summary["val_auc"] = stats(val_aucs);
  summary["test_auc"] = stats(test_aucs);
  summary["params"] = param_count;
  std::ofstream(fs::path(rc.output_dir) / "summary.json") << summary.dump(2) << '\n';

  if (!train_aucs.empty()) out << "train ROC-AUC " << format_mean_std(train_aucs) << '\n';
  out << "Model | ROC-AUC Val | ROC-AUC Test | #Params\n";
  auto cell = [](const std::vector<double>& v) { return v.empty() ? std::string("n/a") : format_mean_std(v); };
  out << to_string(rc.model.variant) << " | " << cell(val_aucs) << " | "
      << cell(test_aucs) << " | " << with_thousands(param_count) << '\n';
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string format = "auto";
  std::string split = "test";
  std::optional<std::size_t> emb_dim;
  bool json_output = false;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  std::optional<Model> model;
  try {
    model = load_checkpoint(args.checkpoint);
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  if (args.emb_dim && *args.emb_dim != model->config().emb_dim) {
    err << "config error: --emb-dim " << *args.emb_dim << " does not match checkpoint emb_dim "
        << model->config().emb_dim << '\n';
    return kConfigError;
  }
  if (args.split != "train" && args.split != "valid" && args.split != "test" && args.split != "all") {
    err << "config error: unknown split " << args.split << '\n';
    return kConfigError;
  }
  Dataset ds;
  try {
    ds = load_dataset(args.dataset, args.format, 0, 0);
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  std::vector<std::size_t> indices;
  if (args.split == "all") {
    indices.resize(ds.graphs.size());
    std::iota(indices.begin(), indices.end(), 0);
  } else {
    indices = args.split == "train" ? ds.splits.train : args.split == "valid" ? ds.splits.valid : ds.splits.test;
  }
  try {
    const auto auc = split_auc(*model, ds.graphs, indices, default_thread_count());
    if (!auc) {
      err << "data error: split '" << args.split << "' is empty or has a single class\n";
      return kDataError;
    }
    if (args.json_output) {
      out << json{{"split", args.split}, {"graphs", indices.size()}, {"roc_auc", *auc}}.dump() << '\n';
    } else {
      out << "split " << args.split << " graphs " << indices.size() << " roc_auc " << std::setprecision(10) << *auc
          << '\n';
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return compute_exit_code(e);
  }
  return kOk;
}

struct InspectArgs {
  std::string graphs;
  std::size_t index = 0;
  std::size_t cutoff = 2;
  double temperature = 1.0;
  std::string normalization = "symmetric";
  bool json_output = false;
};

int cmd_inspect_met(const InspectArgs& args, std::ostream& out, std::ostream& err) {
  Normalization norm;
  PathWeights weights;
  try {
    norm = parse_normalization(args.normalization);
    weights = boltzmann_weights(args.cutoff, args.temperature);
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  Dataset ds;
  try {
    ds = load_json_graphs(args.graphs);
    if (args.index >= ds.graphs.size()) {
      throw Error(ErrorCode::InvalidArgument, "graph index " + std::to_string(args.index) + " out of range (" +
                                                  std::to_string(ds.graphs.size()) + " graphs)");
    }
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  MetMatrix met;
  try {
    met = met_matrix(ds.graphs[args.index], weights, norm);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return compute_exit_code(e);
  }
  std::vector<std::size_t> ranking(met.diag.size());
  std::iota(ranking.begin(), ranking.end(), 0);
  std::stable_sort(ranking.begin(), ranking.end(),
                   [&](std::size_t a, std::size_t b) { return met.diag[a] > met.diag[b]; });

  if (args.json_output) {
    json m = json::array();
    for (std::size_t i = 0; i < met.m.rows(); ++i) {
      m.push_back(std::vector<double>(met.m.row(i).begin(), met.m.row(i).end()));
    }
    out << json{{"graph", args.index},       {"cutoff", args.cutoff},     {"temperature", args.temperature},
                {"normalization", to_string(norm)}, {"weights", weights.w}, {"met", m},
                {"diag", met.diag},           {"z", met.z},                {"ranking", ranking}}
               .dump()
        << '\n';
    return kOk;
  }
  out << "MET matrix (graph " << args.index << ", L=" << args.cutoff << ", T=" << args.temperature << ", "
      << to_string(norm) << ")\n";
  out << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < met.m.rows(); ++i) {
    for (std::size_t j = 0; j < met.m.cols(); ++j) out << (j ? " " : "") << std::setw(9) << met.m(i, j);
    out << '\n';
  }
  out << "diag:";
  for (double d : met.diag) out << ' ' << d;
  out << "\nranking:";
  for (std::size_t r : ranking) out << ' ' << r;
  out << '\n';
  return kOk;
}

struct GradCheckArgs {
  std::string variant = "both";
  double h = 1e-5;
  double tol = 1e-4;
  std::size_t emb_dim = 8;
  std::uint64_t seed = 0;
  std::string config;
  bool json_output = false;
};

int cmd_gradcheck(const GradCheckArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<ModelConfig> configs;
  try {
    ModelConfig base;
    base.emb_dim = args.emb_dim;
    base.seed = args.seed;
    if (!args.config.empty()) {
      const json doc = read_json_file(args.config);
      if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config file must hold a JSON object");
      for (const auto& [k, v] : doc.items()) {
        if (!apply_config_key(base, k, v)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + k + "'");
      }
    }
    std::vector<Variant> variants;
    if (args.variant == "both") {
      variants = {Variant::PAN, Variant::HPAN};
    } else {
      variants = {parse_variant(args.variant)};
    }
    for (Variant v : variants) {
      ModelConfig c = base;
      c.variant = v;
      c.validate();
      configs.push_back(c);
    }
    if (!(args.h > 0.0) || !(args.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "h and tol must be > 0");
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  bool all_passed = true;
  json report = json::array();
  for (const auto& c : configs) {
    GradCheckReport r;
    try {
      r = run_model_gradcheck(c, args.h, args.tol);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return compute_exit_code(e);
    }
    all_passed = all_passed && r.passed;
    if (args.json_output) {
      json groups = json::array();
      for (const auto& g : r.groups) {
        groups.push_back({{"group", g.group}, {"elements", g.elements}, {"max_rel_error", g.max_rel_error},
                          {"passed", g.passed}});
      }
      report.push_back({{"variant", to_string(c.variant)}, {"passed", r.passed}, {"worst_rel_error", r.worst_rel_error},
                        {"near_kink", r.near_kink}, {"groups", groups}});
      continue;
    }
    out << to_string(c.variant) << " gradient check (h=" << args.h << ", tol=" << args.tol << ")\n";
    for (const auto& g : r.groups) {
      out << "  " << std::left << std::setw(14) << g.group << std::right << std::setw(6) << g.elements
          << "  max rel err " << std::scientific << std::setprecision(3) << g.max_rel_error << std::defaultfloat
          << (g.passed ? "  ok" : "  FAIL") << '\n';
    }
    if (r.near_kink) out << "  warning: an input lies within " << 10 * args.h << " of a non-differentiable point\n";
    out << "  " << (r.passed ? "PASS" : "FAIL") << '\n';
  }
  if (args.json_output) out << json{{"passed", all_passed}, {"variants", report}}.dump() << '\n';
  return all_passed ? kOk : kGradCheckFailed;
}

struct IngestArgs {
  std::string input;
  std::string output;
};

int cmd_ingest(const IngestArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const Dataset ds = load_ogb_raw(args.input, [&](const std::string& m) { err << "warning: " << m << '\n'; });
    save_json_graphs(args.output, ds);
    out << "wrote " << ds.graphs.size() << " graphs to " << args.output << '\n';
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

struct ParamsArgs {
  std::string config;
  std::optional<std::string> variant;
  std::optional<std::size_t> emb_dim;
  std::vector<std::size_t> node_cards;
  std::vector<std::size_t> edge_cards;
  std::string dataset;
  bool json_output = false;
};

int cmd_params(const ParamsArgs& args, std::ostream& out, std::ostream& err) {
  ModelConfig cfg;
  try {
    if (!args.config.empty()) {
      const json doc = read_json_file(args.config);
      for (const auto& [k, v] : doc.items()) {
        if (!apply_config_key(cfg, k, v)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + k + "'");
      }
    }
    if (args.variant) cfg.variant = parse_variant(*args.variant);
    if (args.emb_dim) cfg.emb_dim = *args.emb_dim;
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  std::vector<std::size_t> node_cards = args.node_cards, edge_cards = args.edge_cards;
  if (!args.dataset.empty()) {
    try {
      Dataset ds = load_dataset(args.dataset, "auto", 0, 0);
      node_cards = ds.node_cardinalities;
      edge_cards = ds.edge_cardinalities;
    } catch (const Error& e) {
      err << "data error: " << e.what() << '\n';
      return kDataError;
    }
  }
  try {
    const Model model(cfg, node_cards, edge_cards);
    const auto report = model.count_parameters();
    if (args.json_output) {
      json comps = json::object();
      for (const auto& [name, n] : report.components) comps[name] = n;
      out << json{{"variant", to_string(cfg.variant)}, {"components", comps}, {"total", report.total}}.dump() << '\n';
    } else {
      for (const auto& [name, n] : report.components) out << std::left << std::setw(14) << name << ' ' << n << '\n';
      out << std::left << std::setw(14) << "total" << ' ' << report.total << '\n';
    }
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}

}  // namespace

std::string format_mean_std(std::span<const double> values) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * mean_of(values) << " ± " << 100.0 * sample_std(values);
  return s.str();
}

Graph gradcheck_fixture() {
  std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {0, 2}};
  IntMatrix node_feat{{0, 1}, {1, 0}, {2, 2}, {3, 1}, {1, 2}};
  IntMatrix edge_feat{{0, 1}, {1, 0}, {2, 1}, {0, 0}, {1, 1}, {2, 0}};
  return build_graph(5, std::move(edges), std::move(node_feat), std::move(edge_feat), 1);
}

GradCheckReport run_model_gradcheck(const ModelConfig& config, double h, double tol) {
  const Graph g = gradcheck_fixture();
  Model model(config, {4, 3}, {3, 2});
  std::mt19937_64 rng(config.seed + 17);
  std::uniform_real_distribution<double> shift(-0.1, 0.1), spread(0.5, 1.5);
  for (auto& [name, buffer] : model.buffers()) {
    const bool is_var = name.ends_with("running_var");
    for (double& x : buffer->data()) x = is_var ? spread(rng) : shift(rng);
  }
  PartitionCache partitions;
  const int labels[] = {*g.label()};
  const double alpha = config.effective_alpha();
  auto loss = [&](Tape& tape) {
    partitions.begin_pass();
    ForwardContext ctx;
    ctx.partitions = &partitions;
    const Tensor logit = model.forward(tape, g, ctx);
    if (partitions.recording()) partitions.freeze();
    return weighted_bce(logit, labels, alpha);
  };
  return grad_check(model.parameters(), loss, h, tol);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Path integral graph networks: training, evaluation and diagnostics", "pan"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one or more seeded runs and summarize ROC-AUC");
  train_cmd->add_option("--config", train_args.config, "JSON config file with flat keys");
  train_cmd->add_option("--set", train_args.overrides, "Override a config key: key=value (repeatable)");
  train_cmd->add_option("--runs", train_args.runs, "Number of seeded runs");
  train_cmd->add_option("--seed", train_args.seed, "Seed of the first run; run k uses seed + k");
  train_cmd->add_option("--dataset", train_args.dataset, "Dataset path (OGB raw directory or JSON file)");
  train_cmd->add_option("--format", train_args.format, "auto | ogb | json | synthetic");
  train_cmd->add_option("--output", train_args.output, "Output directory");
  train_cmd->add_option("--epochs", train_args.epochs, "Epochs per run");
  train_cmd->add_option("--variant", train_args.variant, "PAN | HPAN");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "Dataset path")->required();
  eval_cmd->add_option("--format", eval_args.format, "auto | ogb | json");
  eval_cmd->add_option("--split", eval_args.split, "train | valid | test | all");
  eval_cmd->add_option("--emb-dim", eval_args.emb_dim, "Expected embedding width (checked against the checkpoint)");
  eval_cmd->add_flag("--json", eval_args.json_output, "Machine-readable output");

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect-met", "Print the MET matrix, its diagonal and node ranking");
  inspect_cmd->add_option("--graphs", inspect_args.graphs, "JSON graph file")->required();
  inspect_cmd->add_option("--index", inspect_args.index, "Graph index");
  inspect_cmd->add_option("-L,--cutoff", inspect_args.cutoff, "Maximal walk length");
  inspect_cmd->add_option("-T,--temperature", inspect_args.temperature, "Boltzmann temperature");
  inspect_cmd->add_option("--normalization", inspect_args.normalization, "symmetric | row");
  inspect_cmd->add_flag("--json", inspect_args.json_output, "Machine-readable output");

  GradCheckArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all parameter gradients");
  grad_cmd->add_option("--variant", grad_args.variant, "pan | hpan | both");
  grad_cmd->add_option("--step", grad_args.h, "Central-difference step");
  grad_cmd->add_option("--tol", grad_args.tol, "Relative error tolerance");
  grad_cmd->add_option("--emb-dim", grad_args.emb_dim, "Embedding width of the checked model");
  grad_cmd->add_option("--seed", grad_args.seed, "Initialization seed");
  grad_cmd->add_option("--config", grad_args.config, "JSON model config");
  grad_cmd->add_flag("--json", grad_args.json_output, "Machine-readable output");

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert an OGB raw CSV directory to the JSON graph format");
  ingest_cmd->add_option("--input", ingest_args.input, "OGB raw directory")->required();
  ingest_cmd->add_option("--output", ingest_args.output, "JSON output file")->required();

  ParamsArgs params_args;
  auto* params_cmd = app.add_subcommand("params", "Report trainable parameter counts per component");
  params_cmd->add_option("--config", params_args.config, "JSON model config");
  params_cmd->add_option("--variant", params_args.variant, "PAN | HPAN");
  params_cmd->add_option("--emb-dim", params_args.emb_dim, "Embedding width");
  params_cmd->add_option("--node-cards", params_args.node_cards, "Node field cardinalities")->delimiter(',');
  params_cmd->add_option("--edge-cards", params_args.edge_cards, "Edge field cardinalities")->delimiter(',');
  params_cmd->add_option("--dataset", params_args.dataset, "Infer cardinalities from a dataset");
  params_cmd->add_flag("--json", params_args.json_output, "Machine-readable output");

  std::vector<std::string> storage{"pan"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kConfigError;
  }

  if (train_cmd->parsed()) return cmd_train(train_args, out, err);
  if (eval_cmd->parsed()) return cmd_eval(eval_args, out, err);
  if (inspect_cmd->parsed()) return cmd_inspect_met(inspect_args, out, err);
  if (grad_cmd->parsed()) return cmd_gradcheck(grad_args, out, err);
  if (ingest_cmd->parsed()) return cmd_ingest(ingest_args, out, err);
  if (params_cmd->parsed()) return cmd_params(params_args, out, err);
  return kUsage;
}

}  // namespace pan::cli
