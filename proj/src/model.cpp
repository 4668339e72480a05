#include "pan/model.hpp"

#include <random>

#include <nlohmann/json.hpp>

#include "pan/error.hpp"

namespace pan {

using nlohmann::json;

std::string_view to_string(Variant v) { return v == Variant::PAN ? "PAN" : "HPAN"; }

Variant parse_variant(std::string_view name) {
  if (name == "PAN" || name == "pan") return Variant::PAN;
  if (name == "HPAN" || name == "hpan") return Variant::HPAN;
  throw Error(ErrorCode::InvalidArgument, "unknown variant '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (emb_dim < 2) fail("emb_dim must be at least 2");
  if (!(pool_ratio > 0.0 && pool_ratio <= 1.0)) fail("pool_ratio must be in (0, 1]");
  if (!(effective_alpha() >= 1.0)) fail("alpha must be >= 1");
  if (!(temperature > 0.0)) fail("temperature must be > 0");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
}

namespace {

std::size_t count_value(const json& v) {
  if (!v.is_number_unsigned()) throw Error(ErrorCode::InvalidArgument, "expected a non-negative integer, got " + v.dump());
  return v.get<std::size_t>();
}

}  // namespace

bool apply_config_key(ModelConfig& c, std::string_view key, const json& v) {
  try {
    if (key == "variant") {
      c.variant = parse_variant(v.get<std::string>());
    } else if (key == "emb_dim") {
      c.emb_dim = count_value(v);
    } else if (key == "conv_cutoffs") {
      if (!v.is_array()) throw Error(ErrorCode::InvalidArgument, "conv_cutoffs must be an array");
      c.conv_cutoffs.clear();
      for (const auto& e : v) c.conv_cutoffs.push_back(count_value(e));
    } else if (key == "pool_ratio") {
      c.pool_ratio = v.get<double>();
    } else if (key == "alpha") {
      if (v.is_null()) {
        c.alpha.reset();
      } else {
        c.alpha = v.get<double>();
      }
    } else if (key == "normalization") {
      c.normalization = parse_normalization(v.get<std::string>());
    } else if (key == "trainable_path_weights") {
      c.trainable_path_weights = v.get<bool>();
    } else if (key == "temperature") {
      c.temperature = v.get<double>();
    } else if (key == "lump_eps") {
      c.lump_eps = v.get<double>();
    } else if (key == "epochs") {
      c.epochs = count_value(v);
    } else if (key == "batch_size") {
      c.batch_size = count_value(v);
    } else if (key == "learning_rate") {
      c.learning_rate = v.get<double>();
    } else if (key == "seed") {
      c.seed = count_value(v);
    } else {
      return false;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + std::string(key) + "': " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + std::string(key) + "': " + e.what());
  }
  return true;
}

json config_to_json(const ModelConfig& c) {
  json j;
  j["variant"] = std::string(to_string(c.variant));
  j["emb_dim"] = c.emb_dim;
  j["conv_cutoffs"] = c.conv_cutoffs;
  j["pool_ratio"] = c.pool_ratio;
  j["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
  j["normalization"] = std::string(to_string(c.normalization));
  j["trainable_path_weights"] = c.trainable_path_weights;
  j["temperature"] = c.temperature;
  j["lump_eps"] = c.lump_eps;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : doc.items()) {
    if (!apply_config_key(c, key, value)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------

Model::Model(ModelConfig config, std::vector<std::size_t> node_cardinalities,
             std::vector<std::size_t> edge_cardinalities)
    : config_(std::move(config)),
      node_cardinalities_(std::move(node_cardinalities)),
      edge_cardinalities_(std::move(edge_cardinalities)) {
  if (config_.emb_dim < 2) throw Error(ErrorCode::InvalidArgument, "emb_dim must be at least 2");
  std::mt19937_64 rng(config_.seed);
  const std::size_t d = config_.emb_dim;

  atom_encoder_ = CategoricalEncoder::create(params_, "atom_encoder", node_cardinalities_, d, rng);
  if (config_.variant == Variant::HPAN) {
    edge_encoder_ = CategoricalEncoder::create(params_, "edge_encoder", edge_cardinalities_, d, rng);
    lump_ = PanLumpLayer::create(params_, "lump", d, config_.lump_eps, rng);
  }
  for (std::size_t i = 0; i < config_.conv_cutoffs.size(); ++i) {
    const std::string idx = std::to_string(i + 1);
    convs_.push_back(PanConvLayer::create(params_, "conv" + idx, config_.conv_cutoffs[i], d, d,
                                          config_.trainable_path_weights, config_.temperature,
                                          config_.normalization, rng));
    pools_.push_back(PanPoolLayer::create(params_, "pool" + idx, d, config_.pool_ratio, rng));
  }
  head_ = MlpHead::create(params_, "head", d, rng);
}

std::vector<std::pair<std::string, DenseMatrix*>> Model::buffers() {
  std::vector<std::pair<std::string, DenseMatrix*>> out;
  if (lump_) {
    out.emplace_back("lump.mlp.bn.running_mean", &lump_->mlp.norm.state.running_mean);
    out.emplace_back("lump.mlp.bn.running_var", &lump_->mlp.norm.state.running_var);
  }
  return out;
}

std::vector<std::pair<std::string, const DenseMatrix*>> Model::buffers() const {
  std::vector<std::pair<std::string, const DenseMatrix*>> out;
  if (lump_) {
    out.emplace_back("lump.mlp.bn.running_mean", &lump_->mlp.norm.state.running_mean);
    out.emplace_back("lump.mlp.bn.running_var", &lump_->mlp.norm.state.running_var);
  }
  return out;
}

Tensor Model::forward(Tape& tape, std::span<const Graph* const> graphs, const ForwardContext& ctx) const {
  ForwardContext eval = ctx;
  eval.training = false;
  return run(tape, graphs, eval, nullptr);
}

Tensor Model::forward(Tape& tape, const Graph& g, const ForwardContext& ctx) const {
  const Graph* one[] = {&g};
  return forward(tape, one, ctx);
}

Tensor Model::forward_train(Tape& tape, std::span<const Graph* const> graphs) {
  ForwardContext ctx;
  ctx.training = true;
  return run(tape, graphs, ctx, lump_ ? &lump_->mlp : nullptr);
}

Tensor Model::run(Tape& tape, std::span<const Graph* const> graphs, const ForwardContext& ctx,
                  MlpStack* train_mlp) const {
  if (graphs.empty()) throw Error(ErrorCode::InvalidArgument, "forward on an empty batch");
  std::vector<Tensor> node_x;
  node_x.reserve(graphs.size());
  for (const Graph* g : graphs) {
    if (g->num_nodes() == 0) throw Error(ErrorCode::EmptyGraph, "forward on a graph with no nodes");
    node_x.push_back(encode(atom_encoder_, tape, g->node_feat()));
  }

  if (lump_) {
    std::vector<Tensor> pre;
    pre.reserve(graphs.size());
    for (std::size_t b = 0; b < graphs.size(); ++b) {
      const Tensor edge_x = encode(*edge_encoder_, tape, graphs[b]->edge_feat());
      pre.push_back(lump_aggregate(*lump_, *graphs[b], node_x[b], edge_x));
    }
    // Batch norm inside the lump MLP sees every node row of the batch at once.
    const Tensor stacked = pre.size() == 1 ? pre.front() : concat_rows(pre);
    const Tensor mixed = train_mlp ? train_mlp->forward_train(stacked) : lump_->mlp.forward_eval(stacked);
    if (pre.size() == 1) {
      node_x.front() = mixed;
    } else {
      std::size_t offset = 0;
      for (std::size_t b = 0; b < graphs.size(); ++b) {
        std::vector<std::size_t> rows(graphs[b]->num_nodes());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = offset + i;
        offset += rows.size();
        node_x[b] = row_gather(mixed, rows);
      }
    }
  }

  std::vector<Tensor> readouts;
  readouts.reserve(graphs.size());
  for (std::size_t b = 0; b < graphs.size(); ++b) {
    Graph current = *graphs[b];
    Tensor x = node_x[b];
    for (std::size_t h = 0; h < convs_.size(); ++h) {
      ConvOutput conv = pan_conv(convs_[h], current, x, ctx);
      const Tensor activated = relu(conv.out);
      const Tensor score = pan_pool_score(pools_[h], activated, conv.met_diag);
      PoolOutput pooled = pan_pool_select(current, activated, score, pools_[h].ratio);
      current = std::move(pooled.graph);
      x = pooled.x;
    }
    readouts.push_back(mean_readout(x));
  }
  const Tensor reps = readouts.size() == 1 ? readouts.front() : concat_rows(readouts);
  return mlp_head(head_, reps);
}

ParameterBreakdown Model::count_parameters() const {
  ParameterBreakdown report;
  for (const auto& p : params_) {
    const std::string group = parameter_group(p.name);
    if (report.components.empty() || report.components.back().first != group) {
      report.components.emplace_back(group, 0);
    }
    report.components.back().second += p.value.size();
    report.total += p.value.size();
  }
  return report;
}

}  // namespace pan
