#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pan/autodiff.hpp"
#include "pan/graph.hpp"
#include "pan/layers.hpp"
#include "pan/met.hpp"

namespace pan {

enum class Variant { PAN, HPAN };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::HPAN;
  std::size_t emb_dim = 64;
  std::vector<std::size_t> conv_cutoffs{3, 2, 2};
  double pool_ratio = 0.8;
  /// Positive-class weight of the loss; defaults to 5 for PAN and 10 for HPAN.
  std::optional<double> alpha;
  Normalization normalization = Normalization::Symmetric;
  bool trainable_path_weights = true;
  double temperature = 1.0;
  double lump_eps = 0.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  double effective_alpha() const { return alpha.value_or(variant == Variant::PAN ? 5.0 : 10.0); }
  /// Throws InvalidArgument on an unusable configuration.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Sets one flat config key from JSON. Returns false for keys it does not own;
/// throws InvalidArgument for bad values.
bool apply_config_key(ModelConfig& config, std::string_view key, const nlohmann::json& value);
nlohmann::json config_to_json(const ModelConfig& config);
/// Rejects unknown keys.
ModelConfig config_from_json(const nlohmann::json& doc);

struct ParameterBreakdown {
  std::vector<std::pair<std::string, std::size_t>> components;
  std::size_t total = 0;
};

/// PAN / HPAN graph classifier:
/// encode -> [PANLump] -> (PANConv -> ReLU -> PANPool) x layers -> mean -> MLP head.
class Model {
 public:
  Model(ModelConfig config, std::vector<std::size_t> node_cardinalities,
        std::vector<std::size_t> edge_cardinalities);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<std::size_t>& node_cardinalities() const noexcept { return node_cardinalities_; }
  const std::vector<std::size_t>& edge_cardinalities() const noexcept { return edge_cardinalities_; }

  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

  /// Non-trainable state (batch-norm running statistics), by name.
  std::vector<std::pair<std::string, DenseMatrix*>> buffers();
  std::vector<std::pair<std::string, const DenseMatrix*>> buffers() const;

  /// Logits [B x 1] in evaluation mode.
  Tensor forward(Tape& tape, std::span<const Graph* const> graphs, const ForwardContext& ctx = {}) const;
  /// Logit [1 x 1] of a single graph in evaluation mode.
  Tensor forward(Tape& tape, const Graph& g, const ForwardContext& ctx = {}) const;
  /// Training mode: batch norm uses statistics over all node rows of the
  /// batch and updates its running averages.
  Tensor forward_train(Tape& tape, std::span<const Graph* const> graphs);

  ParameterBreakdown count_parameters() const;

 private:
  Tensor run(Tape& tape, std::span<const Graph* const> graphs, const ForwardContext& ctx, MlpStack* train_mlp) const;

  ModelConfig config_;
  std::vector<std::size_t> node_cardinalities_;
  std::vector<std::size_t> edge_cardinalities_;
  ParameterStore params_;
  CategoricalEncoder atom_encoder_;
  std::optional<CategoricalEncoder> edge_encoder_;
  std::optional<PanLumpLayer> lump_;
  std::vector<PanConvLayer> convs_;
  std::vector<PanPoolLayer> pools_;
  MlpHead head_;
};

}  // namespace pan
