#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pan/autodiff.hpp"
#include "pan/graph.hpp"
#include "pan/met.hpp"

namespace pan {

/// Freezes the MET partition values Z across repeated forward passes. The
/// first pass records every Z it computes; later passes replay them in the
/// same order. Finite-difference checks use this so that the numeric
/// derivative sees the same frozen normalization as the tape.
class PartitionCache {
 public:
  void begin_pass() noexcept { cursor_ = 0; }
  std::vector<double> resolve(std::vector<double> computed);
  bool recording() const noexcept { return !frozen_; }
  void freeze() noexcept { frozen_ = true; }

 private:
  std::vector<std::vector<double>> stored_;
  std::size_t cursor_ = 0;
  bool frozen_ = false;
};

struct ForwardContext {
  bool training = false;
  PartitionCache* partitions = nullptr;
};

/// Glorot-uniform initialized matrix.
DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

/// y = x W + b.
struct Linear {
  std::size_t weight = 0;  // [in x out]
  std::size_t bias = 0;    // [1 x out]
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParameterStore& params, const std::string& prefix, std::size_t in, std::size_t out,
                       std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
};

struct BatchNormLayer {
  std::size_t gamma = 0;
  std::size_t beta = 0;
  BatchNormState state;

  static BatchNormLayer create(ParameterStore& params, const std::string& prefix, std::size_t width);
  /// Training mode normalizes with batch statistics and updates `state`.
  Tensor forward_train(const Tensor& x);
  Tensor forward_eval(const Tensor& x) const;
};

/// Linear(D, 2D) -> BatchNorm -> ReLU -> Linear(2D, D).
struct MlpStack {
  Linear first;
  BatchNormLayer norm;
  Linear second;

  static MlpStack create(ParameterStore& params, const std::string& prefix, std::size_t width,
                         std::mt19937_64& rng);
  Tensor forward_train(const Tensor& x);
  Tensor forward_eval(const Tensor& x) const;
};

/// Sum of per-field embedding rows; one table per categorical field.
struct CategoricalEncoder {
  std::vector<std::size_t> cardinalities;
  std::vector<std::size_t> tables;  // parameter indices, [cardinality_f x dim]
  std::size_t dim = 0;

  static CategoricalEncoder create(ParameterStore& params, const std::string& prefix,
                                   std::span<const std::size_t> cardinalities, std::size_t dim,
                                   std::mt19937_64& rng);
};

Tensor encode(const CategoricalEncoder& enc, Tape& tape, const IntMatrix& codes);

struct PanConvLayer {
  std::size_t cutoff = 1;
  /// Used when `theta` is absent.
  PathWeights fixed_weights;
  /// Unconstrained log-weights [(cutoff+1) x 1], w[l] = exp(theta[l]).
  std::optional<std::size_t> theta;
  std::size_t weight = 0;  // [d_in x d_out]
  Normalization normalization = Normalization::Symmetric;

  static PanConvLayer create(ParameterStore& params, const std::string& prefix, std::size_t cutoff,
                             std::size_t d_in, std::size_t d_out, bool trainable_weights, double temperature,
                             Normalization normalization, std::mt19937_64& rng);
};

struct ConvOutput {
  Tensor out;       // M X W, [n x d_out]
  Tensor met_diag;  // diag(M), [n x 1]
};

/// M X W with M the MET operator of `g`. With trainable path weights the
/// gradient reaches theta through M; the partition values Z are treated as
/// constants of the pass.
ConvOutput pan_conv(const PanConvLayer& layer, const Graph& g, const Tensor& x, const ForwardContext& ctx = {});

struct PanPoolLayer {
  std::size_t p = 0;     // [d x 1]
  std::size_t beta = 0;  // [1 x 1]
  double ratio = 0.8;

  static PanPoolLayer create(ParameterStore& params, const std::string& prefix, std::size_t width, double ratio,
                             std::mt19937_64& rng);
};

/// score = X p + beta * diag(M), [n x 1].
Tensor pan_pool_score(const PanPoolLayer& layer, const Tensor& x, const Tensor& met_diag);

struct PoolOutput {
  Graph graph;
  Tensor x;
  std::vector<std::size_t> kept;
};

/// max(1, ceil(ratio * n)).
std::size_t pool_size(std::size_t n, double ratio);

/// Keeps the top-K nodes by score (ties to the lower index), in ascending
/// node order. Kept rows are gated by sigmoid(score) so that the score
/// parameters receive a gradient.
PoolOutput pan_pool_select(const Graph& g, const Tensor& x, const Tensor& score, double ratio);

struct PanLumpLayer {
  double eps = 0.0;
  MlpStack mlp;

  static PanLumpLayer create(ParameterStore& params, const std::string& prefix, std::size_t width, double eps,
                             std::mt19937_64& rng);
};

/// (1 + eps) X(u) + sum of the embeddings of edges incident to u; the part
/// of PANLump before its MLP. Self-loops contribute once.
Tensor lump_aggregate(const PanLumpLayer& layer, const Graph& g, const Tensor& x_node, const Tensor& x_edge);

/// Full PANLump on one graph in evaluation mode (frozen batch norm).
Tensor pan_lump(const PanLumpLayer& layer, const Graph& g, const Tensor& x_node, const Tensor& x_edge);

Tensor mean_readout(const Tensor& x);

/// {d, d/2, 1} with ReLU in between.
struct MlpHead {
  Linear first;
  Linear second;

  static MlpHead create(ParameterStore& params, const std::string& prefix, std::size_t width,
                        std::mt19937_64& rng);
};

/// x is a [1 x d] graph representation; returns a [1 x 1] logit.
Tensor mlp_head(const MlpHead& head, const Tensor& x);

}  // namespace pan
