#include "pan/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pan/error.hpp"

namespace pan {

std::vector<double> PartitionCache::resolve(std::vector<double> computed) {
  if (!frozen_) {
    stored_.push_back(computed);
    return computed;
  }
  if (cursor_ >= stored_.size() || stored_[cursor_].size() != computed.size()) {
    throw Error(ErrorCode::InvalidArgument, "frozen partition replay diverged from the recorded pass");
  }
  return stored_[cursor_++];
}

DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = dist(rng);
  return m;
}

// ---------------------------------------------------------------------------

Linear Linear::create(ParameterStore& params, const std::string& prefix, std::size_t in, std::size_t out,
                      std::mt19937_64& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = params.add(prefix + ".W", glorot_uniform(in, out, rng));
  l.bias = params.add(prefix + ".b", DenseMatrix(1, out, 0.0));
  return l;
}

Tensor Linear::forward(const Tensor& x) const {
  Tape& tape = x.tape();
  return add_row_broadcast(matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

BatchNormLayer BatchNormLayer::create(ParameterStore& params, const std::string& prefix, std::size_t width) {
  BatchNormLayer bn;
  bn.gamma = params.add(prefix + ".gamma", DenseMatrix(1, width, 1.0));
  bn.beta = params.add(prefix + ".beta", DenseMatrix(1, width, 0.0));
  bn.state = BatchNormState(width);
  return bn;
}

Tensor BatchNormLayer::forward_train(const Tensor& x) {
  Tape& tape = x.tape();
  return batch_norm(x, tape.parameter(gamma), tape.parameter(beta), &state, true);
}

Tensor BatchNormLayer::forward_eval(const Tensor& x) const {
  Tape& tape = x.tape();
  return batch_norm(x, tape.parameter(gamma), tape.parameter(beta), state);
}

MlpStack MlpStack::create(ParameterStore& params, const std::string& prefix, std::size_t width,
                          std::mt19937_64& rng) {
  MlpStack mlp;
  mlp.first = Linear::create(params, prefix + ".lin1", width, 2 * width, rng);
  mlp.norm = BatchNormLayer::create(params, prefix + ".bn", 2 * width);
  mlp.second = Linear::create(params, prefix + ".lin2", 2 * width, width, rng);
  return mlp;
}

Tensor MlpStack::forward_train(const Tensor& x) {
  return second.forward(relu(norm.forward_train(first.forward(x))));
}

Tensor MlpStack::forward_eval(const Tensor& x) const {
  return second.forward(relu(norm.forward_eval(first.forward(x))));
}

// ---------------------------------------------------------------------------

CategoricalEncoder CategoricalEncoder::create(ParameterStore& params, const std::string& prefix,
                                              std::span<const std::size_t> cardinalities, std::size_t dim,
                                              std::mt19937_64& rng) {
  CategoricalEncoder enc;
  enc.dim = dim;
  enc.cardinalities.assign(cardinalities.begin(), cardinalities.end());
  for (std::size_t f = 0; f < cardinalities.size(); ++f) {
    if (cardinalities[f] == 0) throw Error(ErrorCode::InvalidArgument, "zero cardinality for field " + std::to_string(f));
    enc.tables.push_back(
        params.add(prefix + ".table" + std::to_string(f), glorot_uniform(cardinalities[f], dim, rng)));
  }
  return enc;
}

Tensor encode(const CategoricalEncoder& enc, Tape& tape, const IntMatrix& codes) {
  if (codes.cols != enc.tables.size()) {
    throw Error(ErrorCode::ShapeMismatch, "encoder has " + std::to_string(enc.tables.size()) +
                                              " fields, codes have " + std::to_string(codes.cols));
  }
  if (enc.tables.empty()) return tape.constant(DenseMatrix(codes.rows, enc.dim));
  std::vector<Tensor> tables;
  tables.reserve(enc.tables.size());
  for (std::size_t t : enc.tables) tables.push_back(tape.parameter(t));
  return embedding_lookup_sum(tables, codes);
}

// ---------------------------------------------------------------------------

PanConvLayer PanConvLayer::create(ParameterStore& params, const std::string& prefix, std::size_t cutoff,
                                  std::size_t d_in, std::size_t d_out, bool trainable_weights, double temperature,
                                  Normalization normalization, std::mt19937_64& rng) {
  PanConvLayer layer;
  layer.cutoff = cutoff;
  layer.normalization = normalization;
  layer.fixed_weights = boltzmann_weights(cutoff, temperature);
  if (trainable_weights) {
    layer.fixed_weights.trainable = true;
    DenseMatrix theta(cutoff + 1, 1);
    for (std::size_t l = 0; l <= cutoff; ++l) theta(l, 0) = -static_cast<double>(l) / temperature;
    layer.theta = params.add(prefix + ".theta", std::move(theta));
  }
  layer.weight = params.add(prefix + ".W", glorot_uniform(d_in, d_out, rng));
  return layer;
}

ConvOutput pan_conv(const PanConvLayer& layer, const Graph& g, const Tensor& x, const ForwardContext& ctx) {
  if (x.rows() != g.num_nodes()) {
    throw Error(ErrorCode::ShapeMismatch, "pan_conv: X has " + std::to_string(x.rows()) + " rows for " +
                                              std::to_string(g.num_nodes()) + " nodes");
  }
  if (g.num_nodes() == 0) throw Error(ErrorCode::EmptyGraph, "pan_conv on an empty graph");
  Tape& tape = x.tape();

  Tensor weights;
  if (layer.theta) {
    const Tensor theta = tape.parameter(*layer.theta);
    if (theta.rows() != layer.cutoff + 1) throw Error(ErrorCode::ShapeMismatch, "theta length differs from cutoff + 1");
    weights = exp(theta);
  } else {
    if (layer.fixed_weights.w.size() != layer.cutoff + 1) {
      throw Error(ErrorCode::ShapeMismatch, "path weights length differs from cutoff + 1");
    }
    weights = tape.constant(DenseMatrix::column(layer.fixed_weights.w));
  }

  const auto powers = walk_count_powers(g, layer.cutoff);
  auto z = partition_values(powers, weights.value().data());
  if (ctx.partitions != nullptr) z = ctx.partitions->resolve(std::move(z));
  const auto basis = normalized_powers(powers, z, layer.normalization);

  Tensor met;
  if (weights.requires_grad()) {
    met = linear_combination(basis, weights);
  } else {
    DenseMatrix m(g.num_nodes(), g.num_nodes());
    for (std::size_t l = 0; l < basis.size(); ++l) {
      DenseMatrix term = basis[l];
      term *= weights.value()(l, 0);
      m += term;
    }
    met = tape.constant(std::move(m));
  }

  const Tensor w = tape.parameter(layer.weight);
  if (w.rows() != x.cols()) throw Error(ErrorCode::ShapeMismatch, "pan_conv: W rows differ from X width");
  return {matmul(met, matmul(x, w)), diagonal(met)};
}

// ---------------------------------------------------------------------------

PanPoolLayer PanPoolLayer::create(ParameterStore& params, const std::string& prefix, std::size_t width, double ratio,
                                  std::mt19937_64& rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCode::InvalidArgument, "pool ratio must be in (0, 1]");
  PanPoolLayer layer;
  layer.ratio = ratio;
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix p(width, 1);
  for (double& v : p.data()) v = dist(rng);
  layer.p = params.add(prefix + ".p", std::move(p));
  layer.beta = params.add(prefix + ".beta", DenseMatrix(1, 1, 1.0));
  return layer;
}

Tensor pan_pool_score(const PanPoolLayer& layer, const Tensor& x, const Tensor& met_diag) {
  Tape& tape = x.tape();
  const Tensor p = tape.parameter(layer.p);
  if (p.rows() != x.cols()) throw Error(ErrorCode::ShapeMismatch, "pan_pool_score: p length differs from X width");
  if (met_diag.rows() != x.rows() || met_diag.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "pan_pool_score: diag(M) must be n x 1");
  }
  return add(matmul(x, p), scale(met_diag, tape.parameter(layer.beta)));
}

std::size_t pool_size(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCode::InvalidArgument, "pool ratio must be in (0, 1]");
  // The small slack keeps e.g. 0.7 * 10 from rounding up to 8.
  const double k = std::ceil(ratio * static_cast<double>(n) - 1e-9);
  return std::max<std::size_t>(1, std::min(n, static_cast<std::size_t>(k)));
}

PoolOutput pan_pool_select(const Graph& g, const Tensor& x, const Tensor& score, double ratio) {
  const std::size_t n = g.num_nodes();
  if (n == 0) throw Error(ErrorCode::EmptyGraph, "pan_pool_select on an empty graph");
  if (x.rows() != n || score.rows() != n || score.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "pan_pool_select: X and score need one row per node");
  }
  const std::size_t k = pool_size(n, ratio);
  const auto& s = score.value();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s(a, 0) > s(b, 0); });
  if (k < n && score.requires_grad()) x.tape().note_kink_distance(s(order[k - 1], 0) - s(order[k], 0));

  std::vector<std::size_t> kept(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(kept.begin(), kept.end());

  Tensor gate = sigmoid(row_gather(score, kept));
  Tensor pooled = row_scale(row_gather(x, kept), gate);
  return {induced_subgraph(g, kept), pooled, std::move(kept)};
}

// ---------------------------------------------------------------------------

PanLumpLayer PanLumpLayer::create(ParameterStore& params, const std::string& prefix, std::size_t width, double eps,
                                  std::mt19937_64& rng) {
  PanLumpLayer layer;
  layer.eps = eps;
  layer.mlp = MlpStack::create(params, prefix + ".mlp", width, rng);
  return layer;
}

Tensor lump_aggregate(const PanLumpLayer& layer, const Graph& g, const Tensor& x_node, const Tensor& x_edge) {
  if (x_node.rows() != g.num_nodes() || x_edge.rows() != g.num_edges()) {
    throw Error(ErrorCode::ShapeMismatch, "pan_lump: feature rows differ from graph size");
  }
  if (x_node.cols() != x_edge.cols()) throw Error(ErrorCode::ShapeMismatch, "pan_lump: node and edge widths differ");
  Tensor self = scale(x_node, 1.0 + layer.eps);
  if (g.num_edges() == 0) return self;
  DenseMatrix incidence(g.num_nodes(), g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto [u, v] = g.edges()[e];
    incidence(u, e) = 1.0;
    incidence(v, e) = 1.0;
  }
  return add(self, matmul(x_node.tape().constant(std::move(incidence)), x_edge));
}

Tensor pan_lump(const PanLumpLayer& layer, const Graph& g, const Tensor& x_node, const Tensor& x_edge) {
  return layer.mlp.forward_eval(lump_aggregate(layer, g, x_node, x_edge));
}

Tensor mean_readout(const Tensor& x) { return column_mean(x); }

MlpHead MlpHead::create(ParameterStore& params, const std::string& prefix, std::size_t width, std::mt19937_64& rng) {
  MlpHead head;
  head.first = Linear::create(params, prefix + ".lin1", width, width / 2, rng);
  head.second = Linear::create(params, prefix + ".lin2", width / 2, 1, rng);
  return head;
}

Tensor mlp_head(const MlpHead& head, const Tensor& x) {
  if (x.cols() != head.first.in) {
    throw Error(ErrorCode::ShapeMismatch, "mlp_head: input width " + std::to_string(x.cols()) + ", expected " +
                                              std::to_string(head.first.in));
  }
  return head.second.forward(relu(head.first.forward(x)));
}

}  // namespace pan
