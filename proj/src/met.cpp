#include "pan/met.hpp"

#include <cmath>
#include <string>

#include "pan/error.hpp"

namespace pan {

std::string_view to_string(Normalization n) {
  return n == Normalization::Symmetric ? "symmetric" : "row";
}

Normalization parse_normalization(std::string_view name) {
  if (name == "symmetric" || name == "sym") return Normalization::Symmetric;
  if (name == "row" || name == "row_stochastic") return Normalization::RowStochastic;
  throw Error(ErrorCode::InvalidArgument, "unknown normalization '" + std::string(name) + "'");
}

PathWeights boltzmann_weights(std::size_t cutoff, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::NonPositiveTemperature, "temperature must be > 0, got " + std::to_string(temperature));
  }
  PathWeights pw;
  pw.cutoff = cutoff;
  pw.temperature = temperature;
  pw.trainable = false;
  pw.w.resize(cutoff + 1);
  for (std::size_t l = 0; l <= cutoff; ++l) pw.w[l] = std::exp(-static_cast<double>(l) / temperature);
  return pw;
}

std::vector<double> partition_values(std::span<const DenseMatrix> powers, std::span<const double> w) {
  if (powers.empty() || powers.size() != w.size()) {
    throw Error(ErrorCode::ShapeMismatch, "need one weight per adjacency power");
  }
  const std::size_t n = powers.front().rows();
  std::vector<double> z(n, 0.0);
  for (std::size_t l = 0; l < powers.size(); ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (double x : powers[l].row(i)) row_sum += x;
      z[i] += w[l] * row_sum;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(z[i] > 0.0)) throw Error(ErrorCode::ZeroPartition, "Z_" + std::to_string(i) + " is not positive");
  }
  return z;
}

std::vector<DenseMatrix> normalized_powers(std::span<const DenseMatrix> powers,
                                           std::span<const double> z, Normalization normalization) {
  std::vector<DenseMatrix> out;
  out.reserve(powers.size());
  const std::size_t n = z.size();
  std::vector<double> left(n), right(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (normalization == Normalization::Symmetric) {
      left[i] = right[i] = 1.0 / std::sqrt(z[i]);
    } else {
      left[i] = 1.0 / z[i];
    }
  }
  for (const DenseMatrix& p : powers) {
    if (p.rows() != n || p.cols() != n) throw Error(ErrorCode::ShapeMismatch, "power size differs from z");
    DenseMatrix q(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) q(i, j) = left[i] * p(i, j) * right[j];
    out.push_back(std::move(q));
  }
  return out;
}

MetMatrix met_matrix(const Graph& g, const PathWeights& weights, Normalization normalization) {
  if (g.num_nodes() == 0) throw Error(ErrorCode::EmptyGraph, "met_matrix on an empty graph");
  if (weights.w.size() != weights.cutoff + 1) {
    throw Error(ErrorCode::ShapeMismatch, "path weights need cutoff + 1 entries");
  }
  for (double w : weights.w) {
    if (!(w > 0.0)) throw Error(ErrorCode::InvalidArgument, "path weights must be positive");
  }
  const auto powers = walk_count_powers(g, weights.cutoff);
  MetMatrix met;
  met.normalization = normalization;
  met.z = partition_values(powers, weights.w);
  const auto terms = normalized_powers(powers, met.z, normalization);
  const std::size_t n = g.num_nodes();
  met.m = DenseMatrix(n, n);
  for (std::size_t l = 0; l < terms.size(); ++l) {
    DenseMatrix scaled = terms[l];
    scaled *= weights.w[l];
    met.m += scaled;
  }
  met.diag.resize(n);
  for (std::size_t i = 0; i < n; ++i) met.diag[i] = met.m(i, i);
  return met;
}

std::vector<double> met_diag(const MetMatrix& met) { return met.diag; }

}  // namespace pan
