#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "pan/dense_matrix.hpp"
#include "pan/graph.hpp"

namespace pan {

enum class Normalization { RowStochastic, Symmetric };

std::string_view to_string(Normalization n);
/// Accepts "symmetric"/"sym" and "row"/"row_stochastic".
Normalization parse_normalization(std::string_view name);

/// Per-length factors multiplying A^l, l = 0..cutoff.
struct PathWeights {
  std::size_t cutoff = 0;
  std::vector<double> w;
  bool trainable = false;
  double temperature = 1.0;
};

/// w[l] = exp(-l / T), i.e. a Boltzmann factor with energy E(l) = l.
PathWeights boltzmann_weights(std::size_t cutoff, double temperature);

/// Normalized maximal entropy transition operator for one graph.
struct MetMatrix {
  DenseMatrix m;
  std::vector<double> diag;
  Normalization normalization = Normalization::Symmetric;
  /// Per-node partition values: row sums of S = sum_l w[l] A^l.
  std::vector<double> z;
};

MetMatrix met_matrix(const Graph& g, const PathWeights& weights,
                     Normalization normalization = Normalization::Symmetric);

std::vector<double> met_diag(const MetMatrix& met);

/// Row sums of sum_l w[l] * powers[l]. Throws ZeroPartition on a non-positive entry.
std::vector<double> partition_values(std::span<const DenseMatrix> powers, std::span<const double> w);

/// Each power with the normalization applied: Z^{-1} A^l or Z^{-1/2} A^l Z^{-1/2}.
/// Summing these with weights w reproduces the MET matrix for the given z.
std::vector<DenseMatrix> normalized_powers(std::span<const DenseMatrix> powers,
                                           std::span<const double> z, Normalization normalization);

}  // namespace pan
