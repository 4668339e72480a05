#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pan/dense_matrix.hpp"

namespace pan {

struct Parameter {
  std::string name;
  DenseMatrix value;
};

/// Ordered collection of trainable parameters. Index order is the reduction
/// and serialization order.
class ParameterStore {
 public:
  std::size_t add(std::string name, DenseMatrix init);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;
  /// Total number of scalar entries.
  std::size_t element_count() const;

  std::vector<Parameter>::iterator begin() { return params_.begin(); }
  std::vector<Parameter>::iterator end() { return params_.end(); }
  std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

/// One gradient buffer per parameter, in ParameterStore order.
using Gradients = std::vector<DenseMatrix>;

/// "conv1.W" -> "conv1"
std::string parameter_group(std::string_view name);

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Tensor {
 public:
  Tensor() = default;

  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Accumulation target handed to backward rules.
class GradSink {
 public:
  bool wants(const Tensor& t) const;
  void add(const Tensor& t, const DenseMatrix& grad);

 private:
  friend class Tape;
  explicit GradSink(std::vector<DenseMatrix>& grads, const Tape& tape) : grads_(grads), tape_(tape) {}

  std::vector<DenseMatrix>& grads_;
  const Tape& tape_;
};

/// Reverse-mode gradient tape. Recording order is topological; backward walks
/// it once in reverse with fresh zero buffers, so it may be called repeatedly.
class Tape {
 public:
  using BackwardRule = std::function<void(const DenseMatrix& upstream, GradSink& sink)>;

  explicit Tape(const ParameterStore* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(DenseMatrix value);
  /// Leaf bound to params[index]; repeated calls return the same leaf.
  Tensor parameter(std::size_t index);
  Tensor parameter(std::string_view name);

  /// Appends an op. Throws NonFiniteValue naming `op` if the value has NaN/Inf.
  /// `backward` may be empty when no input requires a gradient.
  Tensor record(std::string_view op, DenseMatrix value, std::span<const Tensor> inputs,
                BackwardRule backward);

  /// d(loss)/d(param) for every parameter in the bound store; zero where the
  /// loss does not depend on the parameter. Throws NotScalarLoss.
  Gradients backward(const Tensor& loss) const;

  /// Gradients with respect to arbitrary recorded tensors (used by tests).
  std::vector<DenseMatrix> backward_to(const Tensor& loss, std::span<const Tensor> targets) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const DenseMatrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const ParameterStore* parameters() const noexcept { return params_; }

  /// Distance of some input from a non-differentiable point (ReLU at 0, a
  /// top-K boundary). Finite-difference checks use the minimum as a warning.
  void note_kink_distance(double d);
  double min_kink_distance() const noexcept { return min_kink_distance_; }

 private:
  struct Node {
    std::string op;
    DenseMatrix value;
    bool requires_grad = false;
    std::optional<std::size_t> param_index;
    BackwardRule backward;
  };

  std::vector<DenseMatrix> run_backward(const Tensor& loss) const;

  const ParameterStore* params_;
  std::deque<Node> nodes_;
  std::vector<std::optional<std::size_t>> param_leaf_;
  double min_kink_distance_ = std::numeric_limits<double>::infinity();
};

// Primitive ops. Each checks shapes (ShapeMismatch) and registers its backward rule.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// x [n x d] plus a bias row [1 x d] broadcast over rows.
Tensor add_row_broadcast(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double s);
/// x times a 1x1 tensor.
Tensor scale(const Tensor& x, const Tensor& s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor sum(const Tensor& x);
/// Rows `rows` of x, in the given order; gradient scatters back.
Tensor row_gather(const Tensor& x, std::span<const std::size_t> rows);
/// Row i of x [n x d] multiplied by g [n x 1] entry i.
Tensor row_scale(const Tensor& x, const Tensor& g);
/// Row i = sum_f tables[f][codes(i, f)]. Throws CodeOutOfRange.
Tensor embedding_lookup_sum(std::span<const Tensor> tables, const IntMatrix& codes);
/// [n x d] -> [1 x d]. Throws EmptyGraph when n == 0.
Tensor column_mean(const Tensor& x);
Tensor concat_rows(std::span<const Tensor> parts);
/// Main diagonal of a square matrix as an [n x 1] column.
Tensor diagonal(const Tensor& square);
/// sum_k w[k] * basis[k] with w a [k x 1] tensor and constant basis matrices.
Tensor linear_combination(std::span<const DenseMatrix> basis, const Tensor& w);

struct BatchNormState {
  DenseMatrix running_mean;  // [1 x d]
  DenseMatrix running_var;   // [1 x d]
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t width = 0)
      : running_mean(1, width, 0.0), running_var(1, width, 1.0) {}
};

/// Normalizes each column over the rows of x. In training mode uses batch
/// statistics and, if `state` is non-null, updates its running averages
/// (unbiased variance). In evaluation mode uses the running statistics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState* state,
                  bool training);
/// Same, evaluation mode with explicit state.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const BatchNormState& state);

struct GradCheckGroup {
  std::string group;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double worst_rel_error = 0.0;
  bool passed = true;
  /// Smallest kink distance seen at the base point; below `kink_warning` it is flagged.
  double min_kink_distance = std::numeric_limits<double>::infinity();
  bool near_kink = false;
};

/// Compares tape gradients of the scalar `f` with central differences
/// (f(x+h) - f(x-h)) / 2h for every entry of every parameter. The relative
/// error of an entry is |g - fd| / max(|g|, |fd|, 1e-4); at the default
/// tolerance this is an absolute floor of 1e-8. `f` must be deterministic.
GradCheckReport grad_check(ParameterStore& params, const std::function<Tensor(Tape&)>& f,
                           double h = 1e-5, double tol = 1e-4);

}  // namespace pan
