#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pan/autodiff.hpp"
#include "pan/data_io.hpp"
#include "pan/model.hpp"

namespace pan {

/// Mean over the batch of alpha * y * softplus(-x) + (1 - y) * softplus(x),
/// i.e. the negated weighted log-likelihood with y_hat = sigmoid(x), in a
/// form that never evaluates log(0). `logits` is [N x 1].
Tensor weighted_bce(const Tensor& logits, std::span<const int> labels, double alpha);
double weighted_bce(std::span<const double> logits, std::span<const int> labels, double alpha);

/// P(score_pos > score_neg) + 0.5 P(tie) from average ranks. Throws
/// DegenerateLabels unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const ParameterStore& params, AdamOptions options = {});

  void step(ParameterStore& params, const Gradients& grads);
  std::size_t steps() const noexcept { return steps_; }

 private:
  AdamOptions options_;
  std::vector<DenseMatrix> m_;
  std::vector<DenseMatrix> v_;
  std::size_t steps_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> train_auc;
  std::optional<double> val_auc;
  std::optional<double> test_auc;
  double seconds = 0.0;
};

nlohmann::json to_json(const EpochLog& log);

struct TrainOptions {
  /// Worker threads for evaluation passes.
  std::size_t threads = 1;
  /// Also score the training split every epoch (always done when there is
  /// no usable validation split, since it then drives model selection).
  bool eval_train = false;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  std::size_t optimizer_steps = 0;
  std::optional<double> train_auc;
  std::optional<double> val_auc;
  std::optional<double> test_auc;
};

/// Mini-batch Adam over the shuffled training split; returns the model from
/// the epoch with the best validation ROC-AUC (training ROC-AUC when the
/// validation split is empty or single-class).
TrainResult train(const ModelConfig& config, const Dataset& ds, const TrainOptions& options = {});

/// Evaluation-mode logits for the given graphs, one tape per graph.
std::vector<double> predict_logits(const Model& model, std::span<const Graph> graphs,
                                   std::span<const std::size_t> indices, std::size_t threads = 1);

/// ROC-AUC on a split, or nullopt if the split is empty or single-class.
std::optional<double> split_auc(const Model& model, std::span<const Graph> graphs,
                                std::span<const std::size_t> indices, std::size_t threads = 1);

/// PAN_NUM_THREADS if set, else the hardware concurrency.
std::size_t default_thread_count();

}  // namespace pan
