#include "pan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "pan/error.hpp"

namespace pan {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_bce_inputs(std::size_t n, std::span<const int> labels, double alpha) {
  if (n != labels.size()) throw Error(ErrorCode::ShapeMismatch, "one label per logit required");
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "weighted_bce on an empty batch");
  if (!(alpha >= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw Error(ErrorCode::BadLabel, "label " + std::to_string(labels[i]) + " at position " + std::to_string(i));
    }
  }
}

bool split_auc_possible(const Dataset& ds, std::span<const std::size_t> indices) {
  bool pos = false, neg = false;
  for (std::size_t idx : indices) {
    const auto y = ds.graphs[idx].label();
    if (y) (*y == 1 ? pos : neg) = true;
  }
  return pos && neg;
}

}  // namespace

double weighted_bce(std::span<const double> logits, std::span<const int> labels, double alpha) {
  check_bce_inputs(logits.size(), labels, alpha);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += labels[i] == 1 ? alpha * softplus(-logits[i]) : softplus(logits[i]);
  }
  return total / static_cast<double>(logits.size());
}

Tensor weighted_bce(const Tensor& logits, std::span<const int> labels, double alpha) {
  if (logits.cols() != 1) throw Error(ErrorCode::ShapeMismatch, "logits must be N x 1");
  const double loss = weighted_bce(logits.value().data(), labels, alpha);
  std::vector<int> y(labels.begin(), labels.end());
  const Tensor ins[] = {logits};
  return logits.tape().record("weighted_bce", DenseMatrix(1, 1, loss), ins,
                              [logits, y = std::move(y), alpha](const DenseMatrix& up, GradSink& sink) {
                                const double n = static_cast<double>(y.size());
                                DenseMatrix g(y.size(), 1);
                                for (std::size_t i = 0; i < y.size(); ++i) {
                                  const double s = stable_sigmoid(logits.value()(i, 0));
                                  g(i, 0) = up(0, 0) / n * (y[i] == 1 ? alpha * (s - 1.0) : s);
                                }
                                sink.add(logits, g);
                              });
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "one label per score required");
  std::uint64_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::BadLabel, "label " + std::to_string(y));
    positives += static_cast<std::uint64_t>(y);
  }
  const std::uint64_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::DegenerateLabels, "ROC-AUC needs both classes present");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum of the positives, kept integral: a tie group spanning
  // 1-based ranks [lo, hi] contributes (lo + hi) per member.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::uint64_t twice_avg = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) twice_rank_sum += twice_avg;
    i = j + 1;
  }
  const std::uint64_t twice_u = twice_rank_sum - positives * (positives + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

// ---------------------------------------------------------------------------

Adam::Adam(const ParameterStore& params, AdamOptions options) : options_(options) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.rows(), p.value.cols(), 0.0);
    v_.emplace_back(p.value.rows(), p.value.cols(), 0.0);
  }
}

void Adam::step(ParameterStore& params, const Gradients& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "Adam: gradient count differs from parameter count");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto value = params[p].value.data();
    auto g = grads[p].data();
    if (g.size() != value.size()) throw Error(ErrorCode::ShapeMismatch, "Adam: gradient shape differs for " + params[p].name);
    auto m = m_[p].data();
    auto v = v_[p].data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const EpochLog& log) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["epoch"] = log.epoch;
  j["mean_loss"] = log.mean_loss;
  j["train_auc"] = opt(log.train_auc);
  j["val_auc"] = opt(log.val_auc);
  j["test_auc"] = opt(log.test_auc);
  j["seconds"] = log.seconds;
  return j;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("PAN_NUM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> predict_logits(const Model& model, std::span<const Graph> graphs,
                                   std::span<const std::size_t> indices, std::size_t threads) {
  std::vector<double> out(indices.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < indices.size(); i += stride) {
      Tape tape(&model.parameters());
      out[i] = model.forward(tape, graphs[indices[i]]).scalar();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, indices.size()));
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::optional<double> split_auc(const Model& model, std::span<const Graph> graphs,
                                std::span<const std::size_t> indices, std::size_t threads) {
  if (indices.empty()) return std::nullopt;
  std::vector<int> labels;
  labels.reserve(indices.size());
  bool pos = false, neg = false;
  for (std::size_t idx : indices) {
    const auto y = graphs[idx].label();
    if (!y) throw Error(ErrorCode::BadLabel, "graph " + std::to_string(idx) + " has no label");
    labels.push_back(*y);
    (*y == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) return std::nullopt;
  return roc_auc(predict_logits(model, graphs, indices, threads), labels);
}

TrainResult train(const ModelConfig& config, const Dataset& ds, const TrainOptions& options) {
  config.validate();
  if (ds.splits.train.empty()) throw Error(ErrorCode::InvalidArgument, "training split is empty");

  Model model(config, ds.node_cardinalities, ds.edge_cardinalities);
  Adam adam(model.parameters(), AdamOptions{.learning_rate = config.learning_rate});
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const double alpha = config.effective_alpha();
  const std::span<const Graph> graphs(ds.graphs);

  const bool have_valid = split_auc_possible(ds, ds.splits.valid);
  std::optional<Model> best;
  std::optional<double> best_metric;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;

  std::vector<std::size_t> order = ds.splits.train;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double total_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<const Graph*> batch;
      std::vector<int> labels;
      for (std::size_t k = begin; k < end; ++k) {
        const Graph& g = ds.graphs[order[k]];
        if (!g.label()) throw Error(ErrorCode::BadLabel, "training graph " + std::to_string(order[k]) + " has no label");
        batch.push_back(&g);
        labels.push_back(*g.label());
      }
      Tape tape(&model.parameters());
      const Tensor logits = model.forward_train(tape, batch);
      const Tensor loss = weighted_bce(logits, labels, alpha);
      const Gradients grads = tape.backward(loss);
      adam.step(model.parameters(), grads);
      total_loss += loss.scalar() * static_cast<double>(batch.size());
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = total_loss / static_cast<double>(order.size());
    if (options.eval_train || !have_valid) entry.train_auc = split_auc(model, graphs, ds.splits.train, options.threads);
    entry.val_auc = split_auc(model, graphs, ds.splits.valid, options.threads);
    entry.test_auc = split_auc(model, graphs, ds.splits.test, options.threads);
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::optional<double> metric = have_valid ? entry.val_auc : entry.train_auc;
    if (!best || (metric && (!best_metric || *metric > *best_metric))) {
      best = model;
      best_metric = metric;
      best_epoch = epoch;
    }
    log.push_back(entry);
    if (options.on_epoch) options.on_epoch(entry);
  }

  Model chosen = best ? std::move(*best) : std::move(model);
  const auto train_auc = split_auc(chosen, graphs, ds.splits.train, options.threads);
  const auto val_auc = split_auc(chosen, graphs, ds.splits.valid, options.threads);
  const auto test_auc = split_auc(chosen, graphs, ds.splits.test, options.threads);
  return TrainResult{std::move(chosen), std::move(log), best_epoch, adam.steps(), train_auc, val_auc, test_auc};
}

}  // namespace pan
