#include "pan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pan/error.hpp"

namespace pan {

namespace {

void require(bool ok, std::string_view op, std::string_view what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + std::string(what));
}

template <typename Fn>
DenseMatrix map_values(const DenseMatrix& x, Fn fn) {
  DenseMatrix y(x.rows(), x.cols());
  auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  return y;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DenseMatrix column_sums(const DenseMatrix& m) {
  DenseMatrix s(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) s(0, c) += m(r, c);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore

std::size_t ParameterStore::add(std::string name, DenseMatrix init) {
  if (find(name)) throw Error(ErrorCode::InvalidArgument, "duplicate parameter name " + name);
  params_.push_back({std::move(name), std::move(init)});
  return params_.size() - 1;
}

std::optional<std::size_t> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  return std::nullopt;
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::string parameter_group(std::string_view name) {
  const auto dot = name.find('.');
  return std::string(dot == std::string_view::npos ? name : name.substr(0, dot));
}

// ---------------------------------------------------------------------------
// Tensor / GradSink / Tape

const DenseMatrix& Tensor::value() const { return tape_->value(id_); }

double Tensor::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw Error(ErrorCode::ShapeMismatch, "scalar() on a non-1x1 tensor");
  return v.data()[0];
}

bool Tensor::requires_grad() const { return tape_->requires_grad(id_); }

bool GradSink::wants(const Tensor& t) const { return tape_.requires_grad(t.id()); }

void GradSink::add(const Tensor& t, const DenseMatrix& grad) {
  if (!wants(t)) return;
  auto& slot = grads_[t.id()];
  if (slot.empty()) {
    slot = grad;
  } else {
    slot += grad;
  }
}

Tensor Tape::constant(DenseMatrix value) {
  if (!value.all_finite()) throw Error(ErrorCode::NonFiniteValue, "constant");
  nodes_.push_back(Node{"constant", std::move(value), false, std::nullopt, {}});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::parameter(std::size_t index) {
  if (params_ == nullptr || index >= params_->size()) {
    throw Error(ErrorCode::InvalidArgument, "tape has no parameter " + std::to_string(index));
  }
  if (param_leaf_.size() < params_->size()) param_leaf_.resize(params_->size());
  if (auto leaf = param_leaf_[index]) return Tensor(this, *leaf);
  const Parameter& p = (*params_)[index];
  if (!p.value.all_finite()) throw Error(ErrorCode::NonFiniteValue, "parameter " + p.name);
  nodes_.push_back(Node{"parameter", p.value, true, index, {}});
  param_leaf_[index] = nodes_.size() - 1;
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::parameter(std::string_view name) {
  if (params_ == nullptr) throw Error(ErrorCode::InvalidArgument, "tape has no parameter store");
  auto idx = params_->find(name);
  if (!idx) throw Error(ErrorCode::InvalidArgument, "unknown parameter " + std::string(name));
  return parameter(*idx);
}

Tensor Tape::record(std::string_view op, DenseMatrix value, std::span<const Tensor> inputs,
                    BackwardRule backward) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::NonFiniteValue, "op '" + std::string(op) + "' produced NaN or Inf");
  }
  bool needs = false;
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw Error(ErrorCode::InvalidArgument, "inputs recorded on another tape");
    needs = needs || requires_grad(in.id());
  }
  if (needs && !backward) {
    throw Error(ErrorCode::InvalidArgument, "op '" + std::string(op) + "' has no backward rule");
  }
  nodes_.push_back(Node{std::string(op), std::move(value), needs, std::nullopt,
                        needs ? std::move(backward) : BackwardRule{}});
  return Tensor(this, nodes_.size() - 1);
}

void Tape::note_kink_distance(double d) { min_kink_distance_ = std::min(min_kink_distance_, d); }

std::vector<DenseMatrix> Tape::run_backward(const Tensor& loss) const {
  if (&loss.tape() != this) throw Error(ErrorCode::InvalidArgument, "loss recorded on another tape");
  if (loss.value().size() != 1) {
    throw Error(ErrorCode::NotScalarLoss, "loss has shape " + std::to_string(loss.rows()) + "x" +
                                              std::to_string(loss.cols()));
  }
  std::vector<DenseMatrix> grads(nodes_.size());
  if (!requires_grad(loss.id())) return grads;
  grads[loss.id()] = DenseMatrix(1, 1, 1.0);
  GradSink sink(grads, *this);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (grads[id].empty() || !node.backward) continue;
    node.backward(grads[id], sink);
  }
  return grads;
}

Gradients Tape::backward(const Tensor& loss) const {
  auto grads = run_backward(loss);
  Gradients out;
  if (params_ == nullptr) return out;
  out.reserve(params_->size());
  for (const auto& p : *params_) out.emplace_back(p.value.rows(), p.value.cols(), 0.0);
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const auto& idx = nodes_[id].param_index;
    if (idx && !grads[id].empty()) out[*idx] += grads[id];
  }
  return out;
}

std::vector<DenseMatrix> Tape::backward_to(const Tensor& loss, std::span<const Tensor> targets) const {
  auto grads = run_backward(loss);
  std::vector<DenseMatrix> out;
  for (const auto& t : targets) {
    out.push_back(grads[t.id()].empty() ? DenseMatrix(t.rows(), t.cols(), 0.0) : grads[t.id()]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul", "inner dimensions differ");
  const Tensor ins[] = {a, b};
  return a.tape().record("matmul", matmul(a.value(), b.value()), ins,
                         [a, b](const DenseMatrix& up, GradSink& sink) {
                           if (sink.wants(a)) sink.add(a, matmul_nt(up, b.value()));
                           if (sink.wants(b)) sink.add(b, matmul_tn(a.value(), up));
                         });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.value().same_shape(b.value()), "add", "shapes differ");
  DenseMatrix v = a.value();
  v += b.value();
  const Tensor ins[] = {a, b};
  return a.tape().record("add", std::move(v), ins, [a, b](const DenseMatrix& up, GradSink& sink) {
    sink.add(a, up);
    sink.add(b, up);
  });
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& bias) {
  require(bias.rows() == 1 && bias.cols() == x.cols(), "add_row_broadcast", "bias must be 1 x cols");
  DenseMatrix v = x.value();
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) v(r, c) += bias.value()(0, c);
  const Tensor ins[] = {x, bias};
  return x.tape().record("add_row_broadcast", std::move(v), ins,
                         [x, bias](const DenseMatrix& up, GradSink& sink) {
                           sink.add(x, up);
                           if (sink.wants(bias)) sink.add(bias, column_sums(up));
                         });
}

Tensor scale(const Tensor& x, double s) {
  DenseMatrix v = x.value();
  v *= s;
  const Tensor ins[] = {x};
  return x.tape().record("scale", std::move(v), ins, [x, s](const DenseMatrix& up, GradSink& sink) {
    DenseMatrix g = up;
    g *= s;
    sink.add(x, g);
  });
}

Tensor scale(const Tensor& x, const Tensor& s) {
  require(s.value().size() == 1, "scale", "factor must be 1x1");
  DenseMatrix v = x.value();
  v *= s.scalar();
  const Tensor ins[] = {x, s};
  return x.tape().record("scale", std::move(v), ins, [x, s](const DenseMatrix& up, GradSink& sink) {
    if (sink.wants(x)) {
      DenseMatrix g = up;
      g *= s.scalar();
      sink.add(x, g);
    }
    if (sink.wants(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < up.size(); ++i) acc += up.data()[i] * x.value().data()[i];
      sink.add(s, DenseMatrix(1, 1, acc));
    }
  });
}

Tensor relu(const Tensor& x) {
  if (x.requires_grad()) {
    double nearest = std::numeric_limits<double>::infinity();
    for (double v : x.value().data()) nearest = std::min(nearest, std::abs(v));
    x.tape().note_kink_distance(nearest);
  }
  const Tensor ins[] = {x};
  return x.tape().record("relu", map_values(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }), ins,
                         [x](const DenseMatrix& up, GradSink& sink) {
                           DenseMatrix g = up;
                           auto xv = x.value().data();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (!(xv[i] > 0.0)) g.data()[i] = 0.0;
                           sink.add(x, g);
                         });
}

Tensor sigmoid(const Tensor& x) {
  const Tensor ins[] = {x};
  Tape& tape = x.tape();
  const std::size_t out_id = tape.size();
  return tape.record("sigmoid", map_values(x.value(), stable_sigmoid), ins,
                     [x, out_id, &tape](const DenseMatrix& up, GradSink& sink) {
                       const DenseMatrix& y = tape.value(out_id);
                       DenseMatrix g = up;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double s = y.data()[i];
                         g.data()[i] *= s * (1.0 - s);
                       }
                       sink.add(x, g);
                     });
}

Tensor tanh(const Tensor& x) {
  const Tensor ins[] = {x};
  Tape& tape = x.tape();
  const std::size_t out_id = tape.size();
  return tape.record("tanh", map_values(x.value(), [](double v) { return std::tanh(v); }), ins,
                     [x, out_id, &tape](const DenseMatrix& up, GradSink& sink) {
                       const DenseMatrix& y = tape.value(out_id);
                       DenseMatrix g = up;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double t = y.data()[i];
                         g.data()[i] *= 1.0 - t * t;
                       }
                       sink.add(x, g);
                     });
}

Tensor exp(const Tensor& x) {
  const Tensor ins[] = {x};
  Tape& tape = x.tape();
  const std::size_t out_id = tape.size();
  return tape.record("exp", map_values(x.value(), [](double v) { return std::exp(v); }), ins,
                     [x, out_id, &tape](const DenseMatrix& up, GradSink& sink) {
                       const DenseMatrix& y = tape.value(out_id);
                       DenseMatrix g = up;
                       for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= y.data()[i];
                       sink.add(x, g);
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const Tensor ins[] = {x};
  return x.tape().record("sum", DenseMatrix(1, 1, s), ins, [x](const DenseMatrix& up, GradSink& sink) {
    sink.add(x, DenseMatrix(x.rows(), x.cols(), up(0, 0)));
  });
}

Tensor row_gather(const Tensor& x, std::span<const std::size_t> rows) {
  const DenseMatrix& xv = x.value();
  DenseMatrix v(rows.size(), xv.cols());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    require(rows[j] < xv.rows(), "row_gather", "row index out of range");
    std::copy(xv.row(rows[j]).begin(), xv.row(rows[j]).end(), v.row(j).begin());
  }
  const Tensor ins[] = {x};
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return x.tape().record("row_gather", std::move(v), ins,
                         [x, idx = std::move(idx)](const DenseMatrix& up, GradSink& sink) {
                           DenseMatrix g(x.rows(), x.cols());
                           for (std::size_t j = 0; j < idx.size(); ++j)
                             for (std::size_t c = 0; c < g.cols(); ++c) g(idx[j], c) += up(j, c);
                           sink.add(x, g);
                         });
}

Tensor row_scale(const Tensor& x, const Tensor& gate) {
  require(gate.rows() == x.rows() && gate.cols() == 1, "row_scale", "gate must be rows x 1");
  DenseMatrix v = x.value();
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (double& e : v.row(r)) e *= gate.value()(r, 0);
  const Tensor ins[] = {x, gate};
  return x.tape().record("row_scale", std::move(v), ins, [x, gate](const DenseMatrix& up, GradSink& sink) {
    if (sink.wants(x)) {
      DenseMatrix g = up;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (double& e : g.row(r)) e *= gate.value()(r, 0);
      sink.add(x, g);
    }
    if (sink.wants(gate)) {
      DenseMatrix g(gate.rows(), 1);
      for (std::size_t r = 0; r < up.rows(); ++r)
        for (std::size_t c = 0; c < up.cols(); ++c) g(r, 0) += up(r, c) * x.value()(r, c);
      sink.add(gate, g);
    }
  });
}

Tensor embedding_lookup_sum(std::span<const Tensor> tables, const IntMatrix& codes) {
  if (tables.empty()) throw Error(ErrorCode::InvalidArgument, "embedding_lookup_sum needs at least one table");
  require(codes.cols == tables.size(), "embedding_lookup_sum", "one table per code column");
  const std::size_t width = tables.front().cols();
  for (const auto& t : tables) require(t.cols() == width, "embedding_lookup_sum", "table widths differ");
  DenseMatrix v(codes.rows, width);
  for (std::size_t i = 0; i < codes.rows; ++i) {
    for (std::size_t f = 0; f < codes.cols; ++f) {
      const std::int64_t c = codes(i, f);
      if (c < 0 || static_cast<std::size_t>(c) >= tables[f].rows()) {
        throw Error(ErrorCode::CodeOutOfRange, "field " + std::to_string(f) + " value " + std::to_string(c) +
                                                   " (cardinality " + std::to_string(tables[f].rows()) + ")");
      }
      auto src = tables[f].value().row(static_cast<std::size_t>(c));
      auto dst = v.row(i);
      for (std::size_t d = 0; d < width; ++d) dst[d] += src[d];
    }
  }
  std::vector<Tensor> tabs(tables.begin(), tables.end());
  return tables.front().tape().record(
      "embedding_lookup_sum", std::move(v), tables,
      [tabs = std::move(tabs), codes](const DenseMatrix& up, GradSink& sink) {
        for (std::size_t f = 0; f < tabs.size(); ++f) {
          if (!sink.wants(tabs[f])) continue;
          DenseMatrix g(tabs[f].rows(), tabs[f].cols());
          for (std::size_t i = 0; i < codes.rows; ++i) {
            auto dst = g.row(static_cast<std::size_t>(codes(i, f)));
            auto src = up.row(i);
            for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += src[d];
          }
          sink.add(tabs[f], g);
        }
      });
}

Tensor column_mean(const Tensor& x) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyGraph, "column_mean over zero rows");
  DenseMatrix v = column_sums(x.value());
  const double n = static_cast<double>(x.rows());
  v *= 1.0 / n;
  const Tensor ins[] = {x};
  return x.tape().record("column_mean", std::move(v), ins, [x, n](const DenseMatrix& up, GradSink& sink) {
    DenseMatrix g(x.rows(), x.cols());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) = up(0, c) / n;
    sink.add(x, g);
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat_rows of nothing");
  const std::size_t width = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.cols() == width, "concat_rows", "column counts differ");
    total += p.rows();
  }
  DenseMatrix v(total, width);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), v.data().begin() + offset * width);
    offset += p.rows();
  }
  std::vector<Tensor> ins(parts.begin(), parts.end());
  return parts.front().tape().record("concat_rows", std::move(v), parts,
                                     [ins, width](const DenseMatrix& up, GradSink& sink) {
                                       std::size_t off = 0;
                                       for (const auto& p : ins) {
                                         if (sink.wants(p)) {
                                           DenseMatrix g(p.rows(), width);
                                           std::copy_n(up.data().begin() + off * width, g.size(),
                                                       g.data().begin());
                                           sink.add(p, g);
                                         }
                                         off += p.rows();
                                       }
                                     });
}

Tensor diagonal(const Tensor& square) {
  require(square.rows() == square.cols(), "diagonal", "matrix must be square");
  const std::size_t n = square.rows();
  DenseMatrix v(n, 1);
  for (std::size_t i = 0; i < n; ++i) v(i, 0) = square.value()(i, i);
  const Tensor ins[] = {square};
  return square.tape().record("diagonal", std::move(v), ins, [square, n](const DenseMatrix& up, GradSink& sink) {
    DenseMatrix g(n, n);
    for (std::size_t i = 0; i < n; ++i) g(i, i) = up(i, 0);
    sink.add(square, g);
  });
}

Tensor linear_combination(std::span<const DenseMatrix> basis, const Tensor& w) {
  require(!basis.empty(), "linear_combination", "empty basis");
  require(w.rows() == basis.size() && w.cols() == 1, "linear_combination", "weights must be k x 1");
  DenseMatrix v(basis.front().rows(), basis.front().cols());
  for (std::size_t k = 0; k < basis.size(); ++k) {
    require(basis[k].same_shape(v), "linear_combination", "basis shapes differ");
    const double wk = w.value()(k, 0);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] += wk * basis[k].data()[i];
  }
  std::vector<DenseMatrix> kept(basis.begin(), basis.end());
  const Tensor ins[] = {w};
  return w.tape().record("linear_combination", std::move(v), ins,
                         [w, kept = std::move(kept)](const DenseMatrix& up, GradSink& sink) {
                           DenseMatrix g(kept.size(), 1);
                           for (std::size_t k = 0; k < kept.size(); ++k) {
                             double acc = 0.0;
                             for (std::size_t i = 0; i < up.size(); ++i) acc += up.data()[i] * kept[k].data()[i];
                             g(k, 0) = acc;
                           }
                           sink.add(w, g);
                         });
}

namespace {

Tensor batch_norm_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta, const DenseMatrix& mean,
                         const DenseMatrix& inv_std, bool batch_stats) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  DenseMatrix xhat(n, d);
  DenseMatrix y(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (x.value()(r, c) - mean(0, c)) * inv_std(0, c);
      y(r, c) = gamma.value()(0, c) * xhat(r, c) + beta.value()(0, c);
    }
  }
  const Tensor ins[] = {x, gamma, beta};
  return x.tape().record(
      batch_stats ? "batch_norm" : "batch_norm_eval", std::move(y), ins,
      [x, gamma, beta, xhat, inv_std, batch_stats, n, d](const DenseMatrix& up, GradSink& sink) {
        if (sink.wants(gamma) || sink.wants(beta)) {
          DenseMatrix dg(1, d), db(1, d);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) {
              dg(0, c) += up(r, c) * xhat(r, c);
              db(0, c) += up(r, c);
            }
          sink.add(gamma, dg);
          sink.add(beta, db);
        }
        if (!sink.wants(x)) return;
        DenseMatrix dx(n, d);
        if (!batch_stats) {
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) dx(r, c) = up(r, c) * gamma.value()(0, c) * inv_std(0, c);
        } else {
          const double nn = static_cast<double>(n);
          for (std::size_t c = 0; c < d; ++c) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
              const double dxh = up(r, c) * gamma.value()(0, c);
              sum_dxhat += dxh;
              sum_dxhat_xhat += dxh * xhat(r, c);
            }
            for (std::size_t r = 0; r < n; ++r) {
              const double dxh = up(r, c) * gamma.value()(0, c);
              dx(r, c) = inv_std(0, c) / nn * (nn * dxh - sum_dxhat - xhat(r, c) * sum_dxhat_xhat);
            }
          }
        }
        sink.add(x, dx);
      });
}

}  // namespace

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState* state,
                  bool training) {
  const std::size_t d = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == d && beta.rows() == 1 && beta.cols() == d, "batch_norm",
          "gamma and beta must be 1 x cols");
  if (!training) {
    if (state == nullptr) throw Error(ErrorCode::InvalidArgument, "batch_norm eval mode needs running stats");
    return batch_norm(x, gamma, beta, *state);
  }
  if (x.rows() == 0) throw Error(ErrorCode::EmptyGraph, "batch_norm over zero rows");
  const double eps = state ? state->eps : 1e-5;
  const std::size_t n = x.rows();
  DenseMatrix mean(1, d), var(1, d), inv_std(1, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean(0, c) += x.value()(r, c);
  mean *= 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = x.value()(r, c) - mean(0, c);
      var(0, c) += dev * dev;
    }
  var *= 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < d; ++c) inv_std(0, c) = 1.0 / std::sqrt(var(0, c) + eps);

  if (state != nullptr) {
    require(state->running_mean.cols() == d, "batch_norm", "running statistics width differs");
    const double m = state->momentum;
    const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
    for (std::size_t c = 0; c < d; ++c) {
      state->running_mean(0, c) = (1.0 - m) * state->running_mean(0, c) + m * mean(0, c);
      state->running_var(0, c) = (1.0 - m) * state->running_var(0, c) + m * var(0, c) * unbias;
    }
  }
  return batch_norm_affine(x, gamma, beta, mean, inv_std, true);
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const BatchNormState& state) {
  const std::size_t d = x.cols();
  require(state.running_mean.cols() == d && state.running_var.cols() == d, "batch_norm",
          "running statistics width differs");
  require(gamma.rows() == 1 && gamma.cols() == d && beta.rows() == 1 && beta.cols() == d, "batch_norm",
          "gamma and beta must be 1 x cols");
  DenseMatrix inv_std(1, d);
  for (std::size_t c = 0; c < d; ++c) inv_std(0, c) = 1.0 / std::sqrt(state.running_var(0, c) + state.eps);
  return batch_norm_affine(x, gamma, beta, state.running_mean, inv_std, false);
}

// ---------------------------------------------------------------------------
// Finite-difference check

GradCheckReport grad_check(ParameterStore& params, const std::function<Tensor(Tape&)>& f, double h,
                           double tol) {
  constexpr double kDenominatorFloor = 1e-4;
  GradCheckReport report;

  Gradients analytic;
  {
    Tape tape(&params);
    Tensor out = f(tape);
    analytic = tape.backward(out);
    report.min_kink_distance = tape.min_kink_distance();
  }
  report.near_kink = report.min_kink_distance < 10.0 * h;

  auto evaluate = [&]() {
    Tape tape(&params);
    return f(tape).scalar();
  };

  std::map<std::string, std::size_t> group_index;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::string group = parameter_group(params[p].name);
    auto [it, inserted] = group_index.emplace(group, report.groups.size());
    if (inserted) report.groups.push_back({group, 0, 0.0, true});
    GradCheckGroup& entry = report.groups[it->second];

    auto values = params[p].value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = evaluate();
      values[i] = saved - h;
      const double minus = evaluate();
      values[i] = saved;

      const double fd = (plus - minus) / (2.0 * h);
      const double g = analytic[p].data()[i];
      const double denom = std::max({std::abs(g), std::abs(fd), kDenominatorFloor});
      const double rel = std::abs(g - fd) / denom;
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      ++entry.elements;
    }
  }
  for (auto& g : report.groups) {
    g.passed = g.max_rel_error <= tol;
    report.passed = report.passed && g.passed;
    report.worst_rel_error = std::max(report.worst_rel_error, g.max_rel_error);
  }
  return report;
}

}  // namespace pan
