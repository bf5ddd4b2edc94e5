#include "edgegfl/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <unordered_set>
#include <utility>

#include <fmt/format.h>

#include "edgegfl/errors.hpp"

namespace edgegfl::ad {
namespace {

std::atomic<std::uint64_t> next_tensor_id{1};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(fmt::format("{}: shapes {} and {} differ", op, a.shape_str(), b.shape_str()));
  }
}

bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
}

void require_index_range(std::span<const std::size_t> index, std::size_t limit, const char* op) {
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= limit) {
      throw DimensionError(fmt::format("{}: index {} at position {} out of range {}", op, index[i], i, limit));
    }
  }
}

}  // namespace

// ---- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return filled(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, value), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols) {
    throw DimensionError(fmt::format("tensor of shape [{}x{}] needs {} values, got {}", rows, cols,
                                     rows * cols, values.size()));
  }
  Tensor t;
  t.impl_ = std::make_shared<Storage>();
  t.impl_->rows = rows;
  t.impl_->cols = cols;
  t.impl_->grad.assign(values.size(), 0.0);
  t.impl_->values = std::move(values);
  t.impl_->requires_grad = requires_grad;
  t.impl_->id = next_tensor_id.fetch_add(1, std::memory_order_relaxed);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from(1, 1, {value}, requires_grad); }

std::string Tensor::shape_str() const {
  if (!defined()) return "[undefined]";
  return fmt::format("[{}x{}]", rows(), cols());
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_str());
  return impl_->values[0];
}

void Tensor::zero_grad() const { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0); }

Tensor Tensor::clone() const {
  if (!defined()) return {};
  return from(rows(), cols(), impl_->values, impl_->requires_grad);
}

// ---- Tape --------------------------------------------------------------------

Tensor Tape::record(Tensor output, std::vector<Tensor> inputs, BackwardFn backward) {
  bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  output.set_requires_grad(needs);
  entries_.push_back(Entry{std::move(inputs), output, std::move(backward)});
  return output;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar()) {
    throw ContractError("backward: loss must be a scalar, got " + loss.shape_str());
  }
  auto on_tape = std::any_of(entries_.begin(), entries_.end(),
                             [&](const Entry& e) { return e.output.id() == loss.id(); });
  if (!on_tape) throw ContractError("backward: loss was not produced on this tape");

  for (auto& e : entries_) e.output.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output.requires_grad()) it->backward();
  }
}

// ---- primitives --------------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError(fmt::format("matmul: inner dimensions of {} and {} disagree", a.shape_str(), b.shape_str()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros(m, n);
  {
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = av[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = &bv[p * n];
        double* orow = &ov[i * n];
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  }
  return tape.record(out, {a, b}, [a, b, out, m, k, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ag = a.grad();
      auto bv = b.values();
      // dA = dC · Bᵀ
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ag[i * k + p] += acc;
        }
      }
    }
    if (b.requires_grad()) {
      auto bg = b.grad();
      auto av = a.values();
      // dB = Aᵀ · dC
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) bg[p * n + j] += aip * g[i * n + j];
        }
      }
    }
  });
}

namespace {

// Shared body of add/sub: out = a + sign·b, with b optionally a broadcast row.
Tensor add_signed(Tape& tape, const Tensor& a, const Tensor& b, double sign, const char* op) {
  const bool bcast = is_row_broadcast(a, b);
  if (!bcast) require_same_shape(a, b, op);
  const std::size_t cols = a.cols();
  Tensor out = Tensor::zeros(a.rows(), cols);
  {
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + sign * bv[bcast ? i % cols : i];
  }
  return tape.record(out, {a, b}, [a, b, out, sign, bcast, cols]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ag = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
    }
    if (b.requires_grad()) {
      auto bg = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) bg[bcast ? i % cols : i] += sign * g[i];
    }
  });
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return add_signed(tape, a, b, 1.0, "add"); }
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) { return add_signed(tape, a, b, -1.0, "sub"); }

Tensor hadamard(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool bcast = is_row_broadcast(a, b);
  if (!bcast) require_same_shape(a, b, "hadamard");
  const std::size_t cols = a.cols();
  Tensor out = Tensor::zeros(a.rows(), cols);
  {
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[bcast ? i % cols : i];
  }
  return tape.record(out, {a, b}, [a, b, out, bcast, cols]() mutable {
    auto g = out.grad();
    auto av = a.values();
    auto bv = b.values();
    if (a.requires_grad()) {
      auto ag = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * bv[bcast ? i % cols : i];
    }
    if (b.requires_grad()) {
      auto bg = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) bg[bcast ? i % cols : i] += g[i] * av[i];
    }
  });
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = factor * av[i];
  }
  return tape.record(out, {a}, [a, out, factor]() mutable {
    auto g = out.grad();
    auto ag = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ag[i] += factor * g[i];
  });
}

Tensor add_scalar(Tape& tape, const Tensor& a, double offset) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + offset;
  }
  return tape.record(out, {a}, [a, out]() mutable {
    auto g = out.grad();
    auto ag = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
  });
}

Tensor leaky_relu(Tape& tape, const Tensor& a, double slope) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] >= 0.0 ? av[i] : slope * av[i];
  }
  return tape.record(out, {a}, [a, out, slope]() mutable {
    auto g = out.grad();
    auto av = a.values();
    auto ag = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ag[i] += av[i] >= 0.0 ? g[i] : slope * g[i];
  });
}

Tensor elu(Tape& tape, const Tensor& a, double alpha) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > 0.0 ? av[i] : alpha * std::expm1(av[i]);
  }
  return tape.record(out, {a}, [a, out, alpha]() mutable {
    auto g = out.grad();
    auto av = a.values();
    auto ov = out.values();
    auto ag = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ag[i] += av[i] > 0.0 ? g[i] : g[i] * (ov[i] + alpha);
  });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) {
      const double x = av[i];
      // split by sign so exp never overflows
      ov[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
  }
  return tape.record(out, {a}, [a, out]() mutable {
    auto g = out.grad();
    auto ov = out.values();
    auto ag = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * ov[i] * (1.0 - ov[i]);
  });
}

Tensor softmax_rows(Tape& tape, const Tensor& a) {
  const std::size_t n = a.rows(), c = a.cols();
  Tensor out = Tensor::zeros(n, c);
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &av[i * c];
      double* orow = &ov[i * c];
      const double mx = *std::max_element(row, row + c);
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j) total += (orow[j] = std::exp(row[j] - mx));
      for (std::size_t j = 0; j < c; ++j) orow[j] /= total;
    }
  }
  return tape.record(out, {a}, [a, out, n, c]() mutable {
    auto g = out.grad();
    auto ov = out.values();
    auto ag = a.grad();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * ov[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ag[i * c + j] += ov[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Tensor l2_normalize_rows(Tape& tape, const Tensor& a) {
  const std::size_t n = a.rows(), d = a.cols();
  std::vector<double> norms(n);
  Tensor out = Tensor::zeros(n, d);
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) sq += av[i * d + j] * av[i * d + j];
      norms[i] = std::sqrt(sq);
      if (!(norms[i] >= 1e-12)) {
        throw DegenerateRowError(i, fmt::format("l2_normalize_rows: row {} has norm {} below 1e-12", i, norms[i]));
      }
      for (std::size_t j = 0; j < d; ++j) ov[i * d + j] = av[i * d + j] / norms[i];
    }
  }
  return tape.record(out, {a}, [a, out, n, d, norms = std::move(norms)]() mutable {
    auto g = out.grad();
    auto ov = out.values();
    auto ag = a.grad();
    // d(x/|x|) = (g - y·(g·y)) / |x|
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += g[i * d + j] * ov[i * d + j];
      for (std::size_t j = 0; j < d; ++j) ag[i * d + j] += (g[i * d + j] - ov[i * d + j] * dot) / norms[i];
    }
  });
}

Tensor log_clamped(Tape& tape, const Tensor& a, double floor) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::log(std::max(av[i], floor));
  }
  return tape.record(out, {a}, [a, out, floor]() mutable {
    auto g = out.grad();
    auto av = a.values();
    auto ag = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (av[i] > floor) ag[i] += g[i] / av[i];
    }
  });
}

Tensor sum(Tape& tape, const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor out = Tensor::scalar(total);
  return tape.record(out, {a}, [a, out]() mutable {
    const double g = out.grad()[0];
    for (double& ag : a.grad()) ag += g;
  });
}

Tensor sum_squares(Tape& tape, const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v * v;
  Tensor out = Tensor::scalar(total);
  return tape.record(out, {a}, [a, out]() mutable {
    const double g = out.grad()[0];
    auto av = a.values();
    auto ag = a.grad();
    for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += 2.0 * g * av[i];
  });
}

Tensor sqrt(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) {
      if (av[i] < 0.0) throw EvaluationError(fmt::format("sqrt of negative value {}", av[i]));
      ov[i] = std::sqrt(av[i]);
    }
  }
  return tape.record(out, {a}, [a, out]() mutable {
    auto g = out.grad();
    auto ov = out.values();
    auto ag = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (ov[i] > 0.0) ag[i] += 0.5 * g[i] / ov[i];
    }
  });
}

Tensor gather_rows(Tape& tape, const Tensor& a, std::span<const std::size_t> index) {
  require_index_range(index, a.rows(), "gather_rows");
  const std::size_t d = a.cols();
  Tensor out = Tensor::zeros(index.size(), d);
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < index.size(); ++i) {
      std::copy_n(&av[index[i] * d], d, &ov[i * d]);
    }
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return tape.record(out, {a}, [a, out, d, idx = std::move(idx)]() mutable {
    auto g = out.grad();
    auto ag = a.grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) ag[idx[i] * d + j] += g[i * d + j];
    }
  });
}

Tensor scatter_add_rows(Tape& tape, const Tensor& a, std::span<const std::size_t> index, std::size_t out_rows) {
  if (index.size() != a.rows()) {
    throw DimensionError(fmt::format("scatter_add_rows: {} indices for tensor {}", index.size(), a.shape_str()));
  }
  require_index_range(index, out_rows, "scatter_add_rows");
  const std::size_t d = a.cols();
  Tensor out = Tensor::zeros(out_rows, d);
  {
    auto av = a.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < index.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) ov[index[i] * d + j] += av[i * d + j];
    }
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return tape.record(out, {a}, [a, out, d, idx = std::move(idx)]() mutable {
    auto g = out.grad();
    auto ag = a.grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) ag[i * d + j] += g[idx[i] * d + j];
    }
  });
}

Tensor scale_rows(Tape& tape, const Tensor& a, const Tensor& weights) {
  if (weights.cols() != 1 || weights.rows() != a.rows()) {
    throw DimensionError(fmt::format("scale_rows: weights {} do not match {}", weights.shape_str(), a.shape_str()));
  }
  const std::size_t n = a.rows(), d = a.cols();
  Tensor out = Tensor::zeros(n, d);
  {
    auto av = a.values();
    auto wv = weights.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) ov[i * d + j] = wv[i] * av[i * d + j];
    }
  }
  return tape.record(out, {a, weights}, [a, weights, out, n, d]() mutable {
    auto g = out.grad();
    auto av = a.values();
    auto wv = weights.values();
    if (a.requires_grad()) {
      auto ag = a.grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) ag[i * d + j] += wv[i] * g[i * d + j];
      }
    }
    if (weights.requires_grad()) {
      auto wg = weights.grad();
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += av[i * d + j] * g[i * d + j];
        wg[i] += acc;
      }
    }
  });
}

Tensor segment_softmax(Tape& tape, const Tensor& scores, std::span<const std::size_t> segment,
                       std::size_t n_segments) {
  if (scores.cols() != 1 || scores.rows() != segment.size()) {
    throw DimensionError(fmt::format("segment_softmax: scores {} with {} segment ids", scores.shape_str(), segment.size()));
  }
  require_index_range(segment, n_segments, "segment_softmax");
  const std::size_t m = segment.size();
  std::vector<double> mx(n_segments, -std::numeric_limits<double>::infinity());
  std::vector<double> total(n_segments, 0.0);
  Tensor out = Tensor::zeros(m, 1);
  {
    auto sv = scores.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < m; ++i) mx[segment[i]] = std::max(mx[segment[i]], sv[i]);
    for (std::size_t i = 0; i < m; ++i) total[segment[i]] += (ov[i] = std::exp(sv[i] - mx[segment[i]]));
    for (std::size_t i = 0; i < m; ++i) ov[i] /= total[segment[i]];
  }
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return tape.record(out, {scores}, [scores, out, n_segments, seg = std::move(seg)]() mutable {
    auto g = out.grad();
    auto ov = out.values();
    auto sg = scores.grad();
    std::vector<double> dot(n_segments, 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) dot[seg[i]] += g[i] * ov[i];
    for (std::size_t i = 0; i < seg.size(); ++i) sg[i] += ov[i] * (g[i] - dot[seg[i]]);
  });
}

// ---- verification ----------------------------------------------------------

double grad_check(const ScalarFn& f, std::span<Tensor> params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ContractError(fmt::format("grad_check: eps {} outside [1e-7, 1e-3]", eps));
  }
  auto evaluate = [&]() {
    Tape tape;
    const double v = f(tape).item();
    if (!std::isfinite(v)) throw EvaluationError("grad_check: loss evaluated to a non-finite value");
    return v;
  };

  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    Tensor loss = f(tape);
    if (!std::isfinite(loss.item())) throw EvaluationError("grad_check: loss evaluated to a non-finite value");
    tape.backward(loss);
  }

  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto v = p.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + eps;
      const double up = evaluate();
      v[i] = saved - eps;
      const double down = evaluate();
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
    }
  }
  return worst;
}

}  // namespace edgegfl::ad
