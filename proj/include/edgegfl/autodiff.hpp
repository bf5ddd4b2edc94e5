#pragma once

// Dense reverse-mode automatic differentiation.
//
// A Tensor is a shared handle onto a row-major matrix of doubles together with
// its gradient buffer; copying a Tensor aliases the same storage. Operations
// record themselves on a Tape (define-by-run); Tape::backward replays the
// recorded entries in reverse and accumulates gradients into every input that
// requires them.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace edgegfl::ad {

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor filled(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  std::size_t rows() const { return impl_->rows; }
  std::size_t cols() const { return impl_->cols; }
  std::size_t size() const { return impl_->values.size(); }
  std::array<std::size_t, 2> shape() const { return {impl_->rows, impl_->cols}; }
  std::string shape_str() const;
  bool is_scalar() const { return defined() && size() == 1; }

  // Handle semantics: constness applies to the handle, not the buffers.
  std::span<double> values() const { return impl_->values; }
  std::span<double> grad() const { return impl_->grad; }
  double& at(std::size_t r, std::size_t c) const { return impl_->values[r * impl_->cols + c]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) const { impl_->requires_grad = flag; }
  void zero_grad() const;

  /// Unique id of the underlying storage.
  std::uint64_t id() const { return impl_->id; }

  /// Deep copy of values (gradient reset to zero), detached from any tape.
  Tensor clone() const;

 private:
  struct Storage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    std::uint64_t id = 0;
  };
  std::shared_ptr<Storage> impl_;
};

class Tape {
 public:
  /// Reads the output gradient and accumulates into inputs.
  using BackwardFn = std::function<void()>;

  /// Records an operation. `output` requires grad iff any input does.
  Tensor record(Tensor output, std::vector<Tensor> inputs, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates through the recorded entries in
  /// reverse order. Intermediate gradients are reset first, so calling it again
  /// after zeroing parameter gradients reproduces the same result. Parameter
  /// (leaf) gradients accumulate.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

// ---- primitives -----------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);  // b may be a 1×cols row
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor hadamard(Tape& tape, const Tensor& a, const Tensor& b);  // b may be a 1×cols row
Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor add_scalar(Tape& tape, const Tensor& a, double offset);
Tensor leaky_relu(Tape& tape, const Tensor& a, double slope);
Tensor elu(Tape& tape, const Tensor& a, double alpha = 1.0);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor softmax_rows(Tape& tape, const Tensor& a);
Tensor l2_normalize_rows(Tape& tape, const Tensor& a);
/// log(max(a, floor)); the gradient is zero where the clamp is active.
Tensor log_clamped(Tape& tape, const Tensor& a, double floor);
Tensor sum(Tape& tape, const Tensor& a);
Tensor sum_squares(Tape& tape, const Tensor& a);
/// Elementwise square root; the gradient at 0 is taken as 0.
Tensor sqrt(Tape& tape, const Tensor& a);

/// out[i] = a[index[i]]
Tensor gather_rows(Tape& tape, const Tensor& a, std::span<const std::size_t> index);
/// out[index[i]] += a[i]; out has `out_rows` rows.
Tensor scatter_add_rows(Tape& tape, const Tensor& a, std::span<const std::size_t> index,
                        std::size_t out_rows);
/// Multiplies row i of `a` by the scalar weights(i, 0).
Tensor scale_rows(Tape& tape, const Tensor& a, const Tensor& weights);
/// Softmax of a column of scores within groups: entries sharing segment[i] are
/// normalized together.
Tensor segment_softmax(Tape& tape, const Tensor& scores, std::span<const std::size_t> segment,
                       std::size_t n_segments);

// ---- verification ----------------------------------------------------------

using ScalarFn = std::function<Tensor(Tape&)>;

/// Max over all entries of all `params` of
/// |analytic - central difference| / max(1, |analytic|).
double grad_check(const ScalarFn& f, std::span<Tensor> params, double eps = 1e-5);

}  // namespace edgegfl::ad
