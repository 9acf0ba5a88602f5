#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tlp/tensor.hpp"

namespace tlp {

// Cell mask for matrix-shaped values: nonzero marks cells excluded from
// softmax, loss, and gradients.
using Mask = Tensor<std::uint8_t>;

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid as long as the
// tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Tensord& value() const;
};

// The eight learned tensors of one LSTM direction, bound on a tape.
struct LstmVars {
  Var w_input, w_forget, w_output, w_cell;
  Var b_input, b_forget, b_output, b_cell;
};

// Reverse-mode tape. Operations compute eagerly and record enough state for
// the reverse sweep; backward() accumulates gradients for every recorded
// value. Every op checks its output for NaN/Inf and raises NumericError
// naming itself. A tape is single-owner scratch state: build, backward,
// discard. Concurrent tapes over shared read-only parameter tensors are safe
// because leaves copy their input.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(const Tensord& value);
  Var constant(const Tensord& value) { return leaf(value); }

  const Tensord& value(Var v) const;
  const Tensord& grad(Var v) const;

  // Elementwise / reductions.
  Var add(Var a, Var b);
  Var add_n(const std::vector<Var>& vs);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var sum(Var a);

  // Structural ops mirroring the tensor free functions.
  Var row_reverse(Var m);
  Var tensor_transpose(Var t, const std::array<int, 3>& perm);
  Var concat(Var a, Var b, int axis);
  Var slice_first(Var t, Index i);
  Var stack_first(const std::vector<Var>& slices);

  // Row-recurrent LSTM over a rank-2 input; backward runs full BPTT.
  Var matrix_lstm(Var x, const LstmVars& p);

  // Pointwise affine functional over the last axis of a rank-3 tensor.
  Var affine_last_axis(Var t, Var weights, Var bias);

  // Losses over matrix-shaped scores; masked cells carry no probability mass
  // and no gradient.
  Var softmax_cross_entropy(Var scores, const std::vector<int>& gold_cols, const Mask& mask);
  Var masked_mse(Var scores, const Tensord& target, const Mask& mask);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. loss must have
  // shape {1}.
  void backward(Var loss);

  std::size_t size() const;

 private:
  friend struct Var;
  struct Node;
  template <typename T, typename... Args>
  Var emplace(Args&&... args);
  Tensord& grad_ref(int id);
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Named parameter tensors with same-shaped gradient slots, kept in insertion
// order so reductions over all parameters are reproducible.
class GradientContext {
 public:
  void add(std::string name, Tensord param);
  bool contains(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

  Tensord& param(const std::string& name);
  const Tensord& param(const std::string& name) const;
  Tensord& grad(const std::string& name);
  const Tensord& grad(const std::string& name) const;

  void zero_grads();

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensord> params_;
  std::unordered_map<std::string, Tensord> grads_;
};

// Parameter leaves bound on a tape, addressable by name.
struct BoundParams {
  std::vector<std::pair<std::string, Var>> vars;
  Var at(const std::string& name) const;
};

// Builds a scalar loss from bound parameters using tape ops.
using LossBuilder = std::function<Var(Tape&, const BoundParams&)>;

// Evaluates the loss once and returns a context whose gradients hold
// d(loss)/d(parameter) for every parameter. Parameters the loss never touches
// get exactly-zero gradients. Optionally reports the loss value.
GradientContext compute_gradients(const LossBuilder& build_loss, const GradientContext& params,
                                  double* loss_value = nullptr);

}  // namespace tlp
