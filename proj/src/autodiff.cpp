#include "tlp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlp/lstm.hpp"

namespace tlp {

struct Tape::Node {
  Tensord value;
  Tensord grad;  // allocated by backward()
  virtual ~Node() = default;
  virtual const char* name() const { return "leaf"; }
  virtual void backward(Tape&) {}
};

namespace {

void check_finite(const Tensord& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": produced non-finite values");
}

void check_mask(const Mask& mask, const Tensord& scores, const char* op) {
  if (mask.shape() != scores.shape())
    throw ShapeError(std::string(op) + ": mask shape mismatch");
}

}  // namespace

const Tensord& Var::value() const { return tape->value(*this); }

Tape::Tape() = default;
Tape::~Tape() = default;

std::size_t Tape::size() const { return nodes_.size(); }

const Tensord& Tape::value(Var v) const { return nodes_[static_cast<size_t>(v.id)]->value; }
const Tensord& Tape::grad(Var v) const { return nodes_[static_cast<size_t>(v.id)]->grad; }
Tensord& Tape::grad_ref(int id) { return nodes_[static_cast<size_t>(id)]->grad; }

template <typename T, typename... Args>
Var Tape::emplace(Args&&... args) {
  nodes_.push_back(std::make_unique<T>(std::forward<Args>(args)...));
  Node& n = *nodes_.back();
  check_finite(n.value, n.name());
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(const Tensord& value) {
  struct Leaf : Node {};
  auto node = std::make_unique<Leaf>();
  node->value = value;
  nodes_.push_back(std::move(node));
  check_finite(nodes_.back()->value, "leaf");
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

// ---------------------------------------------------------------------------
// Elementwise and reduction nodes
// ---------------------------------------------------------------------------

Var Tape::add(Var a, Var b) {
  struct AddNode : Node {
    int a, b;
    AddNode(Tape& t, int a_, int b_) : a(a_), b(b_) {
      const Tensord& va = t.nodes_[static_cast<size_t>(a)]->value;
      const Tensord& vb = t.nodes_[static_cast<size_t>(b)]->value;
      if (!va.same_shape(vb)) throw ShapeError("add: shape mismatch");
      value = Tensord(va.shape());
      value.vec() = va.vec() + vb.vec();
    }
    const char* name() const override { return "add"; }
    void backward(Tape& t) override {
      t.grad_ref(a).vec() += grad.vec();
      t.grad_ref(b).vec() += grad.vec();
    }
  };
  return emplace<AddNode>(*this, a.id, b.id);
}

Var Tape::add_n(const std::vector<Var>& vs) {
  if (vs.empty()) throw ArgumentError("add_n: empty operand list");
  struct AddN : Node {
    std::vector<int> ids;
    AddN(Tape& t, const std::vector<Var>& vs) {
      const Tensord& first = t.value(vs.front());
      value = Tensord(first.shape());
      value.vec().setZero();
      for (Var v : vs) {
        if (!t.value(v).same_shape(first)) throw ShapeError("add_n: shape mismatch");
        value.vec() += t.value(v).vec();
        ids.push_back(v.id);
      }
    }
    const char* name() const override { return "add_n"; }
    void backward(Tape& t) override {
      for (int id : ids) t.grad_ref(id).vec() += grad.vec();
    }
  };
  return emplace<AddN>(*this, vs);
}

Var Tape::mul(Var a, Var b) {
  struct MulNode : Node {
    int a, b;
    MulNode(Tape& t, int a_, int b_) : a(a_), b(b_) {
      const Tensord& va = t.nodes_[static_cast<size_t>(a)]->value;
      const Tensord& vb = t.nodes_[static_cast<size_t>(b)]->value;
      if (!va.same_shape(vb)) throw ShapeError("mul: shape mismatch");
      value = Tensord(va.shape());
      value.vec() = va.vec().cwiseProduct(vb.vec());
    }
    const char* name() const override { return "mul"; }
    void backward(Tape& t) override {
      t.grad_ref(a).vec() += grad.vec().cwiseProduct(t.nodes_[static_cast<size_t>(b)]->value.vec());
      t.grad_ref(b).vec() += grad.vec().cwiseProduct(t.nodes_[static_cast<size_t>(a)]->value.vec());
    }
  };
  return emplace<MulNode>(*this, a.id, b.id);
}

Var Tape::scale(Var a, double factor) {
  struct ScaleNode : Node {
    int a;
    double k;
    ScaleNode(Tape& t, int a_, double k_) : a(a_), k(k_) {
      value = Tensord(t.nodes_[static_cast<size_t>(a)]->value.shape());
      value.vec() = k * t.nodes_[static_cast<size_t>(a)]->value.vec();
    }
    const char* name() const override { return "scale"; }
    void backward(Tape& t) override { t.grad_ref(a).vec() += k * grad.vec(); }
  };
  return emplace<ScaleNode>(*this, a.id, factor);
}

Var Tape::sum(Var a) {
  struct SumNode : Node {
    int a;
    SumNode(Tape& t, int a_) : a(a_) {
      value = Tensord::scalar(t.nodes_[static_cast<size_t>(a)]->value.vec().sum());
    }
    const char* name() const override { return "sum"; }
    void backward(Tape& t) override {
      t.grad_ref(a).vec().array() += grad(0);
    }
  };
  return emplace<SumNode>(*this, a.id);
}

// ---------------------------------------------------------------------------
// Structural nodes
// ---------------------------------------------------------------------------

Var Tape::row_reverse(Var m) {
  struct RevNode : Node {
    int a;
    RevNode(Tape& t, int a_) : a(a_) {
      value = tlp::row_reverse(t.nodes_[static_cast<size_t>(a)]->value);
    }
    const char* name() const override { return "row_reverse"; }
    void backward(Tape& t) override {
      t.grad_ref(a).mat() += grad.mat().colwise().reverse();
    }
  };
  return emplace<RevNode>(*this, m.id);
}

Var Tape::tensor_transpose(Var v, const std::array<int, 3>& perm) {
  struct TransposeNode : Node {
    int a;
    std::array<int, 3> inverse;
    TransposeNode(Tape& t, int a_, const std::array<int, 3>& perm) : a(a_) {
      value = tlp::tensor_transpose(t.nodes_[static_cast<size_t>(a)]->value, perm);
      for (int i = 0; i < 3; ++i) inverse[static_cast<size_t>(perm[static_cast<size_t>(i)] - 1)] = i + 1;
    }
    const char* name() const override { return "tensor_transpose"; }
    void backward(Tape& t) override {
      Tensord g = tlp::tensor_transpose(grad, inverse);
      t.grad_ref(a).vec() += g.vec();
    }
  };
  return emplace<TransposeNode>(*this, v.id, perm);
}

Var Tape::concat(Var a, Var b, int axis) {
  struct ConcatNode : Node {
    int a, b, axis;
    Index a_len;
    ConcatNode(Tape& t, int a_, int b_, int axis_) : a(a_), b(b_), axis(axis_) {
      const Tensord& va = t.nodes_[static_cast<size_t>(a)]->value;
      const Tensord& vb = t.nodes_[static_cast<size_t>(b)]->value;
      a_len = va.dim(axis - 1);
      value = tlp::concat(va, vb, axis);
      (void)vb;
    }
    const char* name() const override { return "concat"; }
    void backward(Tape& t) override {
      const Index b_len = value.dim(axis - 1) - a_len;
      Tensord ga = slice_axis(grad, axis, 0, a_len);
      Tensord gb = slice_axis(grad, axis, a_len, b_len);
      t.grad_ref(a).vec() += ga.vec();
      t.grad_ref(b).vec() += gb.vec();
    }
  };
  return emplace<ConcatNode>(*this, a.id, b.id, axis);
}

Var Tape::slice_first(Var v, Index i) {
  struct SliceNode : Node {
    int a;
    Index i;
    SliceNode(Tape& t, int a_, Index i_) : a(a_), i(i_) {
      const Tensord& va = t.nodes_[static_cast<size_t>(a)]->value;
      va.require_rank(3, "slice_first");
      if (i < 0 || i >= va.dim(0)) throw ArgumentError("slice_first: index out of range");
      value = Tensord({va.dim(1), va.dim(2)});
      value.mat() = va.slice(i);
    }
    const char* name() const override { return "slice_first"; }
    void backward(Tape& t) override { t.grad_ref(a).slice(i) += grad.mat(); }
  };
  return emplace<SliceNode>(*this, v.id, i);
}

Var Tape::stack_first(const std::vector<Var>& slices) {
  if (slices.empty()) throw ArgumentError("stack_first: empty slice list");
  struct StackNode : Node {
    std::vector<int> ids;
    StackNode(Tape& t, const std::vector<Var>& slices) {
      const Tensord& first = t.value(slices.front());
      first.require_rank(2, "stack_first");
      value = Tensord({static_cast<Index>(slices.size()), first.dim(0), first.dim(1)});
      for (size_t i = 0; i < slices.size(); ++i) {
        const Tensord& s = t.value(slices[i]);
        if (!s.same_shape(first)) throw ShapeError("stack_first: slice shape mismatch");
        value.slice(static_cast<Index>(i)) = s.mat();
        ids.push_back(slices[i].id);
      }
    }
    const char* name() const override { return "stack_first"; }
    void backward(Tape& t) override {
      for (size_t i = 0; i < ids.size(); ++i)
        t.grad_ref(ids[i]).mat() += grad.slice(static_cast<Index>(i));
    }
  };
  return emplace<StackNode>(*this, slices);
}

// ---------------------------------------------------------------------------
// Recurrent kernel node
// ---------------------------------------------------------------------------

Var Tape::matrix_lstm(Var x, const LstmVars& p) {
  struct LstmNode : Node {
    int x;
    std::array<int, 8> pid;
    MatrixLstmCache cache;
    LstmNode(Tape& t, int x_, const LstmVars& p) : x(x_) {
      pid = {p.w_input.id, p.w_forget.id, p.w_output.id, p.w_cell.id,
             p.b_input.id, p.b_forget.id, p.b_output.id, p.b_cell.id};
      value = matrix_lstm_forward(t.value(Var{&t, x}), make_view(t), &cache);
    }
    LstmParamsView make_view(Tape& t) const {
      auto val = [&](int id) -> const Tensord* { return &t.nodes_[static_cast<size_t>(id)]->value; };
      return {val(pid[0]), val(pid[1]), val(pid[2]), val(pid[3]),
              val(pid[4]), val(pid[5]), val(pid[6]), val(pid[7])};
    }
    const char* name() const override { return "matrix_lstm"; }
    void backward(Tape& t) override {
      LstmGradRefs g{&t.grad_ref(pid[0]), &t.grad_ref(pid[1]), &t.grad_ref(pid[2]),
                     &t.grad_ref(pid[3]), &t.grad_ref(pid[4]), &t.grad_ref(pid[5]),
                     &t.grad_ref(pid[6]), &t.grad_ref(pid[7])};
      matrix_lstm_backward(make_view(t), cache, grad, t.grad_ref(x), g);
    }
  };
  return emplace<LstmNode>(*this, x.id, p);
}

// ---------------------------------------------------------------------------
// Output map and losses
// ---------------------------------------------------------------------------

Var Tape::affine_last_axis(Var t, Var weights, Var bias) {
  struct AffineNode : Node {
    int t, w, b;
    AffineNode(Tape& tp, int t_, int w_, int b_) : t(t_), w(w_), b(b_) {
      const Tensord& vt = tp.nodes_[static_cast<size_t>(t)]->value;
      const Tensord& vw = tp.nodes_[static_cast<size_t>(w)]->value;
      const Tensord& vb = tp.nodes_[static_cast<size_t>(b)]->value;
      vt.require_rank(3, "affine_last_axis input");
      vw.require_rank(1, "affine_last_axis weights");
      if (vw.dim(0) != vt.dim(2)) throw ShapeError("affine_last_axis: weight width mismatch");
      if (vb.rank() != 1 || vb.dim(0) != 1)
        throw ShapeError("affine_last_axis: bias must have shape {1}");
      value = Tensord({vt.dim(0), vt.dim(1)});
      for (Index i = 0; i < vt.dim(0); ++i) {
        Vector<double> cell_scores = vt.slice(i) * vw.vec();
        cell_scores.array() += vb(0);
        value.mat().row(i) = cell_scores.transpose();
      }
    }
    const char* name() const override { return "affine_last_axis"; }
    void backward(Tape& tp) override {
      const Tensord& vt = tp.nodes_[static_cast<size_t>(t)]->value;
      const Tensord& vw = tp.nodes_[static_cast<size_t>(w)]->value;
      Tensord& gt = tp.grad_ref(t);
      Tensord& gw = tp.grad_ref(w);
      Tensord& gb = tp.grad_ref(b);
      for (Index i = 0; i < vt.dim(0); ++i) {
        gt.slice(i).noalias() += grad.mat().row(i).transpose() * vw.vec().transpose();
        gw.vec().noalias() += vt.slice(i).transpose() * grad.mat().row(i).transpose();
      }
      gb(0) += grad.vec().sum();
    }
  };
  return emplace<AffineNode>(*this, t.id, weights.id, bias.id);
}

Var Tape::softmax_cross_entropy(Var scores, const std::vector<int>& gold_cols, const Mask& mask) {
  struct XentNode : Node {
    int s;
    Tensord probs;  // masked cells stay 0
    std::vector<int> gold;
    XentNode(Tape& t, int s_, const std::vector<int>& gold_cols, const Mask& mask)
        : s(s_), gold(gold_cols) {
      const Tensord& v = t.nodes_[static_cast<size_t>(s)]->value;
      v.require_rank(2, "softmax_cross_entropy");
      check_mask(mask, v, "softmax_cross_entropy");
      const Index rows = v.dim(0), cols = v.dim(1);
      if (static_cast<Index>(gold.size()) != rows)
        throw ShapeError("softmax_cross_entropy: gold length mismatch");
      probs = Tensord({rows, cols});
      double loss = 0.0;
      for (Index i = 0; i < rows; ++i) {
        const int g = gold[static_cast<size_t>(i)];
        if (g < 0 || g >= cols)
          throw DataError("softmax_cross_entropy: row " + std::to_string(i) +
                          ": gold column out of range");
        if (mask(i, g))
          throw DataError("softmax_cross_entropy: row " + std::to_string(i) +
                          ": gold head cell is masked");
        double mx = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < cols; ++j)
          if (!mask(i, j)) mx = std::max(mx, v(i, j));
        double z = 0.0;
        for (Index j = 0; j < cols; ++j)
          if (!mask(i, j)) z += std::exp(v(i, j) - mx);
        for (Index j = 0; j < cols; ++j)
          if (!mask(i, j)) probs(i, j) = std::exp(v(i, j) - mx) / z;
        loss -= std::log(probs(i, g));
      }
      value = Tensord::scalar(loss);
    }
    const char* name() const override { return "softmax_cross_entropy"; }
    void backward(Tape& t) override {
      Tensord& gs = t.grad_ref(s);
      const double seed = grad(0);
      gs.vec() += seed * probs.vec();
      for (Index i = 0; i < probs.dim(0); ++i)
        gs(i, gold[static_cast<size_t>(i)]) -= seed;
    }
  };
  return emplace<XentNode>(*this, scores.id, gold_cols, mask);
}

Var Tape::masked_mse(Var scores, const Tensord& target, const Mask& mask) {
  struct MseNode : Node {
    int s;
    Tensord diff;  // masked cells zero
    Index n = 0;
    MseNode(Tape& t, int s_, const Tensord& target, const Mask& mask) : s(s_) {
      const Tensord& v = t.nodes_[static_cast<size_t>(s)]->value;
      if (!v.same_shape(target)) throw ShapeError("masked_mse: target shape mismatch");
      check_mask(mask, v, "masked_mse");
      diff = Tensord(v.shape());
      double acc = 0.0;
      for (Index i = 0; i < v.size(); ++i) {
        if (mask.data()[static_cast<size_t>(i)]) continue;
        const double d = v.data()[static_cast<size_t>(i)] - target.data()[static_cast<size_t>(i)];
        diff.data()[static_cast<size_t>(i)] = d;
        acc += d * d;
        ++n;
      }
      if (n == 0) throw ArgumentError("masked_mse: no unmasked cells");
      value = Tensord::scalar(acc / static_cast<double>(n));
    }
    const char* name() const override { return "masked_mse"; }
    void backward(Tape& t) override {
      t.grad_ref(s).vec() += (2.0 * grad(0) / static_cast<double>(n)) * diff.vec();
    }
  };
  return emplace<MseNode>(*this, scores.id, target, mask);
}

// ---------------------------------------------------------------------------
// Reverse sweep
// ---------------------------------------------------------------------------

void Tape::backward(Var loss) {
  const Tensord& lv = value(loss);
  if (lv.rank() != 1 || lv.dim(0) != 1)
    throw ArgumentError("backward: loss must have shape {1}");
  for (auto& n : nodes_) {
    n->grad = Tensord(n->value.shape());
  }
  grad_ref(loss.id)(0) = 1.0;
  for (int i = loss.id; i >= 0; --i) nodes_[static_cast<size_t>(i)]->backward(*this);
}

// ---------------------------------------------------------------------------
// GradientContext and compute_gradients
// ---------------------------------------------------------------------------

void GradientContext::add(std::string name, Tensord param) {
  if (params_.count(name)) throw ArgumentError("duplicate parameter name: " + name);
  grads_.emplace(name, Tensord(param.shape()));
  names_.push_back(name);
  params_.emplace(std::move(name), std::move(param));
}

bool GradientContext::contains(const std::string& name) const { return params_.count(name) > 0; }

Tensord& GradientContext::param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second;
}

const Tensord& GradientContext::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second;
}

Tensord& GradientContext::grad(const std::string& name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second;
}

const Tensord& GradientContext::grad(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second;
}

void GradientContext::zero_grads() {
  for (auto& [name, g] : grads_) g.vec().setZero();
}

Var BoundParams::at(const std::string& name) const {
  for (const auto& [n, v] : vars)
    if (n == name) return v;
  throw ArgumentError("loss builder asked for unbound parameter: " + name);
}

GradientContext compute_gradients(const LossBuilder& build_loss, const GradientContext& params,
                                  double* loss_value) {
  Tape tape;
  BoundParams bound;
  for (const std::string& name : params.names())
    bound.vars.emplace_back(name, tape.leaf(params.param(name)));

  Var loss = build_loss(tape, bound);
  const Tensord& lv = tape.value(loss);
  if (lv.rank() != 1 || lv.dim(0) != 1)
    throw ArgumentError("compute_gradients: loss builder must return a shape {1} value");
  tape.backward(loss);

  GradientContext out;
  for (size_t i = 0; i < bound.vars.size(); ++i) {
    const auto& [name, var] = bound.vars[i];
    out.add(name, params.param(name));
    out.grad(name) = tape.grad(var);
    if (!out.grad(name).all_finite())
      throw NumericError("compute_gradients: non-finite gradient for " + name);
  }
  if (loss_value) *loss_value = lv(0);
  return out;
}

}  // namespace tlp
