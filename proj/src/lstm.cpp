#include "tlp/lstm.hpp"

#include <cmath>

namespace tlp {

namespace {

inline Vector<double> sigmoid(const Vector<double>& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

}  // namespace

void validate_lstm_params(const LstmParams& p) {
  const Index h = p.b_input.dim(0);
  const Tensord* ws[] = {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell};
  for (const Tensord* w : ws) {
    w->require_rank(2, "lstm weight");
    if (w->dim(0) != h || w->dim(1) <= h)
      throw ShapeError("lstm weight must be h x (x+h) with x >= 1");
    if (w->dim(1) != p.w_input.dim(1))
      throw ShapeError("lstm gate weights disagree on input width");
  }
  const Tensord* bs[] = {&p.b_input, &p.b_forget, &p.b_output, &p.b_cell};
  for (const Tensord* b : bs) {
    b->require_rank(1, "lstm bias");
    if (b->dim(0) != h) throw ShapeError("lstm gate biases disagree on width");
  }
}

LstmParamsView view(const LstmParams& p) {
  return {&p.w_input, &p.w_forget, &p.w_output, &p.w_cell,
          &p.b_input, &p.b_forget, &p.b_output, &p.b_cell};
}

std::pair<Tensord, Tensord> lstm_cell(const Tensord& x, const Tensord& h_prev,
                                      const Tensord& c_prev, const LstmParams& p) {
  validate_lstm_params(p);
  x.require_rank(1, "lstm_cell x");
  h_prev.require_rank(1, "lstm_cell h_prev");
  c_prev.require_rank(1, "lstm_cell c_prev");
  const Index h = p.hidden();
  if (x.dim(0) != p.input_width()) throw ShapeError("lstm_cell: input width mismatch");
  if (h_prev.dim(0) != h || c_prev.dim(0) != h)
    throw ShapeError("lstm_cell: state width mismatch");

  Vector<double> in(x.dim(0) + h);
  in << x.vec(), h_prev.vec();

  Vector<double> gi = sigmoid(p.w_input.mat() * in + p.b_input.vec());
  Vector<double> gf = sigmoid(p.w_forget.mat() * in + p.b_forget.vec());
  Vector<double> go = sigmoid(p.w_output.mat() * in + p.b_output.vec());
  Vector<double> u = (p.w_cell.mat() * in + p.b_cell.vec()).array().tanh();

  Tensord c({h}), hidden({h});
  c.vec() = gf.cwiseProduct(c_prev.vec()) + gi.cwiseProduct(u);
  hidden.vec() = go.cwiseProduct(c.vec().array().tanh().matrix());
  return {std::move(hidden), std::move(c)};
}

Tensord matrix_lstm(const Tensord& x, const LstmParams& p) {
  validate_lstm_params(p);
  return matrix_lstm_forward(x, view(p), nullptr);
}

Tensord matrix_lstm_forward(const Tensord& x, const LstmParamsView& p, MatrixLstmCache* cache) {
  x.require_rank(2, "matrix_lstm input");
  const Index a = x.dim(0);
  const Index b = x.dim(1);
  const Index h = p.hidden();
  if (b != p.input_width()) throw ShapeError("matrix_lstm: input width mismatch");

  if (cache) {
    cache->inputs.resize(a, b + h);
    cache->gate_input.resize(a, h);
    cache->gate_forget.resize(a, h);
    cache->gate_output.resize(a, h);
    cache->candidate.resize(a, h);
    cache->cell.resize(a, h);
    cache->cell_tanh.resize(a, h);
  }

  Tensord out({a, h});
  Vector<double> in(b + h);
  Vector<double> h_prev = Vector<double>::Zero(h);
  Vector<double> c_prev = Vector<double>::Zero(h);
  for (Index t = 0; t < a; ++t) {
    in << x.mat().row(t).transpose(), h_prev;
    Vector<double> gi = sigmoid(p.w_input->mat() * in + p.b_input->vec());
    Vector<double> gf = sigmoid(p.w_forget->mat() * in + p.b_forget->vec());
    Vector<double> go = sigmoid(p.w_output->mat() * in + p.b_output->vec());
    Vector<double> u = (p.w_cell->mat() * in + p.b_cell->vec()).array().tanh();
    Vector<double> c = gf.cwiseProduct(c_prev) + gi.cwiseProduct(u);
    Vector<double> tc = c.array().tanh();
    Vector<double> hv = go.cwiseProduct(tc);
    out.mat().row(t) = hv.transpose();
    if (cache) {
      cache->inputs.row(t) = in.transpose();
      cache->gate_input.row(t) = gi.transpose();
      cache->gate_forget.row(t) = gf.transpose();
      cache->gate_output.row(t) = go.transpose();
      cache->candidate.row(t) = u.transpose();
      cache->cell.row(t) = c.transpose();
      cache->cell_tanh.row(t) = tc.transpose();
    }
    h_prev = std::move(hv);
    c_prev = std::move(c);
  }
  return out;
}

void matrix_lstm_backward(const LstmParamsView& p, const MatrixLstmCache& cache,
                          const Tensord& d_out, Tensord& d_x, const LstmGradRefs& grads) {
  const Index a = cache.inputs.rows();
  const Index h = p.hidden();
  const Index b = p.input_width();

  Vector<double> dh_next = Vector<double>::Zero(h);
  Vector<double> dc_next = Vector<double>::Zero(h);
  for (Index t = a - 1; t >= 0; --t) {
    const Vector<double> dh = d_out.mat().row(t).transpose() + dh_next;
    const auto gi = cache.gate_input.row(t).transpose();
    const auto gf = cache.gate_forget.row(t).transpose();
    const auto go = cache.gate_output.row(t).transpose();
    const auto u = cache.candidate.row(t).transpose();
    const auto tc = cache.cell_tanh.row(t).transpose();
    const Vector<double> c_prev = t > 0 ? Vector<double>(cache.cell.row(t - 1).transpose())
                                        : Vector<double>::Zero(h);

    const Vector<double> d_go = dh.cwiseProduct(tc);
    Vector<double> dc = dh.cwiseProduct(go).cwiseProduct(
                            (1.0 - tc.array().square()).matrix()) +
                        dc_next;
    const Vector<double> d_gf = dc.cwiseProduct(c_prev);
    const Vector<double> d_gi = dc.cwiseProduct(u);
    const Vector<double> d_u = dc.cwiseProduct(gi);
    dc_next = dc.cwiseProduct(gf);

    // Pre-activation gradients through sigma / tanh.
    const Vector<double> da_i = d_gi.cwiseProduct(gi).cwiseProduct((1.0 - gi.array()).matrix());
    const Vector<double> da_f = d_gf.cwiseProduct(gf).cwiseProduct((1.0 - gf.array()).matrix());
    const Vector<double> da_o = d_go.cwiseProduct(go).cwiseProduct((1.0 - go.array()).matrix());
    const Vector<double> da_c = d_u.cwiseProduct((1.0 - u.array().square()).matrix());

    const auto in_row = cache.inputs.row(t);
    grads.w_input->mat().noalias() += da_i * in_row;
    grads.w_forget->mat().noalias() += da_f * in_row;
    grads.w_output->mat().noalias() += da_o * in_row;
    grads.w_cell->mat().noalias() += da_c * in_row;
    grads.b_input->vec() += da_i;
    grads.b_forget->vec() += da_f;
    grads.b_output->vec() += da_o;
    grads.b_cell->vec() += da_c;

    Vector<double> d_in = p.w_input->mat().transpose() * da_i +
                          p.w_forget->mat().transpose() * da_f +
                          p.w_output->mat().transpose() * da_o +
                          p.w_cell->mat().transpose() * da_c;
    d_x.mat().row(t) += d_in.head(b).transpose();
    dh_next = d_in.tail(h);
  }
}

}  // namespace tlp
