#pragma once

#include <utility>

#include "tlp/tensor.hpp"

namespace tlp {

// Gate weights and biases of one LSTM direction. All four weight matrices are
// h x (x+h): they act on the concatenation of the step input and the previous
// hidden state.
struct LstmParams {
  Tensord w_input, w_forget, w_output, w_cell;  // h x (x+h)
  Tensord b_input, b_forget, b_output, b_cell;  // h

  Index hidden() const { return b_input.dim(0); }
  Index input_width() const { return w_input.dim(1) - hidden(); }
};

// Throws ShapeError unless all four W share h x (x+h) and all four b have
// length h.
void validate_lstm_params(const LstmParams& p);

// Non-owning view used by the forward/backward kernels; lets the tape run the
// kernels on tensors it stores without copying them into an LstmParams.
struct LstmParamsView {
  const Tensord* w_input;
  const Tensord* w_forget;
  const Tensord* w_output;
  const Tensord* w_cell;
  const Tensord* b_input;
  const Tensord* b_forget;
  const Tensord* b_output;
  const Tensord* b_cell;

  Index hidden() const { return b_input->dim(0); }
  Index input_width() const { return w_input->dim(1) - hidden(); }
};

LstmParamsView view(const LstmParams& p);

// One recurrence step: gates from sigma(W [x; h_prev] + b), then
//   c = g_forget * c_prev + g_input * tanh(W_cell [x; h_prev] + b_cell)
//   h = g_output * tanh(c)
// Returns (h, c).
std::pair<Tensord, Tensord> lstm_cell(const Tensord& x, const Tensord& h_prev,
                                      const Tensord& c_prev, const LstmParams& p);

// Applies the LSTM to the rows of a rank-2 tensor, starting from zero state;
// output row i is the hidden state after consuming row i.
Tensord matrix_lstm(const Tensord& x, const LstmParams& p);

// Per-step activations cached by the forward kernel for BPTT.
struct MatrixLstmCache {
  RowMatrix<double> inputs;       // a x (b+h), rows are [x_t; h_{t-1}]
  RowMatrix<double> gate_input;   // a x h, post-sigmoid
  RowMatrix<double> gate_forget;  // a x h
  RowMatrix<double> gate_output;  // a x h
  RowMatrix<double> candidate;    // a x h, tanh of the cell candidate
  RowMatrix<double> cell;         // a x h
  RowMatrix<double> cell_tanh;    // a x h
};

Tensord matrix_lstm_forward(const Tensord& x, const LstmParamsView& p, MatrixLstmCache* cache);

// Accumulation targets for the backward kernel.
struct LstmGradRefs {
  Tensord* w_input;
  Tensord* w_forget;
  Tensord* w_output;
  Tensord* w_cell;
  Tensord* b_input;
  Tensord* b_forget;
  Tensord* b_output;
  Tensord* b_cell;
};

// Reverse pass through the whole sequence. d_out is d(loss)/d(output rows),
// a x h. Gradients are accumulated (+=) into d_x and the parameter slots.
void matrix_lstm_backward(const LstmParamsView& p, const MatrixLstmCache& cache,
                          const Tensord& d_out, Tensord& d_x, const LstmGradRefs& grads);

}  // namespace tlp
