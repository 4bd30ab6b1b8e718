#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cpnn/rng.hpp"

namespace cpnn {

// One LSTM layer plus a per-timestep 2-class softmax head.  Gate rows are
// stacked in the fixed order (input i, forget f, candidate g, output o):
// row block [0,H) is i, [H,2H) is f, [2H,3H) is g, [3H,4H) is o.
struct LstmColumn {
  int input_dim = 0;   // 2 for a first column, 2 + H when fed a predecessor's hidden state
  int hidden_dim = 0;
  bool frozen = false;
  std::vector<double> gate_weights;       // 4H x D, row-major
  std::vector<double> recurrent_weights;  // 4H x H, row-major
  std::vector<double> gate_bias;          // 4H
  std::vector<double> head_weights;       // 2 x H, row-major
  std::vector<double> head_bias;          // 2

  std::size_t param_count() const {
    return gate_weights.size() + recurrent_weights.size() + gate_bias.size() +
           head_weights.size() + head_bias.size();
  }
};

// Weights drawn Uniform(-1/sqrt(H), +1/sqrt(H)) in a fixed order
// (gate_weights, recurrent_weights, head_weights row by row), biases zero.
LstmColumn init_column(int input_dim, int hidden_dim, Rng& rng);

// Everything the backward pass needs, for a batch of `seqs` sequences of
// `steps` timesteps processed together.  All tensors are stored time-major
// with the sequence index innermost, so the (t, row) plane is a contiguous
// stretch of `seqs` doubles: gates[(t*4H + r)*seqs + s].  That layout makes
// the inner loops of the kernels unit-stride.
struct ForwardCache {
  int steps = 0;
  int seqs = 0;
  int input_dim = 0;
  int hidden_dim = 0;
  std::vector<double> inputs;      // steps x D x seqs
  std::vector<double> gates;       // steps x 4H x seqs, post-activation
  std::vector<double> cells;       // steps x H x seqs
  std::vector<double> cell_tanh;   // steps x H x seqs, tanh(cells)
  std::vector<double> hidden;      // steps x H x seqs
  std::vector<double> probs;       // steps x 2 x seqs

  const double* hidden_plane(int t) const { return hidden.data() + static_cast<std::size_t>(t) * hidden_dim * seqs; }
};

struct LstmGrads {
  std::vector<double> gate_weights;
  std::vector<double> recurrent_weights;
  std::vector<double> gate_bias;
  std::vector<double> head_weights;
  std::vector<double> head_bias;
  std::vector<double> inputs;  // steps x D x seqs; filled only on request
};

// Reorders a sequence-major tensor (seqs, steps, dim) into the time-major
// planes (steps, dim, seqs) the kernels consume.
std::vector<double> to_time_major(const double* seq_major, int seqs, int steps, int dim);

// The production kernels.  Loops over independent output rows are OpenMP
// parallel; every output element is written by exactly one thread and
// accumulated in a fixed order, so results are bit-identical for any
// thread count.  A serial per-sequence reference implementation with the
// same signatures lives in cpnn::serial for testing and benchmarking.

// Runs the recurrence over the whole batch; takes ownership of the
// time-major input tensor (steps x D x seqs).
void forward_batch(const LstmColumn& col, std::vector<double> inputs, int steps, int seqs,
                   ForwardCache& cache);

// Mean cross-entropy over all (sequence, timestep) pairs; probabilities
// are clamped at 1e-12 inside the log.  labels is sequence-major
// (seqs x steps) as produced by build_sequences.
double mean_cross_entropy(const ForwardCache& cache, const std::uint8_t* labels);

// Exact gradients of mean_cross_entropy via backpropagation through time.
// Gradients w.r.t. the inputs are computed only when want_input_grads is
// set (they are never needed in training, since predecessor columns are
// frozen); pass false to skip that work.
void backward_batch(const LstmColumn& col, const ForwardCache& cache, const std::uint8_t* labels,
                    LstmGrads& grads, bool want_input_grads);

// Plain SGD: theta <- theta - lr * grad.  Throws std::logic_error on a
// frozen column.
void sgd_step(LstmColumn& col, const LstmGrads& grads, double lr);

// Single-sequence convenience wrapper (seqs = 1): seq is steps x D.
ForwardCache forward(const LstmColumn& col, const double* seq, int steps);

// Parameter snapshot as CSV with a shape header line; used by tests for
// freeze and determinism checks.
void save_column(std::ostream& out, const LstmColumn& col);
LstmColumn load_column(std::istream& in);

namespace serial {

// Textbook per-sequence implementations used as the ground truth the
// parallel kernels are checked against, and as the benchmark baseline.
// Identical signatures and cache layout, independent loop structure.
void forward_batch(const LstmColumn& col, std::vector<double> inputs, int steps, int seqs,
                   ForwardCache& cache);
double mean_cross_entropy(const ForwardCache& cache, const std::uint8_t* labels);
void backward_batch(const LstmColumn& col, const ForwardCache& cache, const std::uint8_t* labels,
                    LstmGrads& grads, bool want_input_grads);

}  // namespace serial

}  // namespace cpnn
