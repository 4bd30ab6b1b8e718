#include "cpnn/lstm.hpp"

#include <cmath>
#include <stdexcept>

// Per-sequence reference implementation of the LSTM kernels: one sequence
// at a time, plain dot products, no OpenMP.  It writes the same cache
// layout as the batched kernels so the two are interchangeable in tests
// and in the benchmark.

namespace cpnn::serial {

namespace {

constexpr double prob_clamp = 1e-12;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void forward_batch(const LstmColumn& col, std::vector<double> inputs, int steps, int seqs,
                   ForwardCache& cache) {
  const int H = col.hidden_dim;
  const int D = col.input_dim;
  const int S = seqs;
  if (inputs.size() != static_cast<size_t>(steps) * D * S) {
    throw std::invalid_argument("input tensor size does not match steps x D x seqs");
  }
  cache.steps = steps;
  cache.seqs = S;
  cache.input_dim = D;
  cache.hidden_dim = H;
  cache.inputs = std::move(inputs);
  cache.gates.resize(static_cast<size_t>(steps) * 4 * H * S);
  cache.cells.resize(static_cast<size_t>(steps) * H * S);
  cache.cell_tanh.resize(static_cast<size_t>(steps) * H * S);
  cache.hidden.resize(static_cast<size_t>(steps) * H * S);
  cache.probs.resize(static_cast<size_t>(steps) * 2 * S);

  std::vector<double> h(H), h_next(H), c(H);

  for (int s = 0; s < S; ++s) {
    std::fill(h.begin(), h.end(), 0.0);
    std::fill(c.begin(), c.end(), 0.0);
    for (int t = 0; t < steps; ++t) {
      double* gates_t = cache.gates.data() + static_cast<size_t>(t) * 4 * H * S;
      // every unit's pre-activations read the step t-1 hidden state, so
      // the updates go to a second buffer until the whole step is done
      for (int j = 0; j < H; ++j) {
        double pre[4];
        for (int gate = 0; gate < 4; ++gate) {
          int r = gate * H + j;
          double acc = col.gate_bias[r];
          for (int k = 0; k < D; ++k) {
            acc += col.gate_weights[static_cast<size_t>(r) * D + k] *
                   cache.inputs[(static_cast<size_t>(t) * D + k) * S + s];
          }
          for (int jj = 0; jj < H; ++jj) {
            acc += col.recurrent_weights[static_cast<size_t>(r) * H + jj] * h[jj];
          }
          pre[gate] = acc;
        }
        double gi = sigmoid(pre[0]);
        double gf = sigmoid(pre[1]);
        double gg = std::tanh(pre[2]);
        double go = sigmoid(pre[3]);
        double cell = gi * gg + (t > 0 ? gf * c[j] : 0.0);
        gates_t[static_cast<size_t>(j) * S + s] = gi;
        gates_t[static_cast<size_t>(H + j) * S + s] = gf;
        gates_t[static_cast<size_t>(2 * H + j) * S + s] = gg;
        gates_t[static_cast<size_t>(3 * H + j) * S + s] = go;
        c[j] = cell;
        double cell_tanh = std::tanh(cell);
        cache.cells[(static_cast<size_t>(t) * H + j) * S + s] = cell;
        cache.cell_tanh[(static_cast<size_t>(t) * H + j) * S + s] = cell_tanh;
        h_next[j] = go * cell_tanh;
        cache.hidden[(static_cast<size_t>(t) * H + j) * S + s] = h_next[j];
      }
      h.swap(h_next);
      double l0 = col.head_bias[0];
      double l1 = col.head_bias[1];
      for (int j = 0; j < H; ++j) {
        l0 += col.head_weights[j] * h[j];
        l1 += col.head_weights[static_cast<size_t>(H) + j] * h[j];
      }
      double m = l0 > l1 ? l0 : l1;
      double e0 = std::exp(l0 - m);
      double e1 = std::exp(l1 - m);
      cache.probs[(static_cast<size_t>(t) * 2) * S + s] = e0 / (e0 + e1);
      cache.probs[(static_cast<size_t>(t) * 2 + 1) * S + s] = e1 / (e0 + e1);
    }
  }
}

double mean_cross_entropy(const ForwardCache& cache, const std::uint8_t* labels) {
  const int S = cache.seqs;
  const int W = cache.steps;
  double total = 0.0;
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < W; ++t) {
      double p = labels[static_cast<size_t>(s) * W + t]
                     ? cache.probs[(static_cast<size_t>(t) * 2 + 1) * S + s]
                     : cache.probs[(static_cast<size_t>(t) * 2) * S + s];
      total -= std::log(p > prob_clamp ? p : prob_clamp);
    }
  }
  return total / (static_cast<double>(S) * W);
}

void backward_batch(const LstmColumn& col, const ForwardCache& cache, const std::uint8_t* labels,
                    LstmGrads& grads, bool want_input_grads) {
  const int H = col.hidden_dim;
  const int D = col.input_dim;
  const int S = cache.seqs;
  const int W = cache.steps;
  const double scale = 1.0 / (static_cast<double>(S) * W);

  grads.gate_weights.assign(col.gate_weights.size(), 0.0);
  grads.recurrent_weights.assign(col.recurrent_weights.size(), 0.0);
  grads.gate_bias.assign(col.gate_bias.size(), 0.0);
  grads.head_weights.assign(col.head_weights.size(), 0.0);
  grads.head_bias.assign(col.head_bias.size(), 0.0);
  if (want_input_grads) grads.inputs.assign(cache.inputs.size(), 0.0);

  std::vector<double> dh(H), dc(H), dz(static_cast<size_t>(4) * H);

  for (int s = 0; s < S; ++s) {
    std::fill(dh.begin(), dh.end(), 0.0);
    std::fill(dc.begin(), dc.end(), 0.0);
    for (int t = W - 1; t >= 0; --t) {
      // softmax head
      double p0 = cache.probs[(static_cast<size_t>(t) * 2) * S + s];
      double p1 = cache.probs[(static_cast<size_t>(t) * 2 + 1) * S + s];
      int y = labels[static_cast<size_t>(s) * W + t];
      double dl0 = (p0 - (y == 0 ? 1.0 : 0.0)) * scale;
      double dl1 = (p1 - (y == 1 ? 1.0 : 0.0)) * scale;
      grads.head_bias[0] += dl0;
      grads.head_bias[1] += dl1;
      for (int j = 0; j < H; ++j) {
        double hj = cache.hidden[(static_cast<size_t>(t) * H + j) * S + s];
        grads.head_weights[j] += dl0 * hj;
        grads.head_weights[static_cast<size_t>(H) + j] += dl1 * hj;
        dh[j] += dl0 * col.head_weights[j] + dl1 * col.head_weights[static_cast<size_t>(H) + j];
      }
      // gates
      for (int j = 0; j < H; ++j) {
        double gi = cache.gates[(static_cast<size_t>(t) * 4 * H + j) * S + s];
        double gf = cache.gates[(static_cast<size_t>(t) * 4 * H + H + j) * S + s];
        double gg = cache.gates[(static_cast<size_t>(t) * 4 * H + 2 * H + j) * S + s];
        double go = cache.gates[(static_cast<size_t>(t) * 4 * H + 3 * H + j) * S + s];
        double ct = cache.cell_tanh[(static_cast<size_t>(t) * H + j) * S + s];
        double cprev = t > 0 ? cache.cells[(static_cast<size_t>(t - 1) * H + j) * S + s] : 0.0;
        double dcell = dh[j] * go * (1.0 - ct * ct) + dc[j];
        dz[j] = dcell * gg * gi * (1.0 - gi);
        dz[static_cast<size_t>(H) + j] = dcell * cprev * gf * (1.0 - gf);
        dz[static_cast<size_t>(2 * H) + j] = dcell * gi * (1.0 - gg * gg);
        dz[static_cast<size_t>(3 * H) + j] = dh[j] * ct * go * (1.0 - go);
        dc[j] = dcell * gf;
      }
      // parameter gradients and the carries to step t-1
      std::fill(dh.begin(), dh.end(), 0.0);
      for (int r = 0; r < 4 * H; ++r) {
        double z = dz[r];
        grads.gate_bias[r] += z;
        for (int k = 0; k < D; ++k) {
          grads.gate_weights[static_cast<size_t>(r) * D + k] +=
              z * cache.inputs[(static_cast<size_t>(t) * D + k) * S + s];
        }
        if (t > 0) {
          for (int j = 0; j < H; ++j) {
            grads.recurrent_weights[static_cast<size_t>(r) * H + j] +=
                z * cache.hidden[(static_cast<size_t>(t - 1) * H + j) * S + s];
            dh[j] += z * col.recurrent_weights[static_cast<size_t>(r) * H + j];
          }
        }
        if (want_input_grads) {
          for (int k = 0; k < D; ++k) {
            grads.inputs[(static_cast<size_t>(t) * D + k) * S + s] +=
                z * col.gate_weights[static_cast<size_t>(r) * D + k];
          }
        }
      }
    }
  }
}

}  // namespace cpnn::serial
