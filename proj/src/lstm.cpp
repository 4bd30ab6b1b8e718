#include "cpnn/lstm.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cpnn {

namespace {

// Below this many sequences the OpenMP regions run serially; the fork
// overhead dwarfs the work and the single-sequence path stays cheap.
constexpr int parallel_min_seqs = 32;

constexpr double prob_clamp = 1e-12;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LstmColumn init_column(int input_dim, int hidden_dim, Rng& rng) {
  if (input_dim < 1 || hidden_dim < 1) throw std::invalid_argument("bad LSTM dimensions");
  LstmColumn col;
  col.input_dim = input_dim;
  col.hidden_dim = hidden_dim;
  double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto draw = [&](std::vector<double>& v, size_t n) {
    v.resize(n);
    for (double& w : v) w = rng.uniform(-bound, bound);
  };
  draw(col.gate_weights, static_cast<size_t>(4) * hidden_dim * input_dim);
  draw(col.recurrent_weights, static_cast<size_t>(4) * hidden_dim * hidden_dim);
  col.gate_bias.assign(static_cast<size_t>(4) * hidden_dim, 0.0);
  draw(col.head_weights, static_cast<size_t>(2) * hidden_dim);
  col.head_bias.assign(2, 0.0);
  return col;
}

std::vector<double> to_time_major(const double* seq_major, int seqs, int steps, int dim) {
  std::vector<double> out(static_cast<size_t>(steps) * dim * seqs);
  for (int s = 0; s < seqs; ++s) {
    for (int t = 0; t < steps; ++t) {
      for (int d = 0; d < dim; ++d) {
        out[(static_cast<size_t>(t) * dim + d) * seqs + s] =
            seq_major[(static_cast<size_t>(s) * steps + t) * dim + d];
      }
    }
  }
  return out;
}

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

  // pre-activation scratch for one timestep
  std::vector<double> preact(static_cast<size_t>(4) * H * S);

  for (int t = 0; t < steps; ++t) {
    const double* in_t = cache.inputs.data() + static_cast<size_t>(t) * D * S;
    const double* h_prev = t > 0 ? cache.hidden.data() + static_cast<size_t>(t - 1) * H * S : nullptr;

    // preact[r] = bias[r] + Wx[r] . x_t + Wh[r] . h_{t-1}, one output row
    // per loop iteration so each element has a single writer and a fixed
    // accumulation order
#pragma omp parallel for schedule(static) if (S >= parallel_min_seqs)
    for (int r = 0; r < 4 * H; ++r) {
      double* row = preact.data() + static_cast<size_t>(r) * S;
      double b = col.gate_bias[r];
      for (int s = 0; s < S; ++s) row[s] = b;
      const double* wx = col.gate_weights.data() + static_cast<size_t>(r) * D;
      for (int k = 0; k < D; ++k) {
        double w = wx[k];
        const double* x = in_t + static_cast<size_t>(k) * S;
        for (int s = 0; s < S; ++s) row[s] += w * x[s];
      }
      if (h_prev) {
        const double* wh = col.recurrent_weights.data() + static_cast<size_t>(r) * H;
        for (int j = 0; j < H; ++j) {
          double w = wh[j];
          const double* h = h_prev + static_cast<size_t>(j) * S;
          for (int s = 0; s < S; ++s) row[s] += w * h[s];
        }
      }
    }

    double* gates_t = cache.gates.data() + static_cast<size_t>(t) * 4 * H * S;
    double* cells_t = cache.cells.data() + static_cast<size_t>(t) * H * S;
    double* ctanh_t = cache.cell_tanh.data() + static_cast<size_t>(t) * H * S;
    double* hidden_t = cache.hidden.data() + static_cast<size_t>(t) * H * S;
    const double* cells_prev = t > 0 ? cache.cells.data() + static_cast<size_t>(t - 1) * H * S : nullptr;

#pragma omp parallel for schedule(static) if (S >= parallel_min_seqs)
    for (int j = 0; j < H; ++j) {
      const double* pi = preact.data() + static_cast<size_t>(j) * S;
      const double* pf = preact.data() + static_cast<size_t>(H + j) * S;
      const double* pg = preact.data() + static_cast<size_t>(2 * H + j) * S;
      const double* po = preact.data() + static_cast<size_t>(3 * H + j) * S;
      double* gi = gates_t + static_cast<size_t>(j) * S;
      double* gf = gates_t + static_cast<size_t>(H + j) * S;
      double* gg = gates_t + static_cast<size_t>(2 * H + j) * S;
      double* go = gates_t + static_cast<size_t>(3 * H + j) * S;
      double* c = cells_t + static_cast<size_t>(j) * S;
      double* ct = ctanh_t + static_cast<size_t>(j) * S;
      double* h = hidden_t + static_cast<size_t>(j) * S;
      const double* cp = cells_prev ? cells_prev + static_cast<size_t>(j) * S : nullptr;
      for (int s = 0; s < S; ++s) {
        double i = sigmoid(pi[s]);
        double f = sigmoid(pf[s]);
        double g = std::tanh(pg[s]);
        double o = sigmoid(po[s]);
        double cell = i * g + (cp ? f * cp[s] : 0.0);
        double cell_tanh = std::tanh(cell);
        gi[s] = i;
        gf[s] = f;
        gg[s] = g;
        go[s] = o;
        c[s] = cell;
        ct[s] = cell_tanh;
        h[s] = o * cell_tanh;
      }
    }

    // head logits and the 2-class softmax
    double* probs_t = cache.probs.data() + static_cast<size_t>(t) * 2 * S;
#pragma omp parallel for schedule(static) if (S >= parallel_min_seqs)
    for (int s = 0; s < S; ++s) {
      double l0 = col.head_bias[0];
      double l1 = col.head_bias[1];
      const double* w0 = col.head_weights.data();
      const double* w1 = col.head_weights.data() + H;
      for (int j = 0; j < H; ++j) {
        double h = hidden_t[static_cast<size_t>(j) * S + s];
        l0 += w0[j] * h;
        l1 += w1[j] * h;
      }
      double m = l0 > l1 ? l0 : l1;
      double e0 = std::exp(l0 - m);
      double e1 = std::exp(l1 - m);
      double z = e0 + e1;
      probs_t[s] = e0 / z;
      probs_t[S + s] = e1 / z;
    }
  }
}

double mean_cross_entropy(const ForwardCache& cache, const std::uint8_t* labels) {
  const int S = cache.seqs;
  const int W = cache.steps;
  double total = 0.0;
  for (int t = 0; t < W; ++t) {
    const double* probs_t = cache.probs.data() + static_cast<size_t>(t) * 2 * S;
    for (int s = 0; s < S; ++s) {
      double p = labels[static_cast<size_t>(s) * W + t] ? probs_t[S + s] : probs_t[s];
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

  // dL/dlogits for every step; softmax + cross-entropy collapse to
  // (p - onehot) * scale
  std::vector<double> dlogits(static_cast<size_t>(W) * 2 * S);
  for (int t = 0; t < W; ++t) {
    const double* probs_t = cache.probs.data() + static_cast<size_t>(t) * 2 * S;
    double* dl_t = dlogits.data() + static_cast<size_t>(t) * 2 * S;
    for (int s = 0; s < S; ++s) {
      int y = labels[static_cast<size_t>(s) * W + t];
      dl_t[s] = (probs_t[s] - (y == 0 ? 1.0 : 0.0)) * scale;
      dl_t[S + s] = (probs_t[S + s] - (y == 1 ? 1.0 : 0.0)) * scale;
    }
  }

  // head parameter gradients
#pragma omp parallel for schedule(static) if (S >= parallel_min_seqs)
  for (int rj = 0; rj < 2 * H; ++rj) {
    int r = rj / H;
    int j = rj % H;
    double acc = 0.0;
    for (int t = 0; t < W; ++t) {
      const double* dl = dlogits.data() + (static_cast<size_t>(t) * 2 + r) * S;
      const double* h = cache.hidden.data() + (static_cast<size_t>(t) * H + j) * S;
      for (int s = 0; s < S; ++s) acc += dl[s] * h[s];
    }
    grads.head_weights[static_cast<size_t>(r) * H + j] = acc;
  }
  for (int r = 0; r < 2; ++r) {
    double acc = 0.0;
    for (int t = 0; t < W; ++t) {
      const double* dl = dlogits.data() + (static_cast<size_t>(t) * 2 + r) * S;
      for (int s = 0; s < S; ++s) acc += dl[s];
    }
    grads.head_bias[r] = acc;
  }

  // transposed recurrent matrix once, for a contiguous carry update
  std::vector<double> rec_t(static_cast<size_t>(H) * 4 * H);
  for (int r = 0; r < 4 * H; ++r) {
    for (int j = 0; j < H; ++j) rec_t[static_cast<size_t>(j) * 4 * H + r] = col.recurrent_weights[static_cast<size_t>(r) * H + j];
  }

  // pre-activation gradients for all steps, filled walking t backwards
  std::vector<double> dz(static_cast<size_t>(W) * 4 * H * S);
  std::vector<double> dh_carry(static_cast<size_t>(H) * S, 0.0);
  std::vector<double> dc_carry(static_cast<size_t>(H) * S, 0.0);

  for (int t = W - 1; t >= 0; --t) {
    const double* gates_t = cache.gates.data() + static_cast<size_t>(t) * 4 * H * S;
    const double* ctanh_t = cache.cell_tanh.data() + static_cast<size_t>(t) * H * S;
    const double* cells_prev = t > 0 ? cache.cells.data() + static_cast<size_t>(t - 1) * H * S : nullptr;
    double* dz_t = dz.data() + static_cast<size_t>(t) * 4 * H * S;

#pragma omp parallel for schedule(static) if (S >= parallel_min_seqs)
    for (int j = 0; j < H; ++j) {
      const double* gi = gates_t + static_cast<size_t>(j) * S;
      const double* gf = gates_t + static_cast<size_t>(H + j) * S;
      const double* gg = gates_t + static_cast<size_t>(2 * H + j) * S;
      const double* go = gates_t + static_cast<size_t>(3 * H + j) * S;
      const double* ct = ctanh_t + static_cast<size_t>(j) * S;
      const double* cp = cells_prev ? cells_prev + static_cast<size_t>(j) * S : nullptr;
      const double* dl0 = dlogits.data() + static_cast<size_t>(t) * 2 * S;
      const double* dl1 = dl0 + S;
      double w0 = col.head_weights[j];
      double w1 = col.head_weights[static_cast<size_t>(H) + j];
      double* dzi = dz_t + static_cast<size_t>(j) * S;
      double* dzf = dz_t + static_cast<size_t>(H + j) * S;
      double* dzg = dz_t + static_cast<size_t>(2 * H + j) * S;
      double* dzo = dz_t + static_cast<size_t>(3 * H + j) * S;
      double* dhc = dh_carry.data() + static_cast<size_t>(j) * S;
      double* dcc = dc_carry.data() + static_cast<size_t>(j) * S;
      for (int s = 0; s < S; ++s) {
        double dh = dhc[s] + w0 * dl0[s] + w1 * dl1[s];
        double o = go[s];
        double tc = ct[s];
        double dout = dh * tc;
        double dcell = dh * o * (1.0 - tc * tc) + dcc[s];
        double i = gi[s];
        double f = gf[s];
        double g = gg[s];
        dzi[s] = dcell * g * i * (1.0 - i);
        dzf[s] = cp ? dcell * cp[s] * f * (1.0 - f) : 0.0;
        dzg[s] = dcell * i * (1.0 - g * g);
        dzo[s] = dout * o * (1.0 - o);
        dcc[s] = dcell * f;  // flows to c_{t-1}
      }
    }

    // dh_{t-1} = Wh^T . dz_t replaces the carry for the next iteration
    if (t > 0) {
#pragma omp parallel for schedule(static) if (S >= parallel_min_seqs)
      for (int j = 0; j < H; ++j) {
        double* dhc = dh_carry.data() + static_cast<size_t>(j) * S;
        for (int s = 0; s < S; ++s) dhc[s] = 0.0;
        const double* wr = rec_t.data() + static_cast<size_t>(j) * 4 * H;
        for (int r = 0; r < 4 * H; ++r) {
          double w = wr[r];
          const double* z = dz_t + static_cast<size_t>(r) * S;
          for (int s = 0; s < S; ++s) dhc[s] += w * z[s];
        }
      }
    }
  }

  // parameter gradients from the collected pre-activation gradients
#pragma omp parallel for schedule(static) if (S >= parallel_min_seqs)
  for (int r = 0; r < 4 * H; ++r) {
    double* gw = grads.gate_weights.data() + static_cast<size_t>(r) * D;
    for (int t = 0; t < W; ++t) {
      const double* z = dz.data() + (static_cast<size_t>(t) * 4 * H + r) * S;
      for (int k = 0; k < D; ++k) {
        const double* x = cache.inputs.data() + (static_cast<size_t>(t) * D + k) * S;
        double acc = 0.0;
        for (int s = 0; s < S; ++s) acc += z[s] * x[s];
        gw[k] += acc;
      }
    }
    double* rw = grads.recurrent_weights.data() + static_cast<size_t>(r) * H;
    for (int t = 1; t < W; ++t) {
      const double* z = dz.data() + (static_cast<size_t>(t) * 4 * H + r) * S;
      for (int j = 0; j < H; ++j) {
        const double* h = cache.hidden.data() + (static_cast<size_t>(t - 1) * H + j) * S;
        double acc = 0.0;
        for (int s = 0; s < S; ++s) acc += z[s] * h[s];
        rw[j] += acc;
      }
    }
    double acc = 0.0;
    for (int t = 0; t < W; ++t) {
      const double* z = dz.data() + (static_cast<size_t>(t) * 4 * H + r) * S;
      for (int s = 0; s < S; ++s) acc += z[s];
    }
    grads.gate_bias[r] = acc;
  }

  if (want_input_grads) {
    for (int t = 0; t < W; ++t) {
      const double* dz_t = dz.data() + static_cast<size_t>(t) * 4 * H * S;
      double* dx_t = grads.inputs.data() + static_cast<size_t>(t) * D * S;
#pragma omp parallel for schedule(static) if (S >= parallel_min_seqs)
      for (int k = 0; k < D; ++k) {
        double* dx = dx_t + static_cast<size_t>(k) * S;
        for (int r = 0; r < 4 * H; ++r) {
          double w = col.gate_weights[static_cast<size_t>(r) * D + k];
          const double* z = dz_t + static_cast<size_t>(r) * S;
          for (int s = 0; s < S; ++s) dx[s] += w * z[s];
        }
      }
    }
  }
}

void sgd_step(LstmColumn& col, const LstmGrads& grads, double lr) {
  if (col.frozen) throw std::logic_error("sgd_step on a frozen column");
  auto update = [lr](std::vector<double>& p, const std::vector<double>& g) {
    for (size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  };
  update(col.gate_weights, grads.gate_weights);
  update(col.recurrent_weights, grads.recurrent_weights);
  update(col.gate_bias, grads.gate_bias);
  update(col.head_weights, grads.head_weights);
  update(col.head_bias, grads.head_bias);
}

ForwardCache forward(const LstmColumn& col, const double* seq, int steps) {
  // with a single sequence the (steps, D) layout and the time-major
  // (steps, D, 1) layout coincide
  std::vector<double> inputs(seq, seq + static_cast<size_t>(steps) * col.input_dim);
  ForwardCache cache;
  forward_batch(col, std::move(inputs), steps, 1, cache);
  return cache;
}

void save_column(std::ostream& out, const LstmColumn& col) {
  out << "input_dim,hidden_dim,frozen\n"
      << col.input_dim << ',' << col.hidden_dim << ',' << (col.frozen ? 1 : 0) << '\n';
  char buf[64];
  auto dump = [&](const std::vector<double>& v) {
    for (double x : v) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", x);
      out << buf;
    }
  };
  dump(col.gate_weights);
  dump(col.recurrent_weights);
  dump(col.gate_bias);
  dump(col.head_weights);
  dump(col.head_bias);
}

LstmColumn load_column(std::istream& in) {
  std::string line;
  std::getline(in, line);  // header
  std::getline(in, line);
  LstmColumn col;
  int frozen = 0;
  if (std::sscanf(line.c_str(), "%d,%d,%d", &col.input_dim, &col.hidden_dim, &frozen) != 3) {
    throw std::runtime_error("bad column snapshot header");
  }
  col.frozen = frozen != 0;
  int H = col.hidden_dim;
  int D = col.input_dim;
  auto read = [&](std::vector<double>& v, size_t n) {
    v.resize(n);
    for (double& x : v) {
      if (!std::getline(in, line)) throw std::runtime_error("truncated column snapshot");
      x = std::strtod(line.c_str(), nullptr);
    }
  };
  read(col.gate_weights, static_cast<size_t>(4) * H * D);
  read(col.recurrent_weights, static_cast<size_t>(4) * H * H);
  read(col.gate_bias, static_cast<size_t>(4) * H);
  read(col.head_weights, static_cast<size_t>(2) * H);
  read(col.head_bias, 2);
  return col;
}

}  // namespace cpnn
