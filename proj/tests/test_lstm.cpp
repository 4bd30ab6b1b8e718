#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cpnn/lstm.hpp"
#include "cpnn/rng.hpp"

using namespace cpnn;

namespace {

// scalar LSTM (D=1, H=1) with every gate weight set to wx on the input
// and wr on the recurrent path; keeps the hand computation tractable
LstmColumn scalar_column(double wx, double wr) {
  LstmColumn col;
  col.input_dim = 1;
  col.hidden_dim = 1;
  col.gate_weights.assign(4, wx);
  col.recurrent_weights.assign(4, wr);
  col.gate_bias.assign(4, 0.0);
  col.head_weights = {1.0, -1.0};
  col.head_bias = {0.0, 0.0};
  return col;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

// central finite differences on every parameter of a copy of the column
double loss_at(LstmColumn col, const std::vector<double>& inputs, int steps, int seqs,
               const std::vector<std::uint8_t>& labels) {
  ForwardCache cache;
  forward_batch(col, inputs, steps, seqs, cache);
  return mean_cross_entropy(cache, labels.data());
}

void check_grads_against_fd(const LstmColumn& col, const std::vector<double>& inputs, int steps,
                            int seqs, const std::vector<std::uint8_t>& labels) {
  ForwardCache cache;
  forward_batch(col, inputs, steps, seqs, cache);
  LstmGrads grads;
  backward_batch(col, cache, labels.data(), grads, true);

  const double eps = 1e-5;
  auto probe = [&](std::vector<double> LstmColumn::* member, const std::vector<double>& analytic) {
    LstmColumn work = col;
    auto& params = work.*member;
    for (size_t i = 0; i < params.size(); ++i) {
      double keep = params[i];
      params[i] = keep + eps;
      double up = loss_at(work, inputs, steps, seqs, labels);
      params[i] = keep - eps;
      double down = loss_at(work, inputs, steps, seqs, labels);
      params[i] = keep;
      double fd = (up - down) / (2.0 * eps);
      CHECK(rel_err(fd, analytic[i]) < 1e-4);
    }
  };
  probe(&LstmColumn::gate_weights, grads.gate_weights);
  probe(&LstmColumn::recurrent_weights, grads.recurrent_weights);
  probe(&LstmColumn::gate_bias, grads.gate_bias);
  probe(&LstmColumn::head_weights, grads.head_weights);
  probe(&LstmColumn::head_bias, grads.head_bias);

  // input gradients the same way
  std::vector<double> work = inputs;
  for (size_t i = 0; i < work.size(); ++i) {
    double keep = work[i];
    work[i] = keep + eps;
    double up = loss_at(col, work, steps, seqs, labels);
    work[i] = keep - eps;
    double down = loss_at(col, work, steps, seqs, labels);
    work[i] = keep;
    double fd = (up - down) / (2.0 * eps);
    CHECK(rel_err(fd, grads.inputs[i]) < 1e-4);
  }
}

struct RandomProblem {
  LstmColumn col;
  std::vector<double> inputs;  // time-major steps x D x seqs
  std::vector<std::uint8_t> labels;
  int steps, seqs;
};

RandomProblem random_problem(int D, int H, int steps, int seqs, std::uint64_t seed) {
  Rng rng(seed);
  RandomProblem p;
  p.col = init_column(D, H, rng);
  for (double& b : p.col.gate_bias) b = rng.uniform(-0.2, 0.2);
  for (double& b : p.col.head_bias) b = rng.uniform(-0.2, 0.2);
  p.steps = steps;
  p.seqs = seqs;
  p.inputs.resize(static_cast<size_t>(steps) * D * seqs);
  for (double& x : p.inputs) x = rng.uniform(-1.0, 1.0);
  p.labels.resize(static_cast<size_t>(seqs) * steps);
  for (auto& y : p.labels) y = rng.uniform() < 0.5 ? 0 : 1;
  return p;
}

}  // namespace

TEST_CASE("parameter count for the experiment geometry") {
  Rng rng(1);
  auto col = init_column(2, 50, rng);
  // 4*50*2 + 4*50*50 + 4*50 + 2*50 + 2
  CHECK(col.param_count() == 10702);
  auto lateral = init_column(52, 50, rng);
  CHECK(lateral.param_count() == 4 * 50 * 52 + 4 * 50 * 50 + 4 * 50 + 2 * 50 + 2);
}

TEST_CASE("initialization: weights bounded by 1/sqrt(H), biases zero") {
  Rng rng(2);
  auto col = init_column(2, 50, rng);
  double bound = 1.0 / std::sqrt(50.0);
  double lo = 1.0, hi = -1.0;
  for (double w : col.gate_weights) {
    CHECK(std::abs(w) < bound);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  for (double w : col.recurrent_weights) CHECK(std::abs(w) < bound);
  for (double w : col.head_weights) CHECK(std::abs(w) < bound);
  for (double b : col.gate_bias) CHECK(b == 0.0);
  for (double b : col.head_bias) CHECK(b == 0.0);
  // the draws actually spread over the interval
  CHECK(lo < -0.9 * bound);
  CHECK(hi > 0.9 * bound);
}

TEST_CASE("hand-computed forward pass, no recurrence") {
  // x_t = 1 with unit input weights: every pre-activation is 1, so
  // i = f = o = sigmoid(1), g = tanh(1) at both steps
  auto col = scalar_column(1.0, 0.0);
  double seq[2] = {1.0, 1.0};
  auto cache = forward(col, seq, 2);

  const double sig1 = 0.7310585786300049;
  const double tanh1 = 0.7615941559557649;
  CHECK(cache.gates[0] == doctest::Approx(sig1).epsilon(1e-15));
  CHECK(cache.gates[2] == doctest::Approx(tanh1).epsilon(1e-15));

  // c1 = i*g, h1 = o*tanh(c1); c2 = f*c1 + i*g
  CHECK(cache.cells[0] == doctest::Approx(0.5567699411459397).epsilon(1e-15));
  CHECK(cache.hidden[0] == doctest::Approx(0.36960635293570576).epsilon(1e-15));
  CHECK(cache.cells[1] == doctest::Approx(0.9638013829440019).epsilon(1e-15));
  CHECK(cache.hidden[1] == doctest::Approx(0.5453460789068416).epsilon(1e-15));

  // head (1, -1): logits (h, -h), softmax
  CHECK(cache.probs[0] == doctest::Approx(0.6768236727047662).epsilon(1e-15));
  CHECK(cache.probs[1] == doctest::Approx(0.3231763272952338).epsilon(1e-15));
  CHECK(cache.probs[2] == doctest::Approx(0.7485120370275619).epsilon(1e-15));
}

TEST_CASE("hand-computed forward pass with recurrence") {
  // unit recurrent weights: the second step's pre-activation is 1 + h1
  auto col = scalar_column(1.0, 1.0);
  double seq[2] = {1.0, 1.0};
  auto cache = forward(col, seq, 2);
  CHECK(cache.hidden[0] == doctest::Approx(0.36960635293570576).epsilon(1e-15));
  CHECK(cache.gates[1 * 4 + 0] == doctest::Approx(0.7973165465183031).epsilon(1e-15));
  CHECK(cache.gates[1 * 4 + 2] == doctest::Approx(0.8786024501541461).epsilon(1e-15));
  CHECK(cache.cells[1] == doctest::Approx(1.1444461579991028).epsilon(1e-15));
  CHECK(cache.hidden[1] == doctest::Approx(0.6505352232008134).epsilon(1e-15));
}

TEST_CASE("all-zero column answers (0.5, 0.5) and ln 2 loss") {
  LstmColumn col;
  col.input_dim = 2;
  col.hidden_dim = 3;
  col.gate_weights.assign(4 * 3 * 2, 0.0);
  col.recurrent_weights.assign(4 * 3 * 3, 0.0);
  col.gate_bias.assign(12, 0.0);
  col.head_weights.assign(6, 0.0);
  col.head_bias.assign(2, 0.0);
  std::vector<double> seq = {0.3, 0.7, 0.1, 0.9, 0.5, 0.5};
  auto cache = forward(col, seq.data(), 3);
  for (double p : cache.probs) CHECK(p == 0.5);
  std::vector<std::uint8_t> labels = {0, 1, 1};
  CHECK(mean_cross_entropy(cache, labels.data()) ==
        doctest::Approx(0.6931471805599453).epsilon(1e-15));
}

TEST_CASE("mean cross entropy on crafted probabilities") {
  ForwardCache cache;
  cache.steps = 2;
  cache.seqs = 1;
  // probs layout: steps x 2 x seqs; step 0 (0.9, 0.1), step 1 (0.2, 0.8)
  cache.probs = {0.9, 0.1, 0.2, 0.8};
  std::vector<std::uint8_t> labels = {0, 1};  // right both times
  CHECK(mean_cross_entropy(cache, labels.data()) ==
        doctest::Approx(0.164252033486018).epsilon(1e-15));
  std::vector<std::uint8_t> wrong = {1, 0};
  // -(ln 0.1 + ln 0.2)/2
  CHECK(mean_cross_entropy(cache, wrong.data()) ==
        doctest::Approx(1.9560115027140728).epsilon(1e-14));
}

TEST_CASE("probability clamp keeps the loss finite at p = 0") {
  ForwardCache cache;
  cache.steps = 1;
  cache.seqs = 1;
  cache.probs = {1.0, 0.0};
  std::vector<std::uint8_t> labels = {1};
  double loss = mean_cross_entropy(cache, labels.data());
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("probabilities are a softmax: positive, summing to one") {
  auto p = random_problem(2, 5, 6, 4, 11);
  ForwardCache cache;
  forward_batch(p.col, p.inputs, p.steps, p.seqs, cache);
  for (int t = 0; t < p.steps; ++t) {
    for (int s = 0; s < p.seqs; ++s) {
      double p0 = cache.probs[(static_cast<size_t>(t) * 2) * p.seqs + s];
      double p1 = cache.probs[(static_cast<size_t>(t) * 2 + 1) * p.seqs + s];
      CHECK(p0 > 0.0);
      CHECK(p1 > 0.0);
      CHECK(p0 + p1 == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("to_time_major reorders a small tensor as documented") {
  // 2 sequences x 3 steps x 2 dims, values encode (s, t, d) as s*100+t*10+d
  std::vector<double> seq_major = {0, 1, 10, 11, 20, 21, 100, 101, 110, 111, 120, 121};
  auto tm = to_time_major(seq_major.data(), 2, 3, 2);
  REQUIRE(tm.size() == 12);
  // plane t, row d, column s: tm[(t*2+d)*2+s]
  for (int t = 0; t < 3; ++t) {
    for (int d = 0; d < 2; ++d) {
      for (int s = 0; s < 2; ++s) {
        CHECK(tm[(static_cast<size_t>(t) * 2 + d) * 2 + s] == s * 100 + t * 10 + d);
      }
    }
  }
}

TEST_CASE("batched forward equals running each sequence alone") {
  auto p = random_problem(3, 6, 5, 9, 21);
  ForwardCache batch;
  forward_batch(p.col, p.inputs, p.steps, p.seqs, batch);

  for (int s = 0; s < p.seqs; ++s) {
    // extract sequence s back to (steps, D)
    std::vector<double> one(static_cast<size_t>(p.steps) * 3);
    for (int t = 0; t < p.steps; ++t) {
      for (int d = 0; d < 3; ++d) {
        one[static_cast<size_t>(t) * 3 + d] = p.inputs[(static_cast<size_t>(t) * 3 + d) * p.seqs + s];
      }
    }
    auto single = forward(p.col, one.data(), p.steps);
    for (int t = 0; t < p.steps; ++t) {
      for (int j = 0; j < 6; ++j) {
        CHECK(single.hidden[static_cast<size_t>(t) * 6 + j] ==
              batch.hidden[(static_cast<size_t>(t) * 6 + j) * p.seqs + s]);
      }
      CHECK(single.probs[static_cast<size_t>(t) * 2] ==
            batch.probs[(static_cast<size_t>(t) * 2) * p.seqs + s]);
    }
  }
}

TEST_CASE("parallel kernels match the serial reference") {
  for (std::uint64_t seed : {31ull, 32ull, 33ull}) {
    auto p = random_problem(4, 7, 6, 40, seed);  // 40 sequences: past the OpenMP gate

    ForwardCache fast, ref;
    forward_batch(p.col, p.inputs, p.steps, p.seqs, fast);
    serial::forward_batch(p.col, p.inputs, p.steps, p.seqs, ref);
    REQUIRE(fast.hidden.size() == ref.hidden.size());
    // the two loop shapes contract multiplies differently under -O3, so
    // agreement is to rounding, not bitwise
    for (size_t i = 0; i < fast.hidden.size(); ++i)
      CHECK(rel_err(fast.hidden[i], ref.hidden[i]) < 1e-12);
    for (size_t i = 0; i < fast.probs.size(); ++i)
      CHECK(rel_err(fast.probs[i], ref.probs[i]) < 1e-12);
    for (size_t i = 0; i < fast.cells.size(); ++i)
      CHECK(rel_err(fast.cells[i], ref.cells[i]) < 1e-12);

    double lf = mean_cross_entropy(fast, p.labels.data());
    double lr = serial::mean_cross_entropy(ref, p.labels.data());
    CHECK(lf == doctest::Approx(lr).epsilon(1e-14));

    LstmGrads gf, gr;
    backward_batch(p.col, fast, p.labels.data(), gf, true);
    serial::backward_batch(p.col, ref, p.labels.data(), gr, true);
    // the reductions run in different orders, so compare to rounding noise
    for (size_t i = 0; i < gf.gate_weights.size(); ++i)
      CHECK(rel_err(gf.gate_weights[i], gr.gate_weights[i]) < 1e-12);
    for (size_t i = 0; i < gf.recurrent_weights.size(); ++i)
      CHECK(rel_err(gf.recurrent_weights[i], gr.recurrent_weights[i]) < 1e-12);
    for (size_t i = 0; i < gf.gate_bias.size(); ++i)
      CHECK(rel_err(gf.gate_bias[i], gr.gate_bias[i]) < 1e-12);
    for (size_t i = 0; i < gf.head_weights.size(); ++i)
      CHECK(rel_err(gf.head_weights[i], gr.head_weights[i]) < 1e-12);
    for (size_t i = 0; i < gf.head_bias.size(); ++i)
      CHECK(rel_err(gf.head_bias[i], gr.head_bias[i]) < 1e-12);
    for (size_t i = 0; i < gf.inputs.size(); ++i)
      CHECK(rel_err(gf.inputs[i], gr.inputs[i]) < 1e-12);
  }
}

TEST_CASE("backpropagation matches central finite differences") {
  // small geometries keep the FD sweep fast; the acceptance suite runs
  // the same check over many more seeds
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto p2 = random_problem(2, 3, 4, 3, seed);
    check_grads_against_fd(p2.col, p2.inputs, p2.steps, p2.seqs, p2.labels);
    auto p5 = random_problem(5, 3, 4, 3, seed + 100);
    check_grads_against_fd(p5.col, p5.inputs, p5.steps, p5.seqs, p5.labels);
  }
}

TEST_CASE("sgd step is plain arithmetic") {
  auto col = scalar_column(1.0, 0.5);
  LstmGrads grads;
  grads.gate_weights.assign(4, 0.5);
  grads.recurrent_weights.assign(4, -1.0);
  grads.gate_bias.assign(4, 0.0);
  grads.head_weights = {2.0, 0.0};
  grads.head_bias = {0.0, 4.0};
  sgd_step(col, grads, 0.1);
  CHECK(col.gate_weights[0] == 0.95);
  CHECK(col.recurrent_weights[0] == 0.6);
  CHECK(col.head_weights[0] == 0.8);
  CHECK(col.head_bias[1] == doctest::Approx(-0.4).epsilon(1e-15));
}

TEST_CASE("a frozen column refuses updates") {
  auto col = scalar_column(1.0, 0.0);
  col.frozen = true;
  LstmGrads grads;
  grads.gate_weights.assign(4, 0.0);
  grads.recurrent_weights.assign(4, 0.0);
  grads.gate_bias.assign(4, 0.0);
  grads.head_weights.assign(2, 0.0);
  grads.head_bias.assign(2, 0.0);
  CHECK_THROWS_AS(sgd_step(col, grads, 0.1), std::logic_error);
}

TEST_CASE("training a column on one batch reduces the loss") {
  auto p = random_problem(2, 8, 10, 20, 77);
  ForwardCache cache;
  forward_batch(p.col, p.inputs, p.steps, p.seqs, cache);
  double first = mean_cross_entropy(cache, p.labels.data());
  double last = first;
  for (int epoch = 0; epoch < 10; ++epoch) {
    LstmGrads grads;
    backward_batch(p.col, cache, p.labels.data(), grads, false);
    sgd_step(p.col, grads, 0.5);
    forward_batch(p.col, p.inputs, p.steps, p.seqs, cache);
    last = mean_cross_entropy(cache, p.labels.data());
  }
  CHECK(last < first);
}

TEST_CASE("column snapshots round-trip bitwise") {
  Rng rng(5);
  auto col = init_column(3, 4, rng);
  for (double& b : col.gate_bias) b = rng.uniform(-1, 1);
  col.frozen = true;
  std::stringstream ss;
  save_column(ss, col);
  auto back = load_column(ss);
  CHECK(back.input_dim == 3);
  CHECK(back.hidden_dim == 4);
  CHECK(back.frozen);
  CHECK(back.gate_weights == col.gate_weights);
  CHECK(back.recurrent_weights == col.recurrent_weights);
  CHECK(back.gate_bias == col.gate_bias);
  CHECK(back.head_weights == col.head_weights);
  CHECK(back.head_bias == col.head_bias);
}

TEST_CASE("forward rejects a mis-sized input tensor") {
  auto col = scalar_column(1.0, 0.0);
  ForwardCache cache;
  std::vector<double> bad(5, 0.0);
  CHECK_THROWS_AS(forward_batch(col, bad, 2, 3, cache), std::invalid_argument);
}
