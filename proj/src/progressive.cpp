#include "cpnn/progressive.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <limits>

#include "cpnn/errors.hpp"

namespace cpnn {

namespace {

// Per-step concatenation [X_t, h_t] in time-major planes: for every step,
// the 2 raw feature planes followed by the H hidden planes of the column
// below.  Both sources are plane-contiguous, so this is a pair of copies
// per step.
std::vector<double> concat_lateral(const std::vector<double>& x, const ForwardCache& below,
                                   int steps, int seqs) {
  const int H = below.hidden_dim;
  std::vector<double> out(static_cast<size_t>(steps) * (2 + H) * seqs);
  for (int t = 0; t < steps; ++t) {
    double* dst = out.data() + static_cast<size_t>(t) * (2 + H) * seqs;
    std::memcpy(dst, x.data() + static_cast<size_t>(t) * 2 * seqs, sizeof(double) * 2 * seqs);
    std::memcpy(dst + static_cast<size_t>(2) * seqs,
                below.hidden.data() + static_cast<size_t>(t) * H * seqs, sizeof(double) * H * seqs);
  }
  return out;
}

}  // namespace

Mode parse_mode(std::string_view token) {
  std::string t;
  for (char c : token) {
    if (!std::isspace(static_cast<unsigned char>(c))) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (t == "cpnn") return Mode::cpnn;
  if (t == "mclstm") return Mode::mclstm;
  if (t == "clstm") return Mode::clstm;
  throw ConfigError("unknown mode '" + std::string(token) + "' (expected cpnn, clstm or mclstm)");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::cpnn: return "cpnn";
    case Mode::mclstm: return "mclstm";
    case Mode::clstm: return "clstm";
  }
  return "?";
}

ProgressiveNet::ProgressiveNet(Mode mode, int hidden_dim, std::uint64_t seed)
    : mode_(mode), hidden_(hidden_dim), rng_(seed) {
  columns_.push_back(init_column(2, hidden_, rng_));
}

void ProgressiveNet::add_column() {
  if (mode_ == Mode::clstm) return;
  columns_.back().frozen = true;
  int input_dim = mode_ == Mode::cpnn ? 2 + hidden_ : 2;
  columns_.push_back(init_column(input_dim, hidden_, rng_));
}

std::vector<double> ProgressiveNet::last_column_inputs(const double* seq_major, int seqs,
                                                       int steps) const {
  std::vector<double> x = to_time_major(seq_major, seqs, steps, 2);
  if (mode_ != Mode::cpnn || columns_.size() == 1) return x;
  // run the frozen cascade; only the hidden states of the column directly
  // below the trainable one are needed at the end
  std::vector<double> current = x;
  ForwardCache cache;
  for (size_t k = 0; k + 1 < columns_.size(); ++k) {
    forward_batch(columns_[k], std::move(current), steps, seqs, cache);
    current = concat_lateral(x, cache, steps, seqs);
  }
  return current;
}

std::vector<double> ProgressiveNet::forward_sequence(const double* seq, int steps) const {
  ForwardCache cache;
  forward_batch(columns_.back(), last_column_inputs(seq, 1, steps), steps, 1, cache);
  // with one sequence the cache's probability tensor is already (steps, 2)
  return cache.probs;
}

PointPredictions ProgressiveNet::predict_points(const SequenceBatch& sb) const {
  const int S = sb.count();
  const int W = sb.window;
  const int L = sb.length();
  ForwardCache cache;
  forward_batch(columns_.back(), last_column_inputs(sb.features.data(), S, W), W, S, cache);

  PointPredictions out;
  out.probs.assign(static_cast<size_t>(L) * 2, 0.0);
  out.labels.resize(L);
  for (int t = 0; t < L; ++t) {
    int lo = sb.first_window(t);
    int hi = sb.last_window(t);
    double acc0 = 0.0, acc1 = 0.0;
    for (int s = lo; s <= hi; ++s) {
      int off = t - s;  // the point's timestep within window s
      acc0 += cache.probs[(static_cast<size_t>(off) * 2) * S + s];
      acc1 += cache.probs[(static_cast<size_t>(off) * 2 + 1) * S + s];
    }
    double n = hi - lo + 1;
    out.probs[static_cast<size_t>(t) * 2] = acc0 / n;
    out.probs[static_cast<size_t>(t) * 2 + 1] = acc1 / n;
    out.labels[t] = acc1 >= acc0 ? 1 : 0;  // tie goes to class 1
  }
  return out;
}

double ProgressiveNet::fit(const SequenceBatch& sb, int epochs, double lr) {
  const int S = sb.count();
  const int W = sb.window;
  std::vector<double> inputs = last_column_inputs(sb.features.data(), S, W);
  LstmColumn& col = columns_.back();
  ForwardCache cache;
  LstmGrads grads;
  double loss = std::numeric_limits<double>::quiet_NaN();  // stays NaN when epochs == 0
  for (int e = 0; e < epochs; ++e) {
    forward_batch(col, inputs, W, S, cache);
    loss = mean_cross_entropy(cache, sb.labels.data());
    backward_batch(col, cache, sb.labels.data(), grads, false);
    sgd_step(col, grads, lr);
  }
  return loss;
}

}  // namespace cpnn
