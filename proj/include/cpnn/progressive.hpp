#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cpnn/lstm.hpp"
#include "cpnn/windowing.hpp"

namespace cpnn {

// Which architecture variant a network runs as:
//   cpnn    adds a column per drift, each new column also consumes the
//           previous column's hidden state (lateral connections);
//   mclstm  adds a column per drift but without laterals, so every column
//           sees only the raw 2 features;
//   clstm   keeps a single column forever and ignores drifts.
enum class Mode { cpnn, mclstm, clstm };

Mode parse_mode(std::string_view token);
std::string mode_name(Mode mode);

struct PointPredictions {
  std::vector<double> probs;         // L x 2, row-major
  std::vector<std::uint8_t> labels;  // L
};

class ProgressiveNet {
 public:
  // Builds the first column immediately; all randomness (initial weights,
  // columns added later) flows from this seed.
  ProgressiveNet(Mode mode, int hidden_dim, std::uint64_t seed);

  // Reaction to a signaled drift.  clstm ignores it; the other modes
  // freeze the current last column and append a fresh one (input width
  // 2 + H for cpnn, 2 for mclstm).
  void add_column();

  Mode mode() const { return mode_; }
  int hidden_dim() const { return hidden_; }
  int column_count() const { return static_cast<int>(columns_.size()); }
  const LstmColumn& column(int k) const { return columns_[k]; }

  // Per-step class probabilities (steps x 2) for one raw 2-feature
  // sequence (row-major steps x 2).  Runs the full column cascade: column
  // 0 consumes the raw features, each later cpnn column consumes the
  // per-step concatenation of the raw features with its predecessor's
  // hidden states from this same pass, and the last column's head is the
  // network output.
  std::vector<double> forward_sequence(const double* seq, int steps) const;

  // Per-point predictions over a batch: each point's probability vector is
  // the average over every (window, offset) occurrence of that point, and
  // the label is the argmax with ties going to class 1.
  PointPredictions predict_points(const SequenceBatch& sb) const;

  // E full-batch SGD steps on the last column (frozen columns provide
  // activations but receive no updates).  Returns the mean loss computed
  // by the final epoch's forward pass.
  double fit(const SequenceBatch& sb, int epochs, double lr);

 private:
  // Time-major input tensor for the last column: raw features, with the
  // frozen cascade's hidden states appended when laterals are in play.
  std::vector<double> last_column_inputs(const double* seq_major, int seqs, int steps) const;

  Mode mode_;
  int hidden_;
  Rng rng_;
  std::vector<LstmColumn> columns_;
};

}  // namespace cpnn
