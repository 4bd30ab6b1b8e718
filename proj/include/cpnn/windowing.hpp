#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cpnn/streamgen.hpp"

namespace cpnn {

// All overlapping length-W windows over a batch of L consecutive points,
// materialized once into dense tensors.  Window s covers points
// [s, s + W); there are L - W + 1 of them.  Point t belongs to windows
// s in [first_window(t), last_window(t)].
//
// features has shape (count, W, 2) row-major: window s occupies the
// contiguous slice features[s*W*2 .. (s+1)*W*2), so a window is exactly a
// slice of the batch's coordinates.  labels has shape (count, W).
struct SequenceBatch {
  std::vector<LabeledPoint> points;
  int window = 0;
  std::vector<double> features;
  std::vector<std::uint8_t> labels;

  int length() const { return static_cast<int>(points.size()); }
  int count() const { return length() - window + 1; }

  const double* window_features(int s) const { return features.data() + static_cast<size_t>(s) * window * 2; }

  int first_window(int t) const {
    int s = t - window + 1;
    return s > 0 ? s : 0;
  }
  int last_window(int t) const {
    int last = count() - 1;
    return t < last ? t : last;
  }
};

// Materializes the windows over one batch of consecutive points.
// Throws std::invalid_argument when the batch is shorter than the window;
// callers drop such batches instead of training on them.
SequenceBatch build_sequences(std::vector<LabeledPoint> batch, int window);

// Fixed-capacity accumulation buffer for the prequential loop.
class BatchBuffer {
 public:
  explicit BatchBuffer(int capacity) : capacity_(capacity) {}

  // returns true when the buffer just became full
  bool push(const LabeledPoint& p) {
    points_.push_back(p);
    return static_cast<int>(points_.size()) >= capacity_;
  }

  int size() const { return static_cast<int>(points_.size()); }
  int capacity() const { return capacity_; }
  bool full() const { return size() >= capacity_; }
  const std::vector<LabeledPoint>& points() const { return points_; }

  // hands the contents over and leaves the buffer empty
  std::vector<LabeledPoint> take() {
    std::vector<LabeledPoint> out;
    out.swap(points_);
    return out;
  }

  void clear() { points_.clear(); }

 private:
  int capacity_;
  std::vector<LabeledPoint> points_;
};

}  // namespace cpnn
