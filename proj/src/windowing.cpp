#include "cpnn/windowing.hpp"

#include <stdexcept>
#include <utility>

namespace cpnn {

SequenceBatch build_sequences(std::vector<LabeledPoint> batch, int window) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  if (static_cast<int>(batch.size()) < window) {
    throw std::invalid_argument("batch of " + std::to_string(batch.size()) +
                                " points is shorter than the window " + std::to_string(window));
  }
  SequenceBatch sb;
  sb.points = std::move(batch);
  sb.window = window;
  int count = sb.count();
  sb.features.resize(static_cast<size_t>(count) * window * 2);
  sb.labels.resize(static_cast<size_t>(count) * window);
  for (int s = 0; s < count; ++s) {
    for (int t = 0; t < window; ++t) {
      const LabeledPoint& p = sb.points[s + t];
      sb.features[(static_cast<size_t>(s) * window + t) * 2 + 0] = p.x1;
      sb.features[(static_cast<size_t>(s) * window + t) * 2 + 1] = p.x2;
      sb.labels[static_cast<size_t>(s) * window + t] = static_cast<std::uint8_t>(p.label);
    }
  }
  return sb;
}

}  // namespace cpnn
