#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cpnn/progressive.hpp"
#include "cpnn/streamgen.hpp"

namespace cpnn {

// Accuracy of one batch, measured before the batch was trained on.
struct BatchRecord {
  int concept_id = 0;
  int batch_index = 0;  // 1-based, consecutive within each concept
  int n_points = 0;
  double accuracy = 0.0;
};

// Per-concept evaluation windows over batch indices.
enum class CaseId { first50, first100, after100, whole };

constexpr CaseId all_cases[] = {CaseId::first50, CaseId::first100, CaseId::after100,
                                CaseId::whole};

const char* case_name(CaseId c);

struct RunParams {
  int batch_size = 128;
  int window = 10;
  int epochs = 10;
  double lr = 0.1;
};

// The prequential loop: buffer same-concept points; once the buffer is
// full or a drift (concept change) arrives, and the buffered batch has at
// least `window` points, materialize its sliding windows, record the
// accuracy of the not-yet-trained network on all buffered points, then
// train for `epochs` full-batch steps and clear the buffer.  Undersized
// batches are dropped untrained and unevaluated.  On a drift the network
// is told to add a column before the new concept's first point is
// buffered.  A terminal leftover batch is processed the same way.
//
// Throws std::invalid_argument if a concept id reappears after a drift
// (drifts must be abrupt), NumericalError if a loss turns non-finite.
std::vector<BatchRecord> run_stream(ProgressiveNet& net, std::span<const LabeledPoint> stream,
                                    const RunParams& params);

// Unweighted mean of record accuracies for one concept over the case's
// batch-index range ([1,50], [1,100], (100,..) or all); empty range gives
// nothing.
std::optional<double> case_accuracy(std::span<const BatchRecord> records, int concept_id,
                                    CaseId c);

// Sample mean and standard deviation (denominator n-1) over per-seed
// accuracies.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd aggregate_runs(std::span<const double> values);

}  // namespace cpnn
