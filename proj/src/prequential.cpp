#include "cpnn/prequential.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "cpnn/errors.hpp"
#include "cpnn/windowing.hpp"

namespace cpnn {

const char* case_name(CaseId c) {
  switch (c) {
    case CaseId::first50: return "first50";
    case CaseId::first100: return "first100";
    case CaseId::after100: return "after100";
    case CaseId::whole: return "whole";
  }
  return "?";
}

namespace {

bool case_contains(CaseId c, int batch_index) {
  switch (c) {
    case CaseId::first50: return batch_index <= 50;
    case CaseId::first100: return batch_index <= 100;
    case CaseId::after100: return batch_index > 100;
    case CaseId::whole: return true;
  }
  return false;
}

}  // namespace

std::vector<BatchRecord> run_stream(ProgressiveNet& net, std::span<const LabeledPoint> stream,
                                    const RunParams& params) {
  std::vector<BatchRecord> records;
  if (stream.empty()) return records;

  BatchBuffer buffer(params.batch_size);
  int current = stream.front().concept_id;
  int batch_index = 0;
  std::set<int> finished;

  // evaluate-then-train on one flushed batch; undersized batches are
  // dropped untouched
  auto process = [&](std::vector<LabeledPoint> batch) {
    if (static_cast<int>(batch.size()) < params.window) return;
    SequenceBatch sb = build_sequences(std::move(batch), params.window);
    PointPredictions preds = net.predict_points(sb);
    int correct = 0;
    for (int t = 0; t < sb.length(); ++t) {
      if (preds.labels[t] == sb.points[t].label) ++correct;
    }
    BatchRecord rec;
    rec.concept_id = current;
    rec.batch_index = ++batch_index;
    rec.n_points = sb.length();
    rec.accuracy = static_cast<double>(correct) / sb.length();
    records.push_back(rec);
    double loss = net.fit(sb, params.epochs, params.lr);
    if (!std::isfinite(loss)) {
      throw NumericalError("non-finite loss in concept " + std::to_string(current) + " batch " +
                           std::to_string(rec.batch_index));
    }
  };

  for (const LabeledPoint& p : stream) {
    if (p.concept_id != current) {
      if (finished.contains(p.concept_id)) {
        throw std::invalid_argument("concept " + std::to_string(p.concept_id) +
                                    " reappears; drifts must be abrupt");
      }
      process(buffer.take());
      finished.insert(current);
      current = p.concept_id;
      batch_index = 0;
      net.add_column();
    }
    if (buffer.push(p)) process(buffer.take());
  }
  process(buffer.take());
  return records;
}

std::optional<double> case_accuracy(std::span<const BatchRecord> records, int concept_id,
                                    CaseId c) {
  double total = 0.0;
  int n = 0;
  for (const BatchRecord& r : records) {
    if (r.concept_id == concept_id && case_contains(c, r.batch_index)) {
      total += r.accuracy;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / n;
}

MeanStd aggregate_runs(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (values.size() - 1));
  }
  return out;
}

}  // namespace cpnn
