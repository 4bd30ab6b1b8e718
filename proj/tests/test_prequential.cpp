#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cpnn/prequential.hpp"
#include "cpnn/progressive.hpp"
#include "cpnn/rng.hpp"
#include "cpnn/windowing.hpp"

using namespace cpnn;

namespace {

// synthetic points; the labels are arbitrary, the loop mechanics under
// test do not care whether they are learnable
std::vector<LabeledPoint> synth(int n, int concept_id, Rng& rng) {
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < n; ++i) {
    pts.push_back({rng.uniform(), rng.uniform(), rng.uniform() < 0.5 ? 0 : 1, concept_id});
  }
  return pts;
}

RunParams quick_params() {
  RunParams p;
  p.epochs = 3;
  return p;
}

}  // namespace

TEST_CASE("a 256-point concept yields two full-batch records") {
  Rng rng(1);
  auto stream = synth(256, 1, rng);
  ProgressiveNet net(Mode::cpnn, 8, 5);
  auto records = run_stream(net, stream, quick_params());
  REQUIRE(records.size() == 2);
  CHECK(records[0].concept_id == 1);
  CHECK(records[0].batch_index == 1);
  CHECK(records[0].n_points == 128);
  CHECK(records[1].batch_index == 2);
  CHECK(records[1].n_points == 128);
  for (const auto& r : records) {
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
  }
  CHECK(net.column_count() == 1);  // no drift, no new column
}

TEST_CASE("the loop is evaluate-then-train, batch by batch") {
  // replay the exact protocol by hand on a twin network and compare
  Rng rng(2);
  auto stream = synth(256, 1, rng);
  RunParams params = quick_params();

  ProgressiveNet net(Mode::cpnn, 8, 9);
  auto records = run_stream(net, stream, params);
  REQUIRE(records.size() == 2);

  ProgressiveNet twin(Mode::cpnn, 8, 9);
  for (int b = 0; b < 2; ++b) {
    std::vector<LabeledPoint> batch(stream.begin() + b * 128, stream.begin() + (b + 1) * 128);
    auto sb = build_sequences(std::move(batch), params.window);
    auto preds = twin.predict_points(sb);
    int correct = 0;
    for (int t = 0; t < sb.length(); ++t) {
      if (preds.labels[t] == sb.points[t].label) ++correct;
    }
    CHECK(records[b].accuracy == correct / 128.0);
    twin.fit(sb, params.epochs, params.lr);
  }
}

TEST_CASE("a drift flushes the buffer and adds a column") {
  // concept 1: one full batch plus 5 leftovers (dropped, below the
  // window); concept 2: the triggering point plus 139 more
  Rng rng(3);
  auto stream = synth(133, 1, rng);
  auto part2 = synth(140, 2, rng);
  stream.insert(stream.end(), part2.begin(), part2.end());

  ProgressiveNet net(Mode::cpnn, 8, 7);
  auto records = run_stream(net, stream, quick_params());

  REQUIRE(records.size() == 3);
  CHECK(records[0].concept_id == 1);
  CHECK(records[0].batch_index == 1);
  CHECK(records[0].n_points == 128);
  // batch numbering restarts with the new concept
  CHECK(records[1].concept_id == 2);
  CHECK(records[1].batch_index == 1);
  CHECK(records[1].n_points == 128);
  // terminal leftover of 12 points still clears the window length
  CHECK(records[2].concept_id == 2);
  CHECK(records[2].batch_index == 2);
  CHECK(records[2].n_points == 12);

  CHECK(net.column_count() == 2);
}

TEST_CASE("a drift leftover of at least one window is evaluated and trained") {
  Rng rng(4);
  auto stream = synth(150, 1, rng);  // 128 + 22 leftover at the drift
  auto part2 = synth(128, 2, rng);
  stream.insert(stream.end(), part2.begin(), part2.end());

  ProgressiveNet net(Mode::mclstm, 8, 7);
  auto records = run_stream(net, stream, quick_params());
  REQUIRE(records.size() == 3);
  CHECK(records[1].concept_id == 1);
  CHECK(records[1].batch_index == 2);
  CHECK(records[1].n_points == 22);
  CHECK(records[2].concept_id == 2);
  CHECK(records[2].batch_index == 1);
}

TEST_CASE("undersized leftovers are dropped at the end of the stream") {
  Rng rng(5);
  auto stream = synth(135, 1, rng);  // 128 + 7, and 7 < window
  ProgressiveNet net(Mode::clstm, 8, 3);
  auto records = run_stream(net, stream, quick_params());
  REQUIRE(records.size() == 1);
  CHECK(records[0].n_points == 128);
}

TEST_CASE("a concept too short to window at all leaves no record") {
  Rng rng(6);
  auto stream = synth(8, 1, rng);
  auto part2 = synth(20, 2, rng);
  stream.insert(stream.end(), part2.begin(), part2.end());

  ProgressiveNet net(Mode::cpnn, 8, 11);
  auto records = run_stream(net, stream, quick_params());
  REQUIRE(records.size() == 1);
  CHECK(records[0].concept_id == 2);
  CHECK(records[0].batch_index == 1);
  CHECK(records[0].n_points == 20);
  CHECK(net.column_count() == 2);  // the drift still registered
}

TEST_CASE("an empty stream is a no-op") {
  ProgressiveNet net(Mode::cpnn, 8, 1);
  auto records = run_stream(net, {}, quick_params());
  CHECK(records.empty());
  CHECK(net.column_count() == 1);
}

TEST_CASE("a concept reappearing after its drift is rejected") {
  Rng rng(7);
  auto stream = synth(3, 1, rng);
  auto part2 = synth(3, 2, rng);
  auto part3 = synth(3, 1, rng);  // back to concept 1: not abrupt
  stream.insert(stream.end(), part2.begin(), part2.end());
  stream.insert(stream.end(), part3.begin(), part3.end());

  ProgressiveNet net(Mode::cpnn, 8, 1);
  CHECK_THROWS_AS(run_stream(net, stream, quick_params()), std::invalid_argument);
}

TEST_CASE("case ranges slice the batch indices as documented") {
  std::vector<BatchRecord> records;
  for (int i = 1; i <= 120; ++i) records.push_back({1, i, 128, i / 1000.0});
  records.push_back({2, 1, 128, 0.9});  // another concept, must not leak in

  CHECK(*case_accuracy(records, 1, CaseId::first50) == doctest::Approx(0.0255).epsilon(1e-13));
  CHECK(*case_accuracy(records, 1, CaseId::first100) == doctest::Approx(0.0505).epsilon(1e-13));
  CHECK(*case_accuracy(records, 1, CaseId::after100) == doctest::Approx(0.1105).epsilon(1e-13));
  CHECK(*case_accuracy(records, 1, CaseId::whole) == doctest::Approx(0.0605).epsilon(1e-13));
  CHECK(*case_accuracy(records, 2, CaseId::whole) == 0.9);
}

TEST_CASE("empty case ranges give no value") {
  std::vector<BatchRecord> records;
  for (int i = 1; i <= 60; ++i) records.push_back({1, i, 128, 0.5});
  CHECK_FALSE(case_accuracy(records, 1, CaseId::after100).has_value());
  CHECK_FALSE(case_accuracy(records, 3, CaseId::whole).has_value());
  CHECK(case_accuracy(records, 1, CaseId::first50).has_value());
  CHECK(case_accuracy({}, 1, CaseId::whole) == std::nullopt);
}

TEST_CASE("the whole case is the plain mean over the concept's records") {
  Rng rng(8);
  auto stream = synth(500, 1, rng);
  ProgressiveNet net(Mode::clstm, 8, 13);
  auto records = run_stream(net, stream, quick_params());
  double total = 0.0;
  for (const auto& r : records) total += r.accuracy;
  CHECK(*case_accuracy(records, 1, CaseId::whole) ==
        doctest::Approx(total / records.size()).epsilon(1e-15));
}

TEST_CASE("aggregate_runs: textbook mean and sample deviation") {
  std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  auto ms = aggregate_runs(v);
  CHECK(ms.mean == 2.5);
  CHECK(ms.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));

  std::vector<double> one = {0.7};
  CHECK(aggregate_runs(one).mean == 0.7);
  CHECK(aggregate_runs(one).std == 0.0);

  CHECK(aggregate_runs({}).mean == 0.0);
  CHECK(aggregate_runs({}).std == 0.0);
}
