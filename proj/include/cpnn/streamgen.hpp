#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpnn/rng.hpp"

namespace cpnn {

struct LabeledPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  int label = 0;       // 0 or 1
  int concept_id = 0;  // index of the generating concept within the scenario
};

enum class Boundary { s1, s2 };

// A concept's labeling rule.  The boundary curve gives, for each x2, the
// x1 value where the label flips; "plus" labels the region on or above the
// curve with 1, "minus" inverts that.
struct ClassificationFn {
  Boundary boundary = Boundary::s1;
  bool plus = true;

  // x1 coordinate of the decision curve at x2
  double boundary_value(double x2) const;
  int classify(double x1, double x2) const;

  bool operator==(const ClassificationFn&) const = default;
};

// Token grammar: "s1+", "s1-", "s2+", "s2-" (case-insensitive).
ClassificationFn parse_classification_fn(std::string_view token);
std::string fn_token(const ClassificationFn& fn);

// Comma-separated list of tokens, e.g. "s1+,s2-,s1-".
std::vector<ClassificationFn> parse_scenario(std::string_view text);
std::string scenario_token(std::span<const ClassificationFn> fns);

struct WalkConfig {
  double step_max = 0.07;  // steps are drawn uniformly from (0, step_max)
  int max_run = 10;        // longest allowed run of identical labels
  std::uint64_t seed = 1;
};

struct DriftScenario {
  std::vector<ClassificationFn> concepts;
  int points_per_concept = 50000;
};

// One random-walk step from prev, kept strictly inside (0, 1).  The step
// size is drawn first; the direction is a fair coin unless one side would
// leave the interval, in which case the feasible side is taken.  A step
// too large for either side (possible only when step_max is close to 1)
// is redrawn.
double random_walk_next(double prev, const WalkConfig& cfg, Rng& rng);

// Generates n autocorrelated points labeled by fn.  Both coordinates
// perform independent random walks; when accepting the next point would
// extend a same-label run beyond cfg.max_run, the point is resampled until
// the label flips, and if that fails the x1 coordinate is reflected across
// the boundary.  `start` continues an existing walk (the first emitted
// point is one step away from it); without it the walk starts at a uniform
// point in the unit square.
std::vector<LabeledPoint> generate_concept(const ClassificationFn& fn, int n,
                                           const WalkConfig& cfg, Rng& rng,
                                           std::optional<std::array<double, 2>> start = {});

// Concatenates one generated stream per concept.  Each concept draws from
// its own RNG derived from cfg.seed, and the walk itself is continuous
// across the drift: concept k starts one step away from the last point of
// concept k-1.  concept_id is the concept's 1-based position, the same
// numbering the output files and the report use.
std::vector<LabeledPoint> generate_scenario(const DriftScenario& scenario,
                                            const WalkConfig& cfg);

// CSV with header "x1,x2,y,concept"; coordinates are written with enough
// digits to round-trip exactly.
void write_stream_csv(std::ostream& out, std::span<const LabeledPoint> stream);

}  // namespace cpnn
