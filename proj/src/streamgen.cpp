#include "cpnn/streamgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "cpnn/errors.hpp"

namespace cpnn {

namespace {

// Reflection factor for the forced label flip: the overshoot past the
// boundary is this fraction of the distance the point had on the old
// side.  Together with the default step_max it was calibrated so that a
// 50k-point stream keeps the documented properties (label balance, most
// runs no longer than 5, lag-1 autocorrelation >= 0.9 per coordinate,
// and 65% +- 5% label agreement between the s1+ and s2+ rules on the same
// walk).  Pulling it toward 1 raises agreement but chops runs short;
// pulling it toward 0 does the opposite.
constexpr double reflect_kappa = 0.4;

// Cap on the nudge used when placing a point just across the boundary.
constexpr double flip_eps_cap = 1e-3;

constexpr int resample_limit = 1000;

// x1 placed just across the boundary from prev_label's side: reflected by
// reflect_kappa, pulled inside (0,1), nudged if rounding put it back on
// the old side.
double forced_flip_x1(const ClassificationFn& fn, int prev_label, double x1_old, double x2) {
  double b = fn.boundary_value(x2);
  double eps = std::min({flip_eps_cap, b / 2.0, (1.0 - b) / 2.0});
  double x1 = b - (x1_old - b) * reflect_kappa;
  x1 = std::clamp(x1, eps, 1.0 - eps);
  if (fn.classify(x1, x2) != prev_label) return x1;
  for (double cand : {b - eps, b + eps}) {
    if (cand > 0.0 && cand < 1.0 && fn.classify(cand, x2) != prev_label) return cand;
  }
  throw GenerationError("cannot place a point across the boundary at x2=" + std::to_string(x2));
}

}  // namespace

double ClassificationFn::boundary_value(double x2) const {
  if (boundary == Boundary::s1) return std::sin(x2);
  return 0.5 + 0.3 * std::sin(3.0 * std::numbers::pi * x2);
}

int ClassificationFn::classify(double x1, double x2) const {
  int above = (x1 - boundary_value(x2)) >= 0.0 ? 1 : 0;
  return plus ? above : 1 - above;
}

ClassificationFn parse_classification_fn(std::string_view token) {
  std::string t;
  for (char c : token) {
    if (!std::isspace(static_cast<unsigned char>(c))) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (t.size() == 3 && t[0] == 's' && (t[1] == '1' || t[1] == '2') && (t[2] == '+' || t[2] == '-')) {
    return ClassificationFn{t[1] == '1' ? Boundary::s1 : Boundary::s2, t[2] == '+'};
  }
  throw ConfigError("bad classification function token '" + std::string(token) +
                    "' (expected s1+, s1-, s2+ or s2-)");
}

std::string fn_token(const ClassificationFn& fn) {
  std::string t = fn.boundary == Boundary::s1 ? "s1" : "s2";
  t += fn.plus ? '+' : '-';
  return t;
}

std::vector<ClassificationFn> parse_scenario(std::string_view text) {
  std::vector<ClassificationFn> fns;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    fns.push_back(parse_classification_fn(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return fns;
}

std::string scenario_token(std::span<const ClassificationFn> fns) {
  std::string out;
  for (size_t i = 0; i < fns.size(); ++i) {
    if (i) out += ',';
    out += fn_token(fns[i]);
  }
  return out;
}

double random_walk_next(double prev, const WalkConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < resample_limit; ++attempt) {
    double d = rng.uniform(0.0, cfg.step_max);
    bool lo_ok = prev - d > 0.0;
    bool hi_ok = prev + d < 1.0;
    if (lo_ok && hi_ok) return rng.uniform() < 0.5 ? prev + d : prev - d;
    if (hi_ok) return prev + d;
    if (lo_ok) return prev - d;
    // both directions would leave (0,1); only possible when step_max is
    // comparable to the interval, redraw the step size
  }
  return prev;
}

std::vector<LabeledPoint> generate_concept(const ClassificationFn& fn, int n,
                                           const WalkConfig& cfg, Rng& rng,
                                           std::optional<std::array<double, 2>> start) {
  std::vector<LabeledPoint> pts;
  if (n <= 0) return pts;
  pts.reserve(n);

  double x1, x2;
  if (start) {
    x1 = random_walk_next((*start)[0], cfg, rng);
    x2 = random_walk_next((*start)[1], cfg, rng);
  } else {
    x1 = rng.uniform();
    x2 = rng.uniform();
  }
  pts.push_back({x1, x2, fn.classify(x1, x2), 0});

  int run = 1;
  for (int i = 1; i < n; ++i) {
    const LabeledPoint& prev = pts.back();
    x1 = random_walk_next(prev.x1, cfg, rng);
    x2 = random_walk_next(prev.x2, cfg, rng);
    int lab = fn.classify(x1, x2);
    if (run >= cfg.max_run && lab == prev.label) {
      // the run is at the cap: resample until the label flips, and place
      // the point across the boundary by hand if the walk refuses
      bool flipped = false;
      for (int attempt = 0; attempt < resample_limit; ++attempt) {
        x1 = random_walk_next(prev.x1, cfg, rng);
        x2 = random_walk_next(prev.x2, cfg, rng);
        lab = fn.classify(x1, x2);
        if (lab != prev.label) {
          flipped = true;
          break;
        }
      }
      if (!flipped) {
        x1 = forced_flip_x1(fn, prev.label, prev.x1, x2);
        lab = fn.classify(x1, x2);
      }
    }
    run = (lab == prev.label) ? run + 1 : 1;
    pts.push_back({x1, x2, lab, 0});
  }
  return pts;
}

std::vector<LabeledPoint> generate_scenario(const DriftScenario& scenario,
                                            const WalkConfig& cfg) {
  std::vector<LabeledPoint> stream;
  stream.reserve(static_cast<size_t>(scenario.concepts.size()) * scenario.points_per_concept);
  std::optional<std::array<double, 2>> carry;
  for (size_t k = 0; k < scenario.concepts.size(); ++k) {
    Rng rng(mix_seed(cfg.seed, "concept:" + std::to_string(k)));
    auto part = generate_concept(scenario.concepts[k], scenario.points_per_concept, cfg, rng, carry);
    if (!part.empty()) carry = {{part.back().x1, part.back().x2}};
    for (LabeledPoint& p : part) p.concept_id = static_cast<int>(k) + 1;
    stream.insert(stream.end(), part.begin(), part.end());
  }
  return stream;
}

void write_stream_csv(std::ostream& out, std::span<const LabeledPoint> stream) {
  out << "x1,x2,y,concept\n";
  char buf[128];
  for (const LabeledPoint& p : stream) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%d\n", p.x1, p.x2, p.label, p.concept_id);
    out << buf;
  }
}

}  // namespace cpnn
