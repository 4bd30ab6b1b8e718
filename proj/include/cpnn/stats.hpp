#pragma once

#include <span>
#include <vector>

namespace cpnn {

// Quantile function of the standard normal (Wichura's AS 241, double
// precision) and the regularized incomplete beta function I_x(a, b)
// (continued fraction); building blocks of the tests below, exposed for
// direct testing.
double inverse_normal_cdf(double p);
double normal_cdf(double z);
double regularized_incomplete_beta(double a, double b, double x);

// Upper tail P(T >= t) of Student's t with nu degrees of freedom.
double student_t_upper_tail(double t, double nu);

struct ShapiroResult {
  double w = 0.0;
  double p = 0.0;
};

// Shapiro-Wilk normality test for 3 <= n <= 50, Royston's AS R94
// approximation.  A constant sample is degenerate: reported as (w=1, p=0),
// i.e. non-normal by convention so the caller falls back to the rank test.
ShapiroResult shapiro_wilk(std::span<const double> sample);

struct TestResult {
  double statistic = 0.0;
  double p = 0.0;
};

// One-sided Welch's t-test of mean(a) > mean(b), Welch-Satterthwaite
// degrees of freedom.  With both variances zero the statistic is
// undefined; p degenerates to 0 when mean(a) > mean(b) and 1 otherwise.
TestResult welch_t_one_sided(std::span<const double> a, std::span<const double> b);

// One-sided Wilcoxon signed-rank test that a sits above b, with a and b
// paired by index.  Zero differences are dropped, tied magnitudes get
// averaged ranks, and the p-value P(W+ >= observed) is exact over all 2^n
// sign assignments.  All-zero differences give p = 0.5.
TestResult wilcoxon_one_sided(std::span<const double> a, std::span<const double> b);

enum class TestKind { welch, wilcoxon };

struct ComparisonResult {
  int a = 0;  // sample indices into the protocol input
  int b = 0;
  bool normal_a = false;
  bool normal_b = false;
  TestKind test_used = TestKind::welch;
  double p = 1.0;
  bool significant = false;  // p < alpha
};

struct ProtocolFlags {
  std::vector<bool> best;        // significantly better than every other sample
  std::vector<bool> worst;       // every other sample significantly better
  std::vector<bool> non_normal;  // Shapiro-Wilk rejected at alpha
  std::vector<ComparisonResult> pairs;  // all ordered pairs
};

// Comparison protocol over k >= 2 equal-size samples (the experiments use
// k = 3, n = 10): per ordered pair, a Shapiro-Wilk gate at alpha picks
// Welch (both normal) or Wilcoxon, one-sided.
ProtocolFlags protocol_compare(const std::vector<std::vector<double>>& samples, double alpha);

}  // namespace cpnn
