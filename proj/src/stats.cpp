#include "cpnn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cpnn {

namespace {

double polyval(const double* c, int n, double x) {
  // coefficients given lowest order first
  double acc = 0.0;
  for (int i = n - 1; i >= 0; --i) acc = acc * x + c[i];
  return acc;
}

}  // namespace

// Wichura's algorithm AS 241, routine PPND16: relative error around 1e-16
// over the full open interval.
double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_normal_cdf needs p in (0,1)");
  static constexpr double a[8] = {3.3871328727963666080e0, 1.3314166789178437745e2,
                                  1.9715909503065514427e3, 1.3731693765509461125e4,
                                  4.5921953931549871457e4, 6.7265770927008700853e4,
                                  3.3430575583588128105e4, 2.5090809287301226727e3};
  static constexpr double b[8] = {1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
                                  5.3941960214247511077e3, 2.1213794301586595867e4,
                                  3.9307895800092710610e4, 2.8729085735721942674e4,
                                  5.2264952788528545610e3};
  static constexpr double c[8] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                                  5.76949722146069140550e0, 3.64784832476320460504e0,
                                  1.27045825245236838258e0, 2.41780725177450611770e-1,
                                  2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[8] = {1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
                                  6.89767334985100004550e-1, 1.48103976427480074590e-1,
                                  1.51986665636164571966e-2, 5.47593808499534494600e-4,
                                  1.05075007164441684324e-9};
  static constexpr double e[8] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                                  1.78482653991729133580e0, 2.96560571828504891230e-1,
                                  2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                  2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[8] = {1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                                  1.48753612908506148525e-2, 7.86869131145613259100e-4,
                                  1.84631831751005468180e-5, 1.42151175831644588870e-7,
                                  2.04426310338993978564e-15};

  double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    double r = 0.180625 - q * q;
    return q * polyval(a, 8, r) / polyval(b, 8, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double z;
  if (r <= 5.0) {
    r -= 1.6;
    z = polyval(c, 8, r) / polyval(d, 8, r);
  } else {
    r -= 5.0;
    z = polyval(e, 8, r) / polyval(f, 8, r);
  }
  return q < 0.0 ? -z : z;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

namespace {

// modified Lentz continued-fraction evaluation for the incomplete beta
double beta_cf(double a, double b, double x) {
  constexpr double fpmin = 1e-300;
  constexpr double eps = 3e-15;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log(1.0 - x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * beta_cf(a, b, x) / a;
  }
  return 1.0 - std::exp(ln_front) * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_upper_tail(double t, double nu) {
  double x = nu / (nu + t * t);
  double half_tail = 0.5 * regularized_incomplete_beta(nu / 2.0, 0.5, x);
  return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

ShapiroResult shapiro_wilk(std::span<const double> sample) {
  int n = static_cast<int>(sample.size());
  if (n < 3 || n > 50) throw std::invalid_argument("shapiro_wilk supports 3 <= n <= 50");

  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  if (ss <= 0.0) return {1.0, 0.0};  // constant sample: call it non-normal

  // expected normal order statistics (Blom scores) and Royston's
  // polynomial-corrected weights
  std::vector<double> m(n), w(n);
  double summ2 = 0.0;
  for (int i = 0; i < n; ++i) {
    m[i] = inverse_normal_cdf((i + 1 - 0.375) / (n + 0.25));
    summ2 += m[i] * m[i];
  }
  double rsn = 1.0 / std::sqrt(static_cast<double>(n));
  static constexpr double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};

  if (n == 3) {
    w[2] = std::numbers::sqrt2 / 2.0;
    w[1] = 0.0;
    w[0] = -w[2];
  } else {
    double wn = polyval(c1, 6, rsn) + m[n - 1] / std::sqrt(summ2);
    if (n > 5) {
      double wn1 = polyval(c2, 6, rsn) + m[n - 2] / std::sqrt(summ2);
      double phi = (summ2 - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2]) /
                   (1.0 - 2.0 * wn * wn - 2.0 * wn1 * wn1);
      double fac = std::sqrt(phi);
      for (int i = 2; i < n - 2; ++i) w[i] = m[i] / fac;
      w[n - 1] = wn;
      w[n - 2] = wn1;
      w[0] = -wn;
      w[1] = -wn1;
    } else {
      double phi = (summ2 - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * wn * wn);
      double fac = std::sqrt(phi);
      for (int i = 1; i < n - 1; ++i) w[i] = m[i] / fac;
      w[n - 1] = wn;
      w[0] = -wn;
    }
  }

  double num = 0.0;
  for (int i = 0; i < n; ++i) num += w[i] * x[i];
  double W = num * num / ss;
  if (W > 1.0) W = 1.0;

  double p;
  if (n == 3) {
    p = 6.0 / std::numbers::pi * (std::asin(std::sqrt(W)) - std::asin(std::sqrt(0.75)));
    p = std::clamp(p, 0.0, 1.0);
  } else if (n <= 11) {
    double gamma = -2.273 + 0.459 * n;
    double arg = gamma - std::log(1.0 - W);
    if (arg < 1e-300) arg = 1e-300;
    double y = -std::log(arg);
    double mu = 0.5440 - 0.39978 * n + 0.025054 * n * n - 0.0006714 * n * n * n;
    double sigma = std::exp(1.3822 - 0.77857 * n + 0.062767 * n * n - 0.0020322 * n * n * n);
    p = 1.0 - normal_cdf((y - mu) / sigma);
  } else {
    double ln_n = std::log(static_cast<double>(n));
    double y = std::log(1.0 - W);
    double mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n * ln_n + 0.0038915 * ln_n * ln_n * ln_n;
    double sigma = std::exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n * ln_n);
    p = 1.0 - normal_cdf((y - mu) / sigma);
  }
  return {W, p};
}

TestResult welch_t_one_sided(std::span<const double> a, std::span<const double> b) {
  auto n = static_cast<double>(a.size());
  auto m = static_cast<double>(b.size());
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch needs n, m >= 2");
  double ma = 0.0, mb = 0.0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= n;
  mb /= m;
  double va = 0.0, vb = 0.0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= n - 1.0;
  vb /= m - 1.0;

  double se2 = va / n + vb / m;
  if (se2 == 0.0) {
    // degenerate samples: call the direction from the means alone
    double inf = std::numeric_limits<double>::infinity();
    return ma > mb ? TestResult{inf, 0.0} : TestResult{-inf, 1.0};
  }
  double t = (ma - mb) / std::sqrt(se2);
  double df = se2 * se2 /
              ((va / n) * (va / n) / (n - 1.0) + (vb / m) * (vb / m) / (m - 1.0));
  return {t, student_t_upper_tail(t, df)};
}

TestResult wilcoxon_one_sided(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon needs paired samples");
  std::vector<double> diffs;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  int n = static_cast<int>(diffs.size());
  if (n == 0) return {0.0, 0.5};
  if (n > 62) throw std::invalid_argument("wilcoxon exact enumeration limited to n <= 62");

  // ranks of |d|, average ranks on ties; kept in doubled units so that
  // averaged ranks stay integral
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return std::fabs(diffs[i]) < std::fabs(diffs[j]); });
  std::vector<long long> rank2(n);
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]])) ++j;
    long long doubled = (i + 1) + j;  // lo + hi of the 1-based tie block
    for (int k = i; k < j; ++k) rank2[order[k]] = doubled;
    i = j;
  }

  long long w_plus2 = 0;
  long long total2 = 0;
  for (int i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diffs[i] > 0.0) w_plus2 += rank2[i];
  }

  // exact null distribution of the doubled statistic by subset-sum
  // counting over all 2^n sign assignments
  std::vector<double> count(static_cast<size_t>(total2) + 1, 0.0);
  count[0] = 1.0;
  long long reach = 0;
  for (int i = 0; i < n; ++i) {
    long long r = rank2[i];
    reach += r;
    for (long long s = reach; s >= r; --s) count[s] += count[s - r];
  }
  double ge = 0.0;
  for (long long s = w_plus2; s <= total2; ++s) ge += count[s];
  double p = ge / std::ldexp(1.0, n);  // / 2^n
  return {static_cast<double>(w_plus2) / 2.0, p};
}

ProtocolFlags protocol_compare(const std::vector<std::vector<double>>& samples, double alpha) {
  int k = static_cast<int>(samples.size());
  if (k < 2) throw std::invalid_argument("protocol_compare needs at least 2 samples");
  for (const auto& s : samples) {
    if (s.size() != samples[0].size()) {
      throw std::invalid_argument("protocol_compare needs equal-size samples");
    }
  }

  ProtocolFlags flags;
  flags.best.assign(k, true);
  flags.worst.assign(k, true);
  flags.non_normal.assign(k, false);
  std::vector<bool> normal(k);
  for (int i = 0; i < k; ++i) {
    double p = shapiro_wilk(samples[i]).p;
    normal[i] = p >= alpha;
    flags.non_normal[i] = !normal[i];
  }

  // significant[i][j]: i is significantly above j, one-sided
  std::vector<std::vector<bool>> sig(k, std::vector<bool>(k, false));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      ComparisonResult r;
      r.a = i;
      r.b = j;
      r.normal_a = normal[i];
      r.normal_b = normal[j];
      r.test_used = normal[i] && normal[j] ? TestKind::welch : TestKind::wilcoxon;
      r.p = r.test_used == TestKind::welch ? welch_t_one_sided(samples[i], samples[j]).p
                                           : wilcoxon_one_sided(samples[i], samples[j]).p;
      r.significant = r.p < alpha;
      sig[i][j] = r.significant;
      flags.pairs.push_back(r);
    }
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      if (!sig[i][j]) flags.best[i] = false;
      if (!sig[j][i]) flags.worst[i] = false;
    }
  }
  return flags;
}

}  // namespace cpnn
