#pragma once

// Reference statistics written from the textbook definitions, sharing no code
// with the library: the t density is integrated numerically and Pearson's r is
// the mean product of z-scores in extended precision.

#include <cmath>
#include <functional>
#include <vector>

namespace chamber::testing::oracle {

inline long double t_density(long double x, long double df) {
  const long double log_norm =
      std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5L * std::log(df * 3.14159265358979323846264338327950288L);
  return std::exp(log_norm - (df + 1) / 2 * std::log1p(x * x / df));
}

inline long double simpson(const std::function<long double(long double)>& f, long double a, long double b,
                           long double fa, long double fm, long double fb, long double whole, long double eps,
                           int depth) {
  const long double m = (a + b) / 2;
  const long double lm = (a + m) / 2;
  const long double rm = (m + b) / 2;
  const long double flm = f(lm);
  const long double frm = f(rm);
  const long double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const long double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15 * eps) {
    return left + right + (left + right - whole) / 15;
  }
  return simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

// Integral of the t density over [0, |t|].
inline long double t_central_mass(long double t, long double df) {
  const auto f = [df](long double x) { return t_density(x, df); };
  const long double a = 0, b = std::fabs(t);
  if (b == 0) return 0;
  const long double fa = f(a), fb = f(b), fm = f((a + b) / 2);
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), 1e-14L, 50);
}

inline double p_two_tailed(double r, long n) {
  const long double df = n - 2;
  const long double t = r * std::sqrt(df / (1.0L - static_cast<long double>(r) * r));
  return static_cast<double>(1 - 2 * t_central_mass(t, df));
}

inline double p_one_tailed(double r, long n) {
  const long double df = n - 2;
  const long double t = r * std::sqrt(df / (1.0L - static_cast<long double>(r) * r));
  const long double central = t_central_mass(t, df);
  return static_cast<double>(t >= 0 ? 0.5L - central : 0.5L + central);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto moments = [n](const std::vector<double>& v) {
    long double mean = 0;
    for (double e : v) mean += e;
    mean /= n;
    long double ss = 0;
    for (double e : v) ss += (e - mean) * (e - mean);
    return std::pair{mean, std::sqrt(ss / (n - 1))};
  };
  const auto [mx, sx] = moments(x);
  const auto [my, sy] = moments(y);
  long double sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += ((x[i] - mx) / sx) * ((y[i] - my) / sy);
  return static_cast<double>(sum / (n - 1));
}

}  // namespace chamber::testing::oracle
