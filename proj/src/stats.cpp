#include "readest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "readest/error.hpp"

namespace readest {

PairedTTest paired_t_test(std::span<const double> before, std::span<const double> after) {
  if (before.size() != after.size())
    throw PairingError("paired samples differ in length (" + std::to_string(before.size()) + " vs " +
                       std::to_string(after.size()) + ")");
  PairedTTest r;
  r.n = before.size();
  if (r.n == 0) return r;
  std::vector<double> d(r.n);
  for (std::size_t i = 0; i < r.n; ++i) d[i] = after[i] - before[i];
  const double n = static_cast<double>(r.n);
  r.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / n;
  if (r.n < 2) return r;

  double ss = 0;
  for (double x : d) ss += (x - r.mean_diff) * (x - r.mean_diff);
  const double sd = std::sqrt(ss / (n - 1));
  if (sd == 0) {
    r.t = r.mean_diff == 0 ? 0.0 : std::copysign(INFINITY, r.mean_diff);
    r.p = r.mean_diff == 0 ? 1.0 : 0.0;
    return r;
  }
  r.t = r.mean_diff / (sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1);
  r.p = std::min(1.0, 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(*r.t))));
  return r;
}

std::vector<std::optional<double>> holm_sidak(std::span<const std::optional<double>> p) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i]) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return *p[a] < *p[b]; });

  std::vector<std::optional<double>> adjusted(p.size());
  const std::size_t k = order.size();
  double running = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double raw = *p[order[i]];
    // 1 - (1 - p)^m, never below p itself (m = 1 can round under it).
    const double adj = std::max(raw, -std::expm1(static_cast<double>(k - i) * std::log1p(-raw)));
    running = std::min(1.0, std::max(running, adj));
    adjusted[order[i]] = running;
  }
  return adjusted;
}

}  // namespace readest
