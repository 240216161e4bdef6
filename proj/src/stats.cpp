#include "ckpt/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdio>

namespace ckpt {

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw StatsError("empty_input");
  if (!(q >= 0.0 && q <= 1.0)) throw StatsError("percentile: q must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double rank = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

std::string_view to_string(CiMethod method) { return method == CiMethod::Wilson ? "wilson" : "exact"; }

std::optional<CiMethod> ci_method_from_name(std::string_view name) {
  if (name == "wilson") return CiMethod::Wilson;
  if (name == "exact" || name == "clopper-pearson" || name == "clopper_pearson") return CiMethod::Exact;
  return std::nullopt;
}

ProportionCI binomial_ci(std::uint64_t k, std::uint64_t n, CiMethod method, double z) {
  if (n == 0 || k > n) throw StatsError("invalid_counts");
  ProportionCI ci;
  ci.k = k;
  ci.n = n;
  ci.method = method;
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  ci.rate = kd / nd;

  if (method == CiMethod::Wilson) {
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nd;
    const double center = (ci.rate + z2 / (2.0 * nd)) / denom;
    const double half = z * std::sqrt(ci.rate * (1.0 - ci.rate) / nd + z2 / (4.0 * nd * nd)) / denom;
    ci.lo = std::max(0.0, center - half);
    ci.hi = std::min(1.0, center + half);
  } else {
    const double alpha = z == kZ95 ? 0.05 : std::erfc(z / std::sqrt(2.0));
    // Clopper-Pearson bounds are Beta quantiles.
    ci.lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, alpha / 2.0);
    ci.hi = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - alpha / 2.0);
  }
  if (k == 0) ci.lo = 0.0;
  if (k == n) ci.hi = 1.0;
  ci.lo = std::min(ci.lo, ci.rate);
  ci.hi = std::max(ci.hi, ci.rate);
  return ci;
}

double overhead(double atomic_ms, double unsafe_ms) {
  if (!(unsafe_ms > 0.0)) throw StatsError("overhead: unsafe latency must be positive");
  return (atomic_ms - unsafe_ms) / unsafe_ms * 100.0;
}

PercentileSummary summarize(std::string mode, std::span<const double> values_ms) {
  PercentileSummary s;
  s.mode = std::move(mode);
  s.p50 = percentile(values_ms, 0.50);
  s.p90 = percentile(values_ms, 0.90);
  s.p99 = percentile(values_ms, 0.99);
  s.n = values_ms.size();
  return s;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  if (s == "-0.0" || s == "-0" || s == "-0.00" || s == "-0.000") s.erase(0, 1);
  return s;
}

std::string format_sig3(double value) {
  if (value == 0.0 || !std::isfinite(value)) return format_fixed(value, 2);
  const int magnitude = static_cast<int>(std::floor(std::log10(std::fabs(value))));
  const int decimals = std::max(0, 2 - magnitude);
  return format_fixed(value, decimals);
}

}  // namespace ckpt
