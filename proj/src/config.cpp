#include "planeway/config.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace planeway {

double RatioTable::operator()(double psi_rad) const {
  if (knots.empty()) return 1.0;
  const double deg = psi_rad * 180.0 / std::numbers::pi;
  if (deg <= knots.front().first) return knots.front().second;
  if (deg >= knots.back().first) return knots.back().second;
  const auto hi = std::upper_bound(knots.begin(), knots.end(), deg,
                                   [](double d, const auto& k) { return d < k.first; });
  const auto lo = hi - 1;
  const double t = (deg - lo->first) / (hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

}  // namespace planeway
