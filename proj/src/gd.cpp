#include "corsearch/gd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace corsearch {

GdState::GdState(Vec z0) : z(std::move(z0)) {
  if (z.norm() > 1.0 + kOrthoTol) throw std::invalid_argument("initial point must lie in the unit ball");
}

Vec project_unit_ball(const Vec& z) {
  const double n = z.norm();
  return n > 1.0 ? Vec(z / n) : z;
}

double gd_query(const GdState& s, const Vec& x) {
  if (std::abs(x.norm() - 1.0) > 1e-9) throw std::invalid_argument("context must be a unit vector");
  return std::clamp(x.dot(s.z), 0.0, 1.0);
}

double gd_step_size(std::size_t t) {
  if (t == 0) throw std::invalid_argument("step size is defined for t >= 1");
  return std::sqrt(2.0 / static_cast<double>(t));
}

void gd_update(GdState& s, const Vec& x, int y) {
  if (y != 1 && y != -1) throw std::invalid_argument("feedback must be +1 or -1");
  ++s.t;
  // grad f_t = -y x, so the descent step adds y x.
  s.z = project_unit_ball(s.z + gd_step_size(s.t) * y * x);
}

}  // namespace corsearch
