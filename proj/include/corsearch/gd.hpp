#pragma once

#include <cstddef>

#include "corsearch/geometry.hpp"

namespace corsearch {

// Projected online gradient descent on f_t(z) = -y_t <z, x_t>, with
// y_t = sgn(vtilde - omega) as reported by the agent.
struct GdState {
  Vec z;
  std::size_t t = 0;  // completed updates
  double gamma0 = 0.5;

  explicit GdState(int d) : z(Vec::Zero(d)) {}
  explicit GdState(Vec z0);
};

double gd_query(const GdState& s, const Vec& x);
double gd_step_size(std::size_t t);  // sqrt(2 / t), t >= 1
void gd_update(GdState& s, const Vec& x, int y);
Vec project_unit_ball(const Vec& z);

}  // namespace corsearch
