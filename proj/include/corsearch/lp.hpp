#pragma once

#include <Eigen/Dense>
#include <vector>

namespace corsearch::lp {

enum class Status { Optimal, Infeasible };

struct Solution {
  Status status = Status::Infeasible;
  Eigen::VectorXd x;
  double value = 0.0;
  // Optimal: row indices of the final basis (a superset of the rows with a
  // positive dual). Infeasible: row indices of an infeasible subsystem, to be
  // read together with the box bounds. Box columns are never reported.
  std::vector<int> rows;
  int pivots = 0;
};

// Dense LP  max c.x  s.t.  a_i.x <= b_i,  lo <= x <= hi,  for few variables
// and many rows. Internally runs revised primal simplex on the dual
// (min b.y, A^T y = c, y >= 0) whose starting basis is the box columns, so no
// phase one is required. Rows may be appended between solves; the previous
// basis stays dual feasible and is reused.
class Solver {
 public:
  Solver(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  int add_row(const Eigen::VectorXd& a, double b);
  int rows() const { return static_cast<int>(b_.size()) - 2 * n_; }
  int dim() const { return n_; }

  Solution maximize(const Eigen::VectorXd& c);

 private:
  Eigen::Map<const Eigen::VectorXd> col(int j) const {
    return Eigen::Map<const Eigen::VectorXd>(cols_.data() + static_cast<std::size_t>(j) * n_, n_);
  }
  void reset_basis(const Eigen::VectorXd& c);
  bool refactor(const Eigen::VectorXd& c);

  int n_;
  std::vector<double> cols_;  // column-major, n_ entries per column
  std::vector<double> b_;
  std::vector<int> basis_;
  std::vector<char> in_basis_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd yb_;
  Eigen::VectorXd last_c_;
  bool warm_ = false;
};

}  // namespace corsearch::lp
