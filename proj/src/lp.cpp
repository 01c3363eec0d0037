#include "corsearch/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace corsearch::lp {

namespace {
constexpr double kPriceTol = 1e-10;
constexpr double kPivotTol = 1e-9;
constexpr int kRefactorEvery = 64;
constexpr int kDegenerateSwitch = 40;
constexpr int kMaxPivots = 100000;
}  // namespace

Solver::Solver(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) : n_(static_cast<int>(lo.size())) {
  if (hi.size() != lo.size()) throw std::invalid_argument("lp: bound size mismatch");
  for (int i = 0; i < n_; ++i) {
    if (!(lo[i] <= hi[i])) throw std::invalid_argument("lp: empty box");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
    e[i] = 1.0;
    cols_.insert(cols_.end(), e.data(), e.data() + n_);
    b_.push_back(hi[i]);
    e[i] = -1.0;
    cols_.insert(cols_.end(), e.data(), e.data() + n_);
    b_.push_back(-lo[i]);
  }
  in_basis_.assign(b_.size(), 0);
}

int Solver::add_row(const Eigen::VectorXd& a, double b) {
  if (a.size() != n_) throw std::invalid_argument("lp: row size mismatch");
  cols_.insert(cols_.end(), a.data(), a.data() + n_);
  b_.push_back(b);
  in_basis_.push_back(0);
  return rows() - 1;
}

void Solver::reset_basis(const Eigen::VectorXd& c) {
  std::fill(in_basis_.begin(), in_basis_.end(), 0);
  basis_.assign(n_, 0);
  binv_ = Eigen::MatrixXd::Zero(n_, n_);
  yb_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    const int j = c[i] >= 0.0 ? 2 * i : 2 * i + 1;
    basis_[i] = j;
    in_basis_[j] = 1;
    binv_(i, i) = c[i] >= 0.0 ? 1.0 : -1.0;
    yb_[i] = std::abs(c[i]);
  }
}

// Recomputes B^{-1} from scratch; returns false if the basis has drifted out
// of dual feasibility.
bool Solver::refactor(const Eigen::VectorXd& c) {
  Eigen::MatrixXd bm(n_, n_);
  for (int i = 0; i < n_; ++i) bm.col(i) = col(basis_[i]);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
  binv_ = lu.inverse();
  yb_ = binv_ * c;
  for (int i = 0; i < n_; ++i) {
    if (yb_[i] < -1e-9) return false;
    if (yb_[i] < 0.0) yb_[i] = 0.0;
  }
  return true;
}

Solution Solver::maximize(const Eigen::VectorXd& c) {
  if (c.size() != n_) throw std::invalid_argument("lp: objective size mismatch");
  if (!warm_ || last_c_.size() != c.size() || (last_c_ - c).cwiseAbs().maxCoeff() > 0.0) {
    reset_basis(c);
  }
  last_c_ = c;
  warm_ = true;

  const int ncols = static_cast<int>(b_.size());
  Solution sol;
  int since_refactor = 0;
  int degenerate = 0;
  Eigen::VectorXd bb(n_);
  for (int pivots = 0;; ++pivots) {
    if (pivots > kMaxPivots) throw std::runtime_error("lp: pivot limit exceeded");
    for (int i = 0; i < n_; ++i) bb[i] = b_[basis_[i]];
    const Eigen::VectorXd pi = binv_.transpose() * bb;

    // Pricing: reduced cost of a dual column is the primal slack of its row.
    const bool bland = degenerate > kDegenerateSwitch;
    int enter = -1;
    double best = -kPriceTol;
    for (int j = 0; j < ncols; ++j) {
      if (in_basis_[j]) continue;
      const double r = b_[j] - col(j).dot(pi);
      const double tol = -kPriceTol * (1.0 + std::abs(b_[j]));
      if (r < tol && (bland ? enter < 0 : r < best)) {
        best = r;
        enter = j;
        if (bland) break;
      }
    }
    if (enter < 0) {
      sol.status = Status::Optimal;
      sol.x = pi;
      sol.value = c.dot(pi);
      for (int j : basis_)
        if (j >= 2 * n_) sol.rows.push_back(j - 2 * n_);
      sol.pivots = pivots;
      return sol;
    }

    const Eigen::VectorXd dir = binv_ * col(enter);
    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_; ++i) {
      if (dir[i] <= kPivotTol) continue;
      const double q = yb_[i] / dir[i];
      if (q < ratio - 1e-13 || (q <= ratio + 1e-13 && leave >= 0 && basis_[i] < basis_[leave])) {
        ratio = std::min(ratio, q);
        leave = i;
      }
    }
    if (leave < 0) {
      // Dual ray: the entering row together with the basic rows it moves
      // certifies primal infeasibility.
      sol.status = Status::Infeasible;
      if (enter >= 2 * n_) sol.rows.push_back(enter - 2 * n_);
      for (int i = 0; i < n_; ++i)
        if (dir[i] < -kPivotTol && basis_[i] >= 2 * n_) sol.rows.push_back(basis_[i] - 2 * n_);
      sol.pivots = pivots;
      warm_ = false;
      return sol;
    }

    degenerate = ratio < 1e-14 ? degenerate + 1 : 0;
    yb_ -= ratio * dir;
    yb_[leave] = ratio;
    for (int i = 0; i < n_; ++i)
      if (yb_[i] < 0.0) yb_[i] = 0.0;
    const Eigen::RowVectorXd lrow = binv_.row(leave) / dir[leave];
    for (int i = 0; i < n_; ++i) {
      if (i == leave) continue;
      binv_.row(i) -= dir[i] * lrow;
    }
    binv_.row(leave) = lrow;
    in_basis_[basis_[leave]] = 0;
    basis_[leave] = enter;
    in_basis_[enter] = 1;

    if (++since_refactor >= kRefactorEvery) {
      since_refactor = 0;
      if (!refactor(c)) reset_basis(c);
    }
  }
}

}  // namespace corsearch::lp
