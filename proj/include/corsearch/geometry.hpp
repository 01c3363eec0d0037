#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corsearch/rng.hpp"

namespace corsearch {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kFeasSlack = 1e-8;
inline constexpr double kOrthoTol = 1e-9;

enum class ExecPolicy { Serial, Parallel };

// Kept side: orientation * (<normal, x> - intercept) >= 0.
struct Halfspace {
  Vec normal;
  double intercept = 0.0;
  int orientation = +1;

  Halfspace() = default;
  Halfspace(Vec n, double c, int orient = +1);

  double signed_distance(const Vec& x) const { return orientation * (normal.dot(x) - intercept); }
  bool contains(const Vec& x, double slack = 0.0) const { return signed_distance(x) >= -slack; }
  // Same halfspace as a row a.x <= b.
  Vec row() const { return -orientation * normal; }
  double rhs() const { return -orientation * intercept; }
  Halfspace flipped() const { return {normal, intercept, -orientation}; }
};

// {x : a_i.x <= b_i for all i, ||x|| <= radius}. The working form of every
// body handed to the LP kernel.
struct ConvexRegion {
  int dim = 0;
  std::vector<Vec> a;
  std::vector<double> b;
  double radius = 1.0;

  explicit ConvexRegion(int n = 0, double r = 1.0) : dim(n), radius(r) {}
  void add(const Vec& row, double rhs) {
    a.push_back(row);
    b.push_back(rhs);
  }
  void add(const Halfspace& h) { add(h.row(), h.rhs()); }
  bool contains(const Vec& x, double slack = 0.0) const;
  std::size_t rows() const { return a.size(); }
};

struct ChebyshevResult {
  bool feasible = false;
  Vec center;
  double radius = 0.0;
  // Row indices of an infeasible subsystem when !feasible (together with the
  // ball it has no solution).
  std::vector<int> certificate;
};

// Maximum of c.x over the region, or nullopt when the region is empty.
std::optional<std::pair<double, Vec>> maximize(const ConvexRegion& region, const Vec& c);
// Largest inscribed ball; feasible iff its radius is >= -kFeasSlack.
ChebyshevResult chebyshev(const ConvexRegion& region);

class KnowledgeSet {
 public:
  KnowledgeSet() = default;
  explicit KnowledgeSet(int d) : dim_(d) {}
  KnowledgeSet(int d, std::vector<Halfspace> cuts);

  int dim() const { return dim_; }
  const std::vector<Halfspace>& cuts() const { return cuts_; }
  void add(const Halfspace& h);
  bool contains(const Vec& x, double slack = kFeasSlack) const;
  ConvexRegion region() const;

 private:
  int dim_ = 0;
  std::vector<Halfspace> cuts_;
};

// Orthonormal column basis of a subspace of R^d.
struct Subspace {
  Mat basis;

  Subspace() = default;
  explicit Subspace(Mat b) : basis(std::move(b)) {}
  static Subspace full(int d) { return Subspace(Mat::Identity(d, d)); }
  static Subspace none(int d) { return Subspace(Mat(d, 0)); }

  int ambient() const { return static_cast<int>(basis.rows()); }
  int size() const { return static_cast<int>(basis.cols()); }
  Vec project(const Vec& x) const { return basis * (basis.transpose() * x); }
  Vec coords(const Vec& x) const { return basis.transpose() * x; }
  Subspace complement() const;
  bool orthonormal(double tol = kOrthoTol) const;
};

struct DimensionSplit {
  Subspace small;
  Subspace large;
  double delta = 0.0;
};

Vec project_point(const Vec& x, const Subspace& L);

// [min, max] of <u, theta> over K. Throws "empty knowledge set".
std::pair<double, double> extent(const KnowledgeSet& K, const Vec& u);
double width(const KnowledgeSet& K, const Vec& u);
bool feasible(const std::vector<Halfspace>& cuts, const std::vector<Halfspace>& extra = {},
              Vec* witness = nullptr);

// Cyl(K, S): the projection of K onto span(L) extended by the extent of K
// along each small direction.
class Cylinder {
 public:
  Cylinder(const KnowledgeSet& K, Subspace S);

  const Subspace& small() const { return S_; }
  const Subspace& large() const { return L_; }
  const std::vector<std::pair<double, double>>& small_extents() const { return ext_; }

  double width(const Vec& u) const;
  std::pair<double, double> extent(const Vec& u) const;
  bool contains(const Vec& p, double slack = kFeasSlack) const;
  // Membership of a point z of span(L) in the projection of K.
  bool projection_contains(const Vec& z, double slack = kFeasSlack) const;

 private:
  const KnowledgeSet* K_;
  Subspace S_, L_;
  std::vector<std::pair<double, double>> ext_;
};

Cylinder cylindrify(const KnowledgeSet& K, const Subspace& S);

struct CentroidOptions {
  std::size_t min_samples = 400;
  std::size_t max_samples = 4'000'000;
  std::size_t batch = 128;  // thinned samples per chain between stopping checks
  int chains = 4;
  ExecPolicy policy = ExecPolicy::Parallel;
};

struct CentroidEstimate {
  Vec point;
  double std_error = 0.0;
  std::size_t samples = 0;
};

CentroidEstimate approx_centroid_detail(const KnowledgeSet& K, const Subspace& S, Rng rng, double tol,
                                        const CentroidOptions& opt = {});
Vec approx_centroid(const KnowledgeSet& K, const Subspace& S, Rng rng, double tol,
                    const CentroidOptions& opt = {});

Vec sample_ball(const Vec& center, double radius, const Subspace& L, Rng& rng);

struct VolumeEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
VolumeEstimate mc_volume(const KnowledgeSet& K, const Subspace& L, Rng rng, std::size_t n,
                         ExecPolicy policy = ExecPolicy::Parallel);

// Orthonormal basis of span(vectors) obtained by Gram-Schmidt, skipping
// vectors whose residual falls below tol.
Mat gram_schmidt(const Mat& vectors, const Mat& against, double tol = 1e-8);

}  // namespace corsearch
