#pragma once

// Evaluable smooth maps built from rigid leaves, compositions, bump-blended
// corrections and certified inverses, plus the scaling-invariant C1/C2 norm
// machinery used by every quantitative check downstream.

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "reifenberg/rigid_motion.hpp"

namespace reifenberg::smooth {

using rigid::RigidMotion;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct BlendRefused : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Union of balls with optional half-space clips {x : n.x <= c}; membership
// is exact, which the bump and region grids rely on.
struct ClippedBall {
  Vec center;
  double radius = 0.0;
  std::vector<std::pair<Vec, double>> clips;
  bool contains(const Vec& x) const;
};

struct Region {
  std::vector<ClippedBall> balls;
  bool contains(const Vec& x) const;
  void bounding_box(Vec& lo, Vec& hi) const;
  static Region ball(const Vec& c, double r);
};

// One radial quintic-smoothstep bump: 1 inside |x-c|<=r1, 0 outside
// |x-c|>=r2.
struct Bump {
  Vec center;
  double r1 = 0.0, r2 = 0.0;
  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
};

// quintic smoothstep and its derivative bounds (sup|s'|, sup|s''|)
double smoothstep5(double u);
double smoothstep5_d(double u);
inline constexpr double kSmoothstepD1 = 1.875;     // sup |s'|
inline constexpr double kSmoothstepD2 = 5.7735027; // sup |s''| (rounded up)

class SmoothMap {
 public:
  struct Node;
  SmoothMap() = default;

  static SmoothMap identity(int n);
  static SmoothMap rigid(RigidMotion m);
  static SmoothMap compose(SmoothMap f, SmoothMap g);  // x -> f(g(x))
  // x -> x + phi(x) (H(x)-x), phi the union-combine of the bumps.
  static SmoothMap blended(SmoothMap H, std::vector<Bump> bumps);
  // Piecewise selection: first piece whose region contains x (pieces must
  // agree on overlaps; used by the patching stage).
  static SmoothMap select(std::vector<std::pair<Region, SmoothMap>> pieces);
  // Certified inverse; hint is the rigid inverse used to start Newton.
  static SmoothMap inverse(SmoothMap f, RigidMotion hint,
                           double contraction_bound);
  // Analytic map with explicit Jacobian. Not serializable; test fields and
  // local oracles only.
  static SmoothMap callable(int n, std::function<Vec(const Vec&)> eval,
                            std::function<Mat(const Vec&)> jac);

  bool valid() const { return node_ != nullptr; }
  int dim() const;
  Vec eval(const Vec& x) const;
  Mat jacobian(const Vec& x) const;

  // Rigid skeleton: the map with all blends dropped. Exact for rigid trees.
  RigidMotion rigid_reference() const;
  bool is_rigid() const;

  const Node& root() const { return *node_; }
  std::shared_ptr<const Node> shared_root() const { return node_; }
  static SmoothMap from_node(std::shared_ptr<const Node> n);

 private:
  explicit SmoothMap(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct SmoothMap::Node {
  enum class Kind { Rigid, Compose, Blend, Select, Invert, Callable } kind;
  int n = 0;
  RigidMotion motion;                   // Rigid
  std::shared_ptr<const Node> f, g;     // Compose: f after g; Blend/Invert: f
  std::vector<Bump> bumps;              // Blend
  std::vector<std::pair<Region, std::shared_ptr<const Node>>> pieces;  // Select
  RigidMotion inv_hint;                 // Invert
  double contraction_bound = 0.0;       // Invert certificate
  std::function<Vec(const Vec&)> call_eval;  // Callable
  std::function<Mat(const Vec&)> call_jac;
};

struct CkNormReport {
  int m = 1;
  double t = 0.0;
  int grid = 0;
  std::size_t points = 0;
  double value = 0.0;
  double term_value = 0.0;  // sup |f-ref| / t
  double term_jac = 0.0;    // sup ||Df-Dref||
  double term_hess = 0.0;   // t * sup |dd(f-ref)|
};

// Grid-sup estimate of ||f-ref||_{C^m(region),t}; second derivatives by
// central differences of the Jacobian at step 1e-4 t.
CkNormReport ck_norm(const SmoothMap& f, const SmoothMap& ref,
                     const Region& region, double t, int m, int grid);

// Documented closed-form bump constant: ||Hhat-id||_{C^m,t} <= C2 * eps for
// the blend below, where eta = gap/t and rho1 = inner radius / t.
double blend_constant(int m, int n, double eta, double rho1);

struct BlendResult {
  SmoothMap map;
  double eps = 0.0;        // measured ||H-id||_{C^m(U2),t}
  double eta = 0.0;        // gap / t
  double bound = 0.0;      // blend_constant * eps
  CkNormReport measured;   // ||Hhat-id||_{C^m,t} on the support
};

// Lemma-style bump blend on concentric balls U1 = B(c,R1) subset of
// U2 = B(c,R2). Refuses when the measured deviation makes the blended map
// uncertifiable as a diffeomorphism (predicted ||D(Hhat)-I|| > 1/2).
BlendResult blend(const SmoothMap& H, const Vec& center, double R1, double R2,
                  double t, int m, int grid = 9);

struct InvertResult {
  SmoothMap map;
  double certificate = 0.0;  // measured sup ||Df - R|| on the region
  double residual = 0.0;     // sup |f(f^-1(y)) - y| over probes
};

// Newton-backed inverse certified against the rigid reference on the region.
// Refuses (BlendRefused) when the contraction certificate exceeds 1/2.
InvertResult invert_map(const SmoothMap& f, const Region& region, double t,
                        int grid = 9);

struct ConjugationReport {
  double measured = 0.0;  // ||f o g o f^-1 - id||_{C1,t}
  double delta = 0.0;     // ||g - id||_{C1,t}
  double M = 0.0;         // derivative bound of f, f^-1
  double bound = 0.0;     // c(n,M) * delta
};

// Lemma-style conjugation bound: measured norm of f.g.f^-1 - id on W,
// asserted against c(n,M) = max(M, M^2 (1+2 sqrt(n))).
ConjugationReport conjugation_bound_check(const SmoothMap& f,
                                          const SmoothMap& f_inv,
                                          const SmoothMap& g, const Region& W,
                                          double t, int grid = 9);

// Deterministic grid over the region (G points per axis on the bounding
// box, filtered by membership).
std::vector<Vec> region_grid(const Region& region, int G);

}  // namespace reifenberg::smooth
