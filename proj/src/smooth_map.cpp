#include "reifenberg/smooth_map.hpp"

#include <cmath>

namespace reifenberg::smooth {

bool ClippedBall::contains(const Vec& x) const {
  if ((x - center).norm() >= radius) return false;
  for (const auto& [nrm, c] : clips)
    if (nrm.dot(x) > c) return false;
  return true;
}

bool Region::contains(const Vec& x) const {
  for (const auto& b : balls)
    if (b.contains(x)) return true;
  return false;
}

void Region::bounding_box(Vec& lo, Vec& hi) const {
  const int n = static_cast<int>(balls.front().center.size());
  lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
  hi = Vec::Constant(n, -std::numeric_limits<double>::infinity());
  for (const auto& b : balls) {
    lo = lo.cwiseMin(b.center.array().matrix() - Vec::Constant(n, b.radius));
    hi = hi.cwiseMax(b.center.array().matrix() + Vec::Constant(n, b.radius));
  }
}

Region Region::ball(const Vec& c, double r) {
  Region reg;
  reg.balls.push_back({c, r, {}});
  return reg;
}

double smoothstep5(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double smoothstep5_d(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

double Bump::value(const Vec& x) const {
  const double rho = (x - center).norm();
  if (rho <= r1) return 1.0;
  if (rho >= r2) return 0.0;
  return smoothstep5((r2 - rho) / (r2 - r1));
}

Vec Bump::gradient(const Vec& x) const {
  const Vec d = x - center;
  const double rho = d.norm();
  if (rho <= r1 || rho >= r2 || rho == 0.0) return Vec::Zero(x.size());
  const double u = (r2 - rho) / (r2 - r1);
  return d * (-smoothstep5_d(u) / ((r2 - r1) * rho));
}

namespace {

double union_phi(const std::vector<Bump>& bumps, const Vec& x) {
  double prod = 1.0;
  for (const auto& b : bumps) {
    prod *= 1.0 - b.value(x);
    if (prod == 0.0) return 1.0;
  }
  return 1.0 - prod;
}

Vec union_phi_grad(const std::vector<Bump>& bumps, const Vec& x) {
  // d(1 - prod(1-phi_b)) = sum_b grad phi_b * prod_{c != b} (1-phi_c)
  std::vector<double> vals(bumps.size());
  for (std::size_t i = 0; i < bumps.size(); ++i) vals[i] = bumps[i].value(x);
  Vec g = Vec::Zero(x.size());
  for (std::size_t i = 0; i < bumps.size(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < bumps.size(); ++j)
      if (j != i) prod *= 1.0 - vals[j];
    if (prod != 0.0) g += bumps[i].gradient(x) * prod;
  }
  return g;
}

}  // namespace

SmoothMap SmoothMap::identity(int n) { return rigid(RigidMotion::identity(n)); }

SmoothMap SmoothMap::rigid(RigidMotion m) {
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::Rigid;
  node->n = m.dim();
  node->motion = std::move(m);
  return SmoothMap(std::move(node));
}

SmoothMap SmoothMap::compose(SmoothMap f, SmoothMap g) {
  // collapse rigid-rigid compositions
  if (f.node_->kind == Node::Kind::Rigid && g.node_->kind == Node::Kind::Rigid)
    return rigid(rigid::compose(f.node_->motion, g.node_->motion));
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::Compose;
  node->n = f.dim();
  node->f = f.node_;
  node->g = g.node_;
  return SmoothMap(std::move(node));
}

SmoothMap SmoothMap::blended(SmoothMap H, std::vector<Bump> bumps) {
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::Blend;
  node->n = H.dim();
  node->f = H.node_;
  node->bumps = std::move(bumps);
  return SmoothMap(std::move(node));
}

SmoothMap SmoothMap::select(std::vector<std::pair<Region, SmoothMap>> pieces) {
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::Select;
  node->n = pieces.front().second.dim();
  for (auto& [reg, m] : pieces) node->pieces.emplace_back(reg, m.node_);
  return SmoothMap(std::move(node));
}

SmoothMap SmoothMap::inverse(SmoothMap f, RigidMotion hint,
                             double contraction_bound) {
  if (f.node_->kind == Node::Kind::Rigid)
    return rigid(rigid::invert(f.node_->motion));
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::Invert;
  node->n = f.dim();
  node->f = f.node_;
  node->inv_hint = std::move(hint);
  node->contraction_bound = contraction_bound;
  return SmoothMap(std::move(node));
}

SmoothMap SmoothMap::callable(int n, std::function<Vec(const Vec&)> eval,
                              std::function<Mat(const Vec&)> jac) {
  auto node = std::make_shared<Node>();
  node->kind = Node::Kind::Callable;
  node->n = n;
  node->call_eval = std::move(eval);
  node->call_jac = std::move(jac);
  return SmoothMap(std::move(node));
}

SmoothMap SmoothMap::from_node(std::shared_ptr<const Node> n) {
  return SmoothMap(std::move(n));
}

int SmoothMap::dim() const { return node_->n; }

namespace {

Vec eval_node(const SmoothMap::Node& nd, const Vec& x);
Mat jac_node(const SmoothMap::Node& nd, const Vec& x);

Vec newton_invert(const SmoothMap::Node& nd, const Vec& y) {
  Vec x = nd.inv_hint.apply(y);
  const double scale = 1.0 + y.norm();
  for (int it = 0; it < 60; ++it) {
    Vec r = eval_node(*nd.f, x) - y;
    if (r.norm() <= 1e-14 * scale) break;
    x -= jac_node(*nd.f, x).partialPivLu().solve(r);
  }
  return x;
}

Vec eval_node(const SmoothMap::Node& nd, const Vec& x) {
  using K = SmoothMap::Node::Kind;
  switch (nd.kind) {
    case K::Rigid:
      return nd.motion.apply(x);
    case K::Compose:
      return eval_node(*nd.f, eval_node(*nd.g, x));
    case K::Blend: {
      const double phi = union_phi(nd.bumps, x);
      if (phi == 0.0) return x;
      Vec h = eval_node(*nd.f, x);
      return x + phi * (h - x);
    }
    case K::Select: {
      for (const auto& [reg, m] : nd.pieces)
        if (reg.contains(x)) return eval_node(*m, x);
      return eval_node(*nd.pieces.back().second, x);
    }
    case K::Invert:
      return newton_invert(nd, x);
    case K::Callable:
      return nd.call_eval(x);
  }
  return x;
}

Mat jac_node(const SmoothMap::Node& nd, const Vec& x) {
  using K = SmoothMap::Node::Kind;
  const int n = nd.n;
  switch (nd.kind) {
    case K::Rigid:
      return nd.motion.Q;
    case K::Compose: {
      Vec gx = eval_node(*nd.g, x);
      return jac_node(*nd.f, gx) * jac_node(*nd.g, x);
    }
    case K::Blend: {
      const double phi = union_phi(nd.bumps, x);
      Vec grad = union_phi_grad(nd.bumps, x);
      if (phi == 0.0 && grad.isZero(0.0)) return Mat::Identity(n, n);
      Vec h = eval_node(*nd.f, x);
      Mat dh = jac_node(*nd.f, x);
      return Mat::Identity(n, n) + phi * (dh - Mat::Identity(n, n)) +
             (h - x) * grad.transpose();
    }
    case K::Select: {
      for (const auto& [reg, m] : nd.pieces)
        if (reg.contains(x)) return jac_node(*m, x);
      return jac_node(*nd.pieces.back().second, x);
    }
    case K::Invert: {
      Vec xin = newton_invert(nd, x);
      return jac_node(*nd.f, xin).inverse();
    }
    case K::Callable:
      return nd.call_jac(x);
  }
  return Mat::Identity(n, n);
}

RigidMotion rigid_ref_node(const SmoothMap::Node& nd) {
  using K = SmoothMap::Node::Kind;
  switch (nd.kind) {
    case K::Rigid:
      return nd.motion;
    case K::Compose:
      return rigid::compose(rigid_ref_node(*nd.f), rigid_ref_node(*nd.g));
    case K::Blend:
      return RigidMotion::identity(nd.n);  // blends are near-identity
    case K::Select:
      return rigid_ref_node(*nd.pieces.front().second);
    case K::Invert:
      return rigid::invert(rigid_ref_node(*nd.f));
    case K::Callable:
      return RigidMotion::identity(nd.n);
  }
  return RigidMotion::identity(nd.n);
}

bool is_rigid_node(const SmoothMap::Node& nd) {
  using K = SmoothMap::Node::Kind;
  switch (nd.kind) {
    case K::Rigid:
      return true;
    case K::Compose:
      return is_rigid_node(*nd.f) && is_rigid_node(*nd.g);
    case K::Invert:
      return is_rigid_node(*nd.f);
    default:
      return false;
  }
}

}  // namespace

Vec SmoothMap::eval(const Vec& x) const { return eval_node(*node_, x); }
Mat SmoothMap::jacobian(const Vec& x) const { return jac_node(*node_, x); }
RigidMotion SmoothMap::rigid_reference() const { return rigid_ref_node(*node_); }
bool SmoothMap::is_rigid() const { return is_rigid_node(*node_); }

std::vector<Vec> region_grid(const Region& region, int G) {
  Vec lo, hi;
  region.bounding_box(lo, hi);
  const int n = static_cast<int>(lo.size());
  std::vector<Vec> out;
  std::vector<int> idx(n, 0);
  while (true) {
    Vec x(n);
    for (int k = 0; k < n; ++k) {
      const double f = G > 1 ? static_cast<double>(idx[k]) / (G - 1) : 0.5;
      x(k) = lo(k) + f * (hi(k) - lo(k));
    }
    if (region.contains(x)) out.push_back(std::move(x));
    int k = 0;
    while (k < n && ++idx[k] >= G) idx[k++] = 0;
    if (k == n) break;
  }
  return out;
}

CkNormReport ck_norm(const SmoothMap& f, const SmoothMap& ref,
                     const Region& region, double t, int m, int grid) {
  CkNormReport rep;
  rep.m = m;
  rep.t = t;
  rep.grid = grid;
  const int n = f.dim();
  const double h = 1e-4 * t;
  auto pts = region_grid(region, grid);
  rep.points = pts.size();
  for (const Vec& x : pts) {
    const Vec d = f.eval(x) - ref.eval(x);
    rep.term_value = std::max(rep.term_value, d.norm() / t);
    const Mat dj = f.jacobian(x) - ref.jacobian(x);
    rep.term_jac = std::max(rep.term_jac, rigid::operator_norm(dj));
    if (m >= 2) {
      for (int i = 0; i < n; ++i) {
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        const Mat dd = ((f.jacobian(xp) - ref.jacobian(xp)) -
                        (f.jacobian(xm) - ref.jacobian(xm))) /
                       (2.0 * h);
        rep.term_hess =
            std::max(rep.term_hess, t * dd.cwiseAbs().maxCoeff());
      }
    }
  }
  rep.value = std::max({rep.term_value, rep.term_jac, rep.term_hess});
  return rep;
}

double blend_constant(int m, int n, double eta, double rho1) {
  // Hhat - id = (H - id) phi with the radial quintic bump:
  //   |Hhat-id|/t            <= eps
  //   ||D(Hhat-id)||          <= eps (1 + s1/eta)
  //   t |dd(Hhat-id)|         <= eps (1 + 2 s1/eta + s2/eta^2
  //                                    + s1 (n-1)/(eta rho1))
  const double c1 = 1.0 + kSmoothstepD1 / eta;
  if (m == 1) return c1;
  const double curv = rho1 > 0 ? kSmoothstepD1 * (n - 1) / (eta * rho1) : 0.0;
  const double c2 =
      1.0 + 2.0 * kSmoothstepD1 / eta + kSmoothstepD2 / (eta * eta) + curv;
  return std::max(c1, c2);
}

BlendResult blend(const SmoothMap& H, const Vec& center, double R1, double R2,
                  double t, int m, int grid) {
  if (!(R1 < R2)) throw BlendRefused("blend: need R1 < R2");
  const double gap = R2 - R1;
  const double eta = gap / t;
  const int n = H.dim();
  BlendResult out;
  out.eta = eta;

  Region u2 = Region::ball(center, R2);
  const CkNormReport hn = ck_norm(H, SmoothMap::identity(n), u2, t, m, grid);
  out.eps = hn.value;

  // diffeomorphism certificate: predicted sup ||D(Hhat)-I||
  const double pred_d = hn.term_jac + hn.term_value * kSmoothstepD1 / eta;
  if (pred_d > 0.5)
    throw BlendRefused("blend: predicted ||D(Hhat)-I|| = " +
                       std::to_string(pred_d) + " exceeds 1/2");

  out.map = SmoothMap::blended(H, {Bump{center, R1, R2}});
  out.bound = blend_constant(m, n, eta, R1 / t) * out.eps;
  out.measured = ck_norm(out.map, SmoothMap::identity(n), u2, t, m, grid);
  return out;
}

InvertResult invert_map(const SmoothMap& f, const Region& region, double t,
                        int grid) {
  const int n = f.dim();
  const RigidMotion ref = f.rigid_reference();
  InvertResult out;
  double cert = 0.0;
  auto pts = region_grid(region, grid);
  for (const Vec& x : pts)
    cert = std::max(cert, rigid::operator_norm(f.jacobian(x) - ref.Q));
  out.certificate = cert;
  if (cert > 0.5)
    throw BlendRefused("invert_map: contraction certificate " +
                       std::to_string(cert) + " exceeds 1/2");
  out.map = SmoothMap::inverse(f, rigid::invert(ref), cert);
  for (const Vec& x : pts) {
    const Vec y = f.eval(x);
    out.residual = std::max(out.residual, (f.eval(out.map.eval(y)) - y).norm());
  }
  return out;
}

ConjugationReport conjugation_bound_check(const SmoothMap& f,
                                          const SmoothMap& f_inv,
                                          const SmoothMap& g, const Region& W,
                                          double t, int grid) {
  const int n = f.dim();
  ConjugationReport rep;
  rep.delta = ck_norm(g, SmoothMap::identity(n), W, t, 1, grid).value;
  const SmoothMap conj = SmoothMap::compose(f, SmoothMap::compose(g, f_inv));
  rep.measured = ck_norm(conj, SmoothMap::identity(n), W, t, 1, grid).value;
  double M = 0.0;
  const double h = 1e-4 * t;
  for (const Vec& x : region_grid(W, grid)) {
    M = std::max(M, rigid::operator_norm(f.jacobian(x)));
    M = std::max(M, rigid::operator_norm(f_inv.jacobian(x)));
    for (int i = 0; i < n; ++i) {
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      M = std::max(M, t * ((f.jacobian(xp) - f.jacobian(xm)) / (2 * h))
                           .cwiseAbs()
                           .maxCoeff());
      M = std::max(M, t * ((f_inv.jacobian(xp) - f_inv.jacobian(xm)) / (2 * h))
                           .cwiseAbs()
                           .maxCoeff());
    }
  }
  rep.M = std::max(1.0, M);
  rep.bound = std::max(rep.M, rep.M * rep.M * (1.0 + 2.0 * std::sqrt(n))) *
              rep.delta;
  return rep;
}

}  // namespace reifenberg::smooth
