#include "reifenberg/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "reifenberg/kernels.hpp"
#include "reifenberg/parallel.hpp"

namespace reifenberg::atlas {

using modify::IsometryFamily;
using modify::ModifyOptions;
using rigid::RigidMotion;

SmoothMap GluingAtlas::transition(std::size_t to, std::size_t from) const {
  if (to == from) return SmoothMap::identity(n);
  return transitions.map_between(to, from);
}

bool GluingAtlas::has_transition(std::size_t a, std::size_t b) const {
  return transitions.adjacent(a, b);
}

bool GluingAtlas::in_domain(std::size_t to, std::size_t from,
                            const Vec& x) const {
  if (x.norm() >= 8.0 * t) return false;
  if (to == from) return true;
  if (!has_transition(to, from)) return false;
  return transition(to, from).eval(x).norm() < 8.0 * t;
}

ManifoldPoint GluingAtlas::apply_transition(const ManifoldPoint& p,
                                            std::size_t to) const {
  if (!in_domain(to, p.chart, p.coords))
    throw std::domain_error("apply_transition: point outside Omega");
  if (to == p.chart) return p;
  return {to, transition(to, p.chart).eval(p.coords)};
}

std::size_t GluingAtlas::eval_f(const ManifoldPoint& p) const {
  std::size_t jmin = p.chart;
  Vec coords = p.coords;
  for (std::size_t nb : neighbors[p.chart]) {
    if (nb >= jmin) continue;
    if (!in_domain(nb, p.chart, p.coords)) continue;
    const Vec c = transition(nb, p.chart).eval(p.coords);
    if (c.norm() < 8.0 * t) {
      jmin = nb;
      coords = c;
    }
  }
  return charts[jmin].alpha(coords);
}

double GluingAtlas::f_spread(const ManifoldPoint& p) const {
  std::vector<std::size_t> values;
  values.push_back(charts[p.chart].alpha(p.coords));
  for (std::size_t nb : neighbors[p.chart]) {
    if (!in_domain(nb, p.chart, p.coords)) continue;
    values.push_back(charts[nb].alpha(transition(nb, p.chart).eval(p.coords)));
  }
  double spread = 0.0;
  for (std::size_t a = 0; a < values.size(); ++a)
    for (std::size_t b = a + 1; b < values.size(); ++b)
      spread = std::max(spread, space->dist(values[a], values[b]));
  return spread;
}

ManifoldPoint GluingAtlas::locate(std::size_t z) const {
  // chart of the nearest anchor
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  const double* row = space->dist_row(z);
  for (std::size_t pos = 0; pos < anchors.size(); ++pos) {
    if (row[anchors[pos]] < bd) {
      bd = row[anchors[pos]];
      best = pos;
    }
  }
  const std::size_t bp = charts[best].position(z);
  if (bp == static_cast<std::size_t>(-1))
    throw StructuralError("locate: point outside its nearest anchor chart");
  return {best, charts[best].coords.row(bp).transpose()};
}

double GluingAtlas::pu_weight(std::size_t j, std::size_t j0,
                              const Vec& x) const {
  // radial quintic supported on B_8t per chart, normalized over containers
  auto raw = [&](std::size_t k) -> double {
    if (!(k == j0 || has_transition(k, j0))) return 0.0;
    const Vec y = k == j0 ? x : transition(k, j0).eval(x);
    const double rho = y.norm() / (8.0 * t);
    if (rho >= 1.0) return 0.0;
    return smooth::smoothstep5(1.0 - rho);
  };
  double wj = raw(j);
  if (wj == 0.0) return 0.0;
  double total = raw(j0);
  for (std::size_t nb : neighbors[j0]) total += raw(nb);
  return total > 0 ? wj / total : 0.0;
}

std::optional<double> GluingAtlas::chart_distance(const ManifoldPoint& p,
                                                  const ManifoldPoint& q) const {
  // find the minimal common chart containing both
  auto candidates = [&](const ManifoldPoint& m) {
    std::vector<std::size_t> out{m.chart};
    for (std::size_t nb : neighbors[m.chart])
      if (in_domain(nb, m.chart, m.coords)) out.push_back(nb);
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto cp = candidates(p);
  const auto cq = candidates(q);
  std::vector<std::size_t> common;
  std::set_intersection(cp.begin(), cp.end(), cq.begin(), cq.end(),
                        std::back_inserter(common));
  if (common.empty()) return std::nullopt;
  const std::size_t j = common.front();
  const Vec xp = j == p.chart ? p.coords : transition(j, p.chart).eval(p.coords);
  const Vec xq = j == q.chart ? q.coords : transition(j, q.chart).eval(q.coords);
  const Vec d = xq - xp;
  const double len = d.norm();
  if (len == 0.0) return 0.0;
  // partition-of-unity metric factor at the midpoint
  const Vec mid = 0.5 * (xp + xq);
  const Vec u = d / len;
  double quad = 0.0, wsum = 0.0;
  auto add = [&](std::size_t k) {
    const double w = pu_weight(k, j, mid);
    if (w <= 0.0) return;
    const Vec v = k == j ? u : (transition(k, j).jacobian(mid) * u).eval();
    quad += w * v.squaredNorm();
    wsum += w;
  };
  add(j);
  for (std::size_t nb : neighbors[j]) add(nb);
  const double factor = wsum > 0 ? std::sqrt(quad / wsum) : 1.0;
  return len * factor;
}

double GluingAtlas::pseudo_distance(const ManifoldPoint& p,
                                    const ManifoldPoint& q) const {
  const auto di = chart_distance(p, q);
  if (di && *di <= 2.0 * t) return *di;
  return space->dist(eval_f(p), eval_f(q));
}

namespace {

GluingAtlas build_core(const FiniteMetricSpace& space, int n, double r,
                       int scale_i, double t, double chart_radius,
                       std::vector<std::size_t> anchors,
                       std::vector<int> anchor_class,
                       std::vector<gh::Chart> charts,
                       std::vector<PairFit> fits, const BuildConfig& cfg) {
  GluingAtlas A;
  A.space = &space;
  A.scale_i = scale_i;
  A.n = n;
  A.r = r;
  A.t = t;
  A.chart_radius = chart_radius;
  A.anchors = std::move(anchors);
  A.anchor_class = std::move(anchor_class);
  A.charts = std::move(charts);
  A.pair_fits = std::move(fits);

  A.neighbors.assign(A.anchors.size(), {});
  IsometryFamily fam;
  fam.count = A.anchors.size();
  fam.cls = A.anchor_class;
  fam.num_classes = 0;
  for (int c : A.anchor_class) fam.num_classes = std::max(fam.num_classes, c + 1);
  fam.t = t;
  for (const auto& pf : A.pair_fits) {
    fam.maps[{pf.a, pf.b}] = pf.rigid;
    A.neighbors[pf.a].push_back(pf.b);
    A.neighbors[pf.b].push_back(pf.a);
    A.eps_fit = std::max(A.eps_fit, pf.residual / t);
  }
  for (auto& nb : A.neighbors) std::sort(nb.begin(), nb.end());

  ModifyOptions mop;
  mop.tml_N = cfg.tml_N;
  mop.grid = cfg.grid;
  mop.check_grid = cfg.check_grid;
  mop.random_probes = cfg.random_probes;
  mop.seed = cfg.seed;
  mop.exactness_tol = cfg.exactness_tol;
  try {
    A.transitions = modify::modify_family(fam, mop);
  } catch (const modify::StructuralError& e) {
    throw StructuralError(std::string("atlas gluing failed: ") + e.what());
  }
  A.beta_defect = A.transitions.beta;
  A.cocyclicity = A.transitions.final_residual;

  // transition Jacobian spread; rigid maps contribute exactly 0
  double sigma = 0.0;
  for (const auto& [key, st] : A.transitions.maps) {
    if (st.map.is_rigid()) continue;
    for (const Vec& x :
         smooth::region_grid(smooth::Region::ball(Vec::Zero(n), 8.0 * t),
                             cfg.check_grid)) {
      if (x.norm() >= 8.0 * t) continue;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(st.map.jacobian(x));
      for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k)
        sigma = std::max(sigma, std::fabs(svd.singularValues()(k) - 1.0));
    }
  }
  A.sigma = sigma;

  // Hausdorff condition: Omega domains are exact preimages of the open 8t
  // ball under global diffeomorphisms, so the boundary-to-boundary condition
  // holds analytically. The probe-level regression check lives in the tests;
  // here we record the worst just-outside image shortfall (0 = clean).
  double margin = 0.0;
  for (const auto& [key, st] : A.transitions.maps) {
    if (st.map.is_rigid()) continue;
    for (const Vec& x :
         smooth::region_grid(smooth::Region::ball(Vec::Zero(n), 8.0 * t),
                             cfg.check_grid)) {
      if (x.norm() >= 8.0 * t) continue;
      const double img = st.map.eval(x).norm();
      if (img >= 8.0 * t)  // outside Omega: must not undershoot the sphere
        margin = std::min(margin, img - 8.0 * t);
    }
  }
  A.hausdorff_margin = margin;

  // connectivity of the overlap graph (pairs with nonempty Omega)
  std::vector<std::size_t> parent(A.anchors.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [key, st] : A.transitions.maps) {
    const RigidMotion ref = st.map.rigid_reference();
    if (ref.v.norm() < 16.0 * t)
      parent[find(key.first)] = find(key.second);
  }
  A.connected = true;
  for (std::size_t i = 1; i < parent.size(); ++i)
    if (find(i) != find(0)) {
      A.connected = false;
      break;
    }

  // canonical manifold representative per space point + coverage defect
  A.canonical.resize(space.size());
  std::vector<double> cover(space.size(), 0.0);
  parallel_for(space.size(), [&](std::size_t z) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    const double* row = space.dist_row(z);
    for (std::size_t pos = 0; pos < A.anchors.size(); ++pos)
      if (row[A.anchors[pos]] < bd) {
        bd = row[A.anchors[pos]];
        best = pos;
      }
    const std::size_t bp = A.charts[best].position(z);
    if (bp == static_cast<std::size_t>(-1)) {
      cover[z] = std::numeric_limits<double>::infinity();
      return;
    }
    A.canonical[z] = {best, A.charts[best].coords.row(bp).transpose()};
    cover[z] = A.canonical[z].coords.norm();
  });
  for (double c : cover) A.coverage_defect = std::max(A.coverage_defect, c);
  if (!std::isfinite(A.coverage_defect))
    throw StructuralError("atlas: sample point escapes every chart");

  // minimal-chart well-definedness of f_i on the canonical sample
  std::vector<double> spread(space.size(), 0.0);
  parallel_for(space.size(), [&](std::size_t z) {
    spread[z] = A.f_spread(A.canonical[z]);
  });
  for (double s : spread) A.f_welldef = std::max(A.f_welldef, s);
  return A;
}

}  // namespace

GluingAtlas build_atlas(const FiniteMetricSpace& space,
                        const gh::FlatnessProfile& flatness, int i,
                        const BuildConfig& cfg) {
  if (i < 0 || static_cast<std::size_t>(i) >= flatness.scales.size())
    throw StructuralError("build_atlas: scale outside the flatness profile");
  const int n = flatness.n;
  const double r = flatness.r;
  const double scale_radius = std::ldexp(r, -i);
  const double fill = space.fill_distance();
  // paper-normalized unit: charts at 200t = 2^-i r exactly
  const double t = scale_radius / 200.0;
  // below the sample resolution the net degenerates to the whole sample;
  // flagged, every quantity still measured
  const bool floored = fill > t;
  const double chart_radius = 200.0 * t;
  const bool capped = false;

  const double adjacency = cfg.adjacency_factor * t;
  const double fit_radius =
      std::min(45.0 * t, chart_radius - adjacency - 2.0 * t);

  core::Net net = build_net(space, cfg.net_density_factor * t);
  core::Coloring coloring = color_net(space, net, cfg.coloring_factor * t);

  std::vector<std::size_t> anchors = net.member_indices;
  std::vector<int> anchor_class(anchors.size(), -1);
  for (std::size_t ci = 0; ci < coloring.classes.size(); ++ci)
    for (std::size_t m : coloring.classes[ci]) {
      auto it = std::lower_bound(anchors.begin(), anchors.end(), m);
      anchor_class[it - anchors.begin()] = static_cast<int>(ci);
    }

  std::vector<gh::Chart> charts(anchors.size());
  parallel_for(anchors.size(), [&](std::size_t pos) {
    charts[pos] =
        gh::make_chart(space, anchors[pos], chart_radius, n, false, 76.0 * t);
  });

  // fit transitions on pairs of nearby anchors
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const double* row = space.dist_row(anchors[a]);
    for (std::size_t b = a + 1; b < anchors.size(); ++b)
      if (row[anchors[b]] < adjacency) pairs.emplace_back(a, b);
  }
  std::vector<PairFit> fits(pairs.size());
  std::vector<char> usable(pairs.size(), 1);
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [a, b] = pairs[k];
    PairFit pf;
    pf.a = a;
    pf.b = b;
    std::vector<rigid::Vec> pts, imgs;
    std::size_t anchor_sample = 0;
    const auto ball = space.ball(anchors[a], fit_radius);
    for (std::size_t p : ball) {
      const std::size_t pa = charts[a].position(p);
      const std::size_t pb = charts[b].position(p);
      if (pa == static_cast<std::size_t>(-1) ||
          pb == static_cast<std::size_t>(-1))
        continue;
      if (p == anchors[a]) anchor_sample = pts.size();
      pts.push_back(charts[a].coords.row(pa).transpose());
      imgs.push_back(charts[b].coords.row(pb).transpose());
    }
    if (pts.size() < static_cast<std::size_t>(n) + 1) {
      usable[k] = 0;
      return;
    }
    const auto fit = rigid::fit_isometry(pts, imgs, anchor_sample, t);
    pf.rigid = fit.motion;
    pf.residual = fit.residual;
    pf.samples = pts.size();
    pf.degenerate = fit.degenerate;
    fits[k] = pf;
  });
  std::vector<PairFit> kept;
  for (std::size_t k = 0; k < fits.size(); ++k)
    if (usable[k]) kept.push_back(fits[k]);

  GluingAtlas A =
      build_core(space, n, r, i, t, chart_radius, std::move(anchors),
                 std::move(anchor_class), std::move(charts), std::move(kept),
                 cfg);
  A.resolution_floored = floored;
  A.chart_capped = capped;
  A.fit_radius = fit_radius;
  A.adjacency_radius = adjacency;
  A.defect_radius = std::min(12.0 * t, fit_radius);
  A.net = std::move(net);
  A.coloring = std::move(coloring);
  return A;
}

GluingAtlas build_atlas_from_gluing_data(
    const FiniteMetricSpace& space, int n, double r, double t,
    const std::vector<std::size_t>& anchors, const std::vector<int>& classes,
    const std::vector<PairFit>& fits, double chart_radius,
    const BuildConfig& cfg) {
  std::vector<gh::Chart> charts(anchors.size());
  parallel_for(anchors.size(), [&](std::size_t pos) {
    charts[pos] =
        gh::make_chart(space, anchors[pos], chart_radius, n, false, 76.0 * t);
  });
  GluingAtlas A = build_core(space, n, r, 0, t, chart_radius, anchors, classes,
                             std::move(charts), fits, cfg);
  A.fit_radius = std::min(45.0 * t, chart_radius);
  A.adjacency_radius = cfg.adjacency_factor * t;
  A.defect_radius = 12.0 * t;
  return A;
}

IntrinsicDistanceResult intrinsic_distance(const GluingAtlas& atlas,
                                           const ManifoldPoint& p,
                                           const ManifoldPoint& q) {
  IntrinsicDistanceResult out;
  const std::size_t N = atlas.space->size();
  // nodes: canonical points, plus p (N) and q (N+1)
  auto node_point = [&](std::size_t id) -> const ManifoldPoint& {
    if (id == N) return p;
    if (id == N + 1) return q;
    return atlas.canonical[id];
  };
  const double reach = 3.0 * atlas.t;
  double max_edge = 0.0;
  std::vector<double> dist(N + 2, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[N] = 0.0;
  heap.push({0.0, N});
  while (!heap.empty()) {
    const auto [d0, u] = heap.top();
    heap.pop();
    if (d0 > dist[u]) continue;
    if (u == N + 1) break;
    const ManifoldPoint& mu = node_point(u);
    for (std::size_t v = 0; v < N + 2; ++v) {
      if (v == u) continue;
      const ManifoldPoint& mv = node_point(v);
      const auto cd = atlas.chart_distance(mu, mv);
      if (!cd || *cd > reach) continue;
      max_edge = std::max(max_edge, *cd);
      if (dist[u] + *cd < dist[v]) {
        dist[v] = dist[u] + *cd;
        heap.push({dist[v], v});
      }
    }
  }
  out.value = dist[N + 1];
  out.connected = std::isfinite(out.value);
  const double rel = atlas.sigma + std::pow(max_edge / (4.0 * atlas.t), 2);
  out.mesh_tolerance = out.connected ? rel * out.value : 0.0;
  return out;
}

}  // namespace reifenberg::atlas
