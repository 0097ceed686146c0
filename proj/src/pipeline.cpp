#include "reifenberg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "reifenberg/io.hpp"
#include "reifenberg/kernels.hpp"
#include "reifenberg/parallel.hpp"

namespace reifenberg::pipeline {

double TowerState::tail_product(int k) const {
  double prod = 1.0;
  for (int i = std::max(k, m); i < depth; ++i) {
    const double ei = eps_hat[i - m];
    const double ei1 = eps_hat[i + 1 - m];
    prod *= 1.0 + prop_b_constant * (ei + ei1);
  }
  return prod;
}

TowerState run_tower(const FiniteMetricSpace& space, double r, int n, int m,
                     int depth, const TowerConfig& cfg) {
  if (m < 0 || depth < m) throw core::InvalidInput("run_tower: bad scales");
  TowerState tw;
  tw.space = &space;
  tw.r = r;
  tw.n = n;
  tw.m = m;
  tw.depth = depth;
  tw.flatness = gh::flatness_profile(space, r, n, depth);

  for (int i = m; i <= depth; ++i) {
    atlas::BuildConfig bc = cfg.build;
    bc.seed = cfg.seed + static_cast<std::uint64_t>(i);
    tw.atlases.push_back(atlas::build_atlas(space, tw.flatness, i, bc));
    const auto& A = tw.atlases.back();
    double eps = std::max({A.eps_fit, A.beta_defect, A.sigma});
    if (tw.flatness.certified(i))
      eps = std::max(eps, tw.flatness.scales[i].eps);
    tw.eps_hat.push_back(std::max(eps, 1e-12));  // resolution-floored
  }
  tw.theta_m = *std::max_element(tw.eps_hat.begin(), tw.eps_hat.end());

  for (int i = m; i < depth; ++i) {
    tw.links.push_back(refine::build_refinement_charts(
        tw.at(i), tw.at(i + 1), cfg.grid));
    refine::PatchOptions po;
    po.grid = cfg.grid;
    po.seed = cfg.seed;
    tw.maps.push_back(refine::patch_immersion(tw.links.back(), po));
  }

  // trajectories of the canonical sample through the tower
  tw.trajectory.assign(space.size(), {});
  tw.increments.assign(std::max(0, depth - m), 0.0);
  std::vector<double> incs(space.size(), 0.0);
  parallel_for(space.size(), [&](std::size_t z) {
    std::vector<ManifoldPoint> traj;
    traj.push_back(tw.at(m).canonical[z]);
    for (int i = m; i < depth; ++i)
      traj.push_back(tw.maps[i - m].apply(traj.back(),
                                          tw.at(i + 1).canonical[z].chart));
    tw.trajectory[z] = std::move(traj);
  });
  for (int i = m; i < depth; ++i) {
    double worst = 0.0;
    for (std::size_t z = 0; z < space.size(); ++z) {
      const std::size_t fi = tw.at(i).eval_f(tw.trajectory[z][i - m]);
      const std::size_t fi1 = tw.at(i + 1).eval_f(tw.trajectory[z][i + 1 - m]);
      worst = std::max(worst, space.dist(fi, fi1));
    }
    tw.increments[i - m] = worst;
  }

  // property-b constant measured on sampled pairs, then the Holder exponent
  double cb = 1.0;
  if (depth > m) {
    std::mt19937_64 rng(cfg.seed + 777);
    std::uniform_int_distribution<std::size_t> pick(0, space.size() - 1);
    for (int i = m; i < depth; ++i) {
      const auto& A = tw.at(i);
      const auto& B = tw.at(i + 1);
      const double denom = tw.eps_hat[i - m] + tw.eps_hat[i + 1 - m];
      for (std::size_t s = 0; s < std::min<std::size_t>(400, cfg.probe_pairs);
           ++s) {
        const std::size_t a = pick(rng), b = pick(rng);
        if (a == b) continue;
        const double ra =
            A.pseudo_distance(tw.trajectory[a][i - m], tw.trajectory[b][i - m]);
        const double rb = B.pseudo_distance(tw.trajectory[a][i + 1 - m],
                                            tw.trajectory[b][i + 1 - m]);
        if (ra <= 0 || rb <= 0) continue;
        const double dev = std::max(rb / ra, ra / rb) - 1.0;
        cb = std::max(cb, dev / std::max(denom, 1e-300));
      }
    }
  }
  tw.prop_b_constant = cb;
  tw.holder_alpha = std::log2(1.0 + 2.0 * cb * tw.theta_m);
  return tw;
}

namespace {

struct PairSample {
  std::size_t a, b;
};

std::vector<PairSample> probe_pairs(const FiniteMetricSpace& space,
                                    const GluingAtlas& A, std::size_t global,
                                    std::uint64_t seed) {
  std::vector<PairSample> pairs;
  // all pairs within one chart (over the canonical sample), capped per chart
  std::vector<std::vector<std::size_t>> per_chart(A.chart_count());
  for (std::size_t z = 0; z < space.size(); ++z)
    per_chart[A.canonical[z].chart].push_back(z);
  for (const auto& members : per_chart) {
    const std::size_t cap = 40;
    for (std::size_t i = 0; i < std::min(members.size(), cap); ++i)
      for (std::size_t j = i + 1; j < std::min(members.size(), cap); ++j)
        pairs.push_back({members[i], members[j]});
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, space.size() - 1);
  for (std::size_t k = 0; k < global; ++k) {
    const std::size_t a = pick(rng), b = pick(rng);
    if (a != b) pairs.push_back({a, b});
  }
  return pairs;
}

}  // namespace

const Criterion* CertificationReport::find(const std::string& name) const {
  for (const auto& c : criteria)
    if (c.name == name) return &c;
  return nullptr;
}

CertificationReport certify(const TowerState& tower, const TowerConfig& cfg) {
  const FiniteMetricSpace& space = *tower.space;
  CertificationReport rep;
  rep.holder_alpha = tower.holder_alpha;
  rep.lipschitz_tail = tower.tail_product(tower.m);

  // a) rho/d coincidence below the unit
  {
    Criterion c;
    c.name = "a-coincidence";
    c.threshold = 0.0;
    double worst = 0.0;
    for (int i = tower.m; i <= tower.depth; ++i) {
      const auto& A = tower.at(i);
      const auto pairs = probe_pairs(space, A, 500, cfg.seed + i);
      for (const auto& [a, b] : pairs) {
        const auto& pa = tower.trajectory[a][i - tower.m];
        const auto& pb = tower.trajectory[b][i - tower.m];
        const double rho = A.pseudo_distance(pa, pb);
        if (rho > A.t) continue;
        const auto di = A.chart_distance(pa, pb);
        ++c.probes;
        if (!di) {
          worst = std::numeric_limits<double>::infinity();
          c.witness = "rho small but no common chart, scale " +
                      std::to_string(i);
          continue;
        }
        worst = std::max(worst, std::fabs(rho - *di));
        c.threshold = std::max(c.threshold, 1e-9 * A.t);
      }
    }
    c.value = worst;
    c.pass = worst <= c.threshold;
    if (!c.pass && c.witness.empty()) c.witness = "coincidence residual";
    rep.criteria.push_back(c);
  }

  // b) rho bi-Lipschitz ratios of h_i (measured constant echoed)
  {
    Criterion c;
    c.name = "b-bilipschitz";
    double worst = 0.0;
    for (int i = tower.m; i < tower.depth; ++i) {
      const auto& A = tower.at(i);
      const auto& B = tower.at(i + 1);
      const double denom =
          tower.eps_hat[i - tower.m] + tower.eps_hat[i + 1 - tower.m];
      const auto pairs = probe_pairs(space, A, 500, cfg.seed + 31 + i);
      for (const auto& [a, b] : pairs) {
        const double ra = A.pseudo_distance(tower.trajectory[a][i - tower.m],
                                            tower.trajectory[b][i - tower.m]);
        const double rb =
            B.pseudo_distance(tower.trajectory[a][i + 1 - tower.m],
                              tower.trajectory[b][i + 1 - tower.m]);
        if (ra <= 0 || rb <= 0) continue;
        ++c.probes;
        worst = std::max(worst, (std::max(ra / rb, rb / ra) - 1.0) / denom);
      }
    }
    c.value = worst;
    c.threshold = std::max(1.0, tower.prop_b_constant) * (1.0 + 1e-9);
    c.pass = tower.depth == tower.m || worst <= c.threshold;
    if (!c.pass) c.witness = "ratio outside the measured constant";
    rep.criteria.push_back(c);
  }

  // c) f_i vs rho_i residual within charts
  {
    Criterion c;
    c.name = "c-f-vs-rho";
    double worst_scaled = 0.0;
    for (int i = tower.m; i <= tower.depth; ++i) {
      const auto& A = tower.at(i);
      const double scale =
          std::max(tower.eps_hat[i - tower.m], 1e-12) * A.t;
      const auto pairs = probe_pairs(space, A, 0, cfg.seed + 77 + i);
      for (const auto& [a, b] : pairs) {
        const auto& pa = tower.trajectory[a][i - tower.m];
        const auto& pb = tower.trajectory[b][i - tower.m];
        const double rho = A.pseudo_distance(pa, pb);
        const double df = space.dist(A.eval_f(pa), A.eval_f(pb));
        ++c.probes;
        worst_scaled = std::max(worst_scaled, std::fabs(df - rho) / scale);
      }
    }
    // the measured constant of property c); sanity threshold guards faults
    c.value = worst_scaled;
    c.threshold = 2000.0;
    c.pass = worst_scaled <= c.threshold;
    if (!c.pass) c.witness = "f_i drifts from rho_i beyond any C eps bound";
    rep.criteria.push_back(c);
  }

  // d) displacement of h_i
  {
    Criterion c;
    c.name = "d-displacement";
    double worst = 0.0;
    for (int i = tower.m; i < tower.depth; ++i) {
      const auto& A = tower.at(i);
      worst = std::max(worst, tower.increments[i - tower.m] / A.t);
      ++c.probes;
    }
    c.value = worst;
    c.threshold = 40.0;
    c.pass = tower.depth == tower.m || worst <= c.threshold;
    if (!c.pass) c.witness = "h_i moves points beyond C 2^-i (eps+eps')";
    rep.criteria.push_back(c);
  }

  // e) 20 * unit density of f_i images
  {
    Criterion c;
    c.name = "e-density";
    double worst = 0.0;
    for (int i = tower.m; i <= tower.depth; ++i) {
      const auto& A = tower.at(i);
      std::vector<std::size_t> image(space.size());
      for (std::size_t z = 0; z < space.size(); ++z)
        image[z] = A.eval_f(tower.trajectory[z][i - tower.m]);
      std::sort(image.begin(), image.end());
      image.erase(std::unique(image.begin(), image.end()), image.end());
      const double defect = core::density_defect(space, image);
      ++c.probes;
      worst = std::max(worst, defect / (20.0 * A.t));
      if (defect > 20.0 * A.t && c.witness.empty())
        c.witness = "density defect at scale " + std::to_string(i);
    }
    c.value = worst;
    c.threshold = 1.0;
    c.pass = worst <= 1.0;
    rep.criteria.push_back(c);
  }

  // transition compatibility (the glue that fault injection breaks)
  {
    Criterion c;
    c.name = "transition-cocyclicity";
    double worst = 0.0;
    for (int i = tower.m; i <= tower.depth; ++i) {
      const auto& A = tower.at(i);
      const double res = modify::family_compatibility_residual(
          A.transitions, cfg.build.check_grid, cfg.build.random_probes,
          cfg.seed + 13 + i);
      worst = std::max(worst, res / A.t);
      ++c.probes;
    }
    c.value = worst;
    c.threshold = 1e-9;
    c.pass = worst <= c.threshold;
    if (!c.pass) c.witness = "transition triple fails 8t-cocyclicity";
    rep.criteria.push_back(c);
  }

  // Holder sandwich on close pairs (finite-depth F = F_depth)
  {
    Criterion c;
    c.name = "holder-sandwich";
    const auto& Am = tower.at(tower.m);
    const double unit = Am.t;
    const double alpha = std::min(0.99, tower.holder_alpha);
    const auto pairs = probe_pairs(space, Am, cfg.probe_pairs, cfg.seed + 99);
    bool ok = true;
    double worst_ratio = 0.0;
    for (const auto& [a, b] : pairs) {
      const double d0 = Am.pseudo_distance(tower.trajectory[a][0],
                                           tower.trajectory[b][0]);
      if (d0 <= 0 || d0 > unit) continue;
      const std::size_t Fa = tower.at(tower.depth).eval_f(
          tower.trajectory[a][tower.depth - tower.m]);
      const std::size_t Fb = tower.at(tower.depth).eval_f(
          tower.trajectory[b][tower.depth - tower.m]);
      const double dinf = space.dist(Fa, Fb);
      if (dinf <= 0) continue;
      ++c.probes;
      const double s0 = d0 / unit;
      const double si = dinf / unit;
      const double hi = 4.0 * std::pow(s0, 1.0 - alpha);
      const double lo = 0.25 * std::pow(s0, 1.0 / (1.0 - alpha));
      worst_ratio = std::max({worst_ratio, si / hi, lo / std::max(si, 1e-300)});
      if (si > hi * (1 + 1e-9) || si < lo * (1 - 1e-9)) {
        ok = false;
        if (c.witness.empty())
          c.witness = "pair " + std::to_string(a) + "," + std::to_string(b);
      }
    }
    c.value = worst_ratio;
    c.threshold = 1.0;
    c.pass = ok;
    rep.criteria.push_back(c);
    rep.holder_alpha = alpha;
  }

  // (1+eps) bi-Lipschitz sandwich from the measured tail product
  {
    Criterion c;
    c.name = "lipschitz-sandwich";
    const auto& Am = tower.at(tower.m);
    const double unit = Am.t;
    const double tail = tower.tail_product(tower.m);
    const double slack =
        tail * (1.0 + 2.0 * Am.sigma + 1e-6) *
        (1.0 + tower.theta_m * 50.0);  // mesh + f_i quasi-isometry slack
    const auto pairs = probe_pairs(space, Am, cfg.probe_pairs, cfg.seed + 123);
    bool ok = true;
    double worst = 0.0;
    for (const auto& [a, b] : pairs) {
      const double d0 = Am.pseudo_distance(tower.trajectory[a][0],
                                           tower.trajectory[b][0]);
      if (d0 <= 0 || d0 > unit) continue;
      const std::size_t Fa = tower.at(tower.depth).eval_f(
          tower.trajectory[a][tower.depth - tower.m]);
      const std::size_t Fb = tower.at(tower.depth).eval_f(
          tower.trajectory[b][tower.depth - tower.m]);
      const double dinf = space.dist(Fa, Fb);
      if (dinf <= 0) continue;
      ++c.probes;
      const double ratio = std::max(dinf / d0, d0 / dinf);
      worst = std::max(worst, ratio);
      if (ratio > slack * (1 + 1e-9)) {
        ok = false;
        if (c.witness.empty())
          c.witness = "pair " + std::to_string(a) + "," + std::to_string(b);
      }
    }
    c.value = worst;
    c.threshold = slack;
    c.pass = ok;
    rep.criteria.push_back(c);
  }

  // global distortion of F against rho_m over every probe pair
  {
    Criterion c;
    c.name = "f-global-ratio";
    const auto& Am = tower.at(tower.m);
    const auto pairs = probe_pairs(space, Am, cfg.probe_pairs, cfg.seed + 201);
    double worst = 0.0;
    for (const auto& [a, b] : pairs) {
      const double d0 = Am.pseudo_distance(tower.trajectory[a][0],
                                           tower.trajectory[b][0]);
      if (d0 <= 0) continue;
      const std::size_t Fa = tower.at(tower.depth).eval_f(
          tower.trajectory[a][tower.depth - tower.m]);
      const std::size_t Fb = tower.at(tower.depth).eval_f(
          tower.trajectory[b][tower.depth - tower.m]);
      const double dinf = space.dist(Fa, Fb);
      if (dinf <= 0) continue;
      ++c.probes;
      worst = std::max(worst, std::max(dinf / d0, d0 / dinf) - 1.0);
    }
    c.value = worst;
    c.threshold = std::max(1e-6, 50.0 * tower.theta_m);
    c.pass = worst <= c.threshold;
    if (!c.pass) c.witness = "distance ratio drifts beyond the measured slack";
    rep.criteria.push_back(c);
  }

  // surjectivity defect of F
  {
    std::vector<std::size_t> image(space.size());
    for (std::size_t z = 0; z < space.size(); ++z)
      image[z] = tower.at(tower.depth).eval_f(
          tower.trajectory[z][tower.depth - tower.m]);
    std::sort(image.begin(), image.end());
    image.erase(std::unique(image.begin(), image.end()), image.end());
    rep.surjectivity_defect = core::density_defect(space, image);
  }

  rep.pass = true;
  for (const auto& c : rep.criteria) rep.pass = rep.pass && c.pass;
  std::ostringstream cfgs;
  cfgs << "r=" << tower.r << " n=" << tower.n << " m=" << tower.m
       << " depth=" << tower.depth << " seed=" << cfg.seed
       << " kernels=" << kernels::active_kernel_name();
  rep.config_echo = cfgs.str();
  return rep;
}

SharedAtlasResult shared_atlas(const FiniteMetricSpace& space1,
                               const FiniteMetricSpace& space2,
                               const std::vector<std::size_t>& phi_fwd,
                               const std::vector<std::size_t>& phi_bwd,
                               double delta, double r, int n,
                               const TowerConfig& cfg) {
  SharedAtlasResult out;
  const double t = r / 200.0;

  // round trips within delta
  double rt = 0.0;
  for (std::size_t z = 0; z < space1.size(); ++z)
    rt = std::max(rt, space1.dist(phi_bwd[phi_fwd[z]], z));
  for (std::size_t y = 0; y < space2.size(); ++y)
    rt = std::max(rt, space2.dist(phi_fwd[phi_bwd[y]], y));
  out.roundtrip_defect = rt;
  if (rt >= delta) {
    out.failed_check = "roundtrip";
    return out;
  }

  // strengthened net on space1: 1/2-dense (unit t), classes 101-separated
  core::Net net = build_net(space1, 0.5 * t);
  core::Coloring col = color_net(space1, net, 101.0 * t);
  std::vector<std::size_t> anchors1 = net.member_indices;
  std::vector<int> classes(anchors1.size(), -1);
  for (std::size_t ci = 0; ci < col.classes.size(); ++ci)
    for (std::size_t mbr : col.classes[ci]) {
      auto it = std::lower_bound(anchors1.begin(), anchors1.end(), mbr);
      classes[it - anchors1.begin()] = static_cast<int>(ci);
    }

  // transported net: 1-density and 100-separation in space2
  std::vector<std::size_t> anchors2(anchors1.size());
  for (std::size_t k = 0; k < anchors1.size(); ++k)
    anchors2[k] = phi_fwd[anchors1[k]];
  out.transported_density = core::density_defect(space2, anchors2);
  if (out.transported_density > 1.0 * t) {
    out.failed_check = "transported-density";
    return out;
  }
  double min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t ci = 0; ci < col.classes.size(); ++ci) {
    const auto& cl = col.classes[ci];
    for (std::size_t i = 0; i < cl.size(); ++i)
      for (std::size_t j = i + 1; j < cl.size(); ++j)
        min_sep = std::min(min_sep,
                           space2.dist(phi_fwd[cl[i]], phi_fwd[cl[j]]));
  }
  out.separation_slack = min_sep - 100.0 * t;
  if (std::isfinite(min_sep) && min_sep < 100.0 * t) {
    out.failed_check = "transported-separation";
    return out;
  }

  // charts on space1 and the shared isometry set (adjacency < 29.5 t)
  const double chart_radius = std::min(200.0 * t, r);
  std::vector<gh::Chart> charts1(anchors1.size());
  parallel_for(anchors1.size(), [&](std::size_t k) {
    charts1[k] =
        gh::make_chart(space1, anchors1[k], chart_radius, n, false, 76.0 * t);
  });
  const double adjacency = 29.5 * t;
  std::vector<atlas::PairFit> fits;
  for (std::size_t a = 0; a < anchors1.size(); ++a) {
    const double* row = space1.dist_row(anchors1[a]);
    for (std::size_t b = a + 1; b < anchors1.size(); ++b) {
      if (row[anchors1[b]] >= adjacency) continue;
      std::vector<rigid::Vec> pts, imgs;
      std::size_t anchor_sample = 0;
      const double fit_r = std::min(45.0 * t, chart_radius - adjacency - t);
      for (std::size_t p : space1.ball(anchors1[a], fit_r)) {
        const std::size_t pa = charts1[a].position(p);
        const std::size_t pb = charts1[b].position(p);
        if (pa == static_cast<std::size_t>(-1) ||
            pb == static_cast<std::size_t>(-1))
          continue;
        if (p == anchors1[a]) anchor_sample = pts.size();
        pts.push_back(charts1[a].coords.row(pa).transpose());
        imgs.push_back(charts1[b].coords.row(pb).transpose());
      }
      if (pts.size() < static_cast<std::size_t>(n) + 1) continue;
      atlas::PairFit pf;
      pf.a = a;
      pf.b = b;
      const auto fit = rigid::fit_isometry(pts, imgs, anchor_sample, t);
      pf.rigid = fit.motion;
      pf.residual = fit.residual;
      pf.samples = pts.size();
      fits.push_back(pf);
    }
  }

  // transported charts: beta~_j := beta_j o Phi_*; verify the isometry
  // closeness on space2 samples within B_45t
  double closeness = 0.0;
  for (const auto& pf : fits) {
    const std::size_t ya = anchors2[pf.a];
    const double fit_r = std::min(45.0 * t, chart_radius - adjacency - t);
    for (std::size_t q : space2.ball(ya, fit_r)) {
      const std::size_t p = phi_bwd[q];
      const std::size_t pa = charts1[pf.a].position(p);
      const std::size_t pb = charts1[pf.b].position(p);
      if (pa == static_cast<std::size_t>(-1) ||
          pb == static_cast<std::size_t>(-1))
        continue;
      const rigid::Vec xa = charts1[pf.a].coords.row(pa).transpose();
      const rigid::Vec xb = charts1[pf.b].coords.row(pb).transpose();
      closeness = std::max(closeness, (pf.rigid.apply(xa) - xb).norm());
    }
  }
  out.isom_closeness = closeness;
  if (closeness > 0.5 * t) {  // admissibility: must stay well below the unit
    out.failed_check = "isometry-closeness";
    return out;
  }

  // both builds from the identical gluing data
  atlas::BuildConfig bc = cfg.build;
  bc.adjacency_factor = 29.5;
  out.atlas1 = atlas::build_atlas_from_gluing_data(
      space1, n, r, t, anchors1, classes, fits, chart_radius, bc);
  out.atlas2 = atlas::build_atlas_from_gluing_data(
      space2, n, r, t, anchors2, classes, fits, chart_radius, bc);

  out.identical_structure =
      out.atlas1.anchor_class == out.atlas2.anchor_class &&
      out.atlas1.transitions.maps.size() == out.atlas2.transitions.maps.size();
  if (out.identical_structure) {
    for (auto it1 = out.atlas1.transitions.maps.begin(),
              it2 = out.atlas2.transitions.maps.begin();
         it1 != out.atlas1.transitions.maps.end(); ++it1, ++it2)
      if (it1->first != it2->first) {
        out.identical_structure = false;
        break;
      }
  }
  if (out.identical_structure) {
    out.identical_maps = true;
    for (auto it1 = out.atlas1.transitions.maps.begin(),
              it2 = out.atlas2.transitions.maps.begin();
         it1 != out.atlas1.transitions.maps.end(); ++it1, ++it2) {
      if (io::smooth_map_to_json(it1->second.map).dump() !=
          io::smooth_map_to_json(it2->second.map).dump()) {
        out.identical_maps = false;
        break;
      }
    }
  }
  out.admissible = true;
  return out;
}

}  // namespace reifenberg::pipeline
