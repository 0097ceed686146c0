#include "reifenberg/refine.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "reifenberg/parallel.hpp"

namespace reifenberg::refine {

using atlas::StructuralError;
using smooth::Bump;
using smooth::Region;

RefinementCharts build_refinement_charts(const GluingAtlas& coarse,
                                         const GluingAtlas& fine, int grid) {
  RefinementCharts rc;
  rc.coarse = &coarse;
  rc.fine = &fine;
  const int n = coarse.n;
  const double tc = coarse.t;
  const auto& space = *coarse.space;

  rc.links.resize(fine.chart_count());
  parallel_for(fine.chart_count(), [&](std::size_t j) {
    RefinementLink link;
    link.fine_chart = j;
    const std::size_t fa = fine.anchor_point(j);
    // minimal coarse index with the fine anchor inside B_t
    bool found = false;
    const double* row = space.dist_row(fa);
    for (std::size_t k = 0; k < coarse.chart_count(); ++k) {
      if (row[coarse.anchor_point(k)] < tc * (1.0 + 1e-9)) {
        link.parent = k;
        found = true;
        break;
      }
    }
    if (!found) {
      // net density guarantees a parent; pick the nearest and flag via
      // residual (structural error surfaces in the coverage check)
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < coarse.chart_count(); ++k)
        if (row[coarse.anchor_point(k)] < best) {
          best = row[coarse.anchor_point(k)];
          link.parent = k;
        }
    }
    // fit K on samples around the fine anchor; the 15t window widens on
    // sub-resolved inputs until it holds enough shared samples
    std::vector<rigid::Vec> pts, imgs;
    std::size_t anchor_sample = 0;
    const double max_window =
        0.75 * std::min(fine.chart_radius, coarse.chart_radius);
    double fit_r = std::min(std::min(15.0 * tc, coarse.fit_radius), max_window);
    for (int attempt = 0; attempt < 8; ++attempt) {
      pts.clear();
      imgs.clear();
      for (std::size_t p : space.ball(fa, fit_r)) {
        const std::size_t pf = fine.charts[j].position(p);
        const std::size_t pc = coarse.charts[link.parent].position(p);
        if (pf == static_cast<std::size_t>(-1) ||
            pc == static_cast<std::size_t>(-1))
          continue;
        if (p == fa) anchor_sample = pts.size();
        pts.push_back(fine.charts[j].coords.row(pf).transpose());
        imgs.push_back(coarse.charts[link.parent].coords.row(pc).transpose());
      }
      if (pts.size() >= 2 * static_cast<std::size_t>(n) + 2 ||
          fit_r >= max_window)
        break;
      fit_r = std::min(2.0 * fit_r, max_window);
    }
    if (pts.size() < static_cast<std::size_t>(n) + 1)
      throw StructuralError("refinement link " + std::to_string(j) +
                            ": not enough shared samples");
    const auto fit = rigid::fit_isometry(pts, imgs, anchor_sample, tc);
    link.K = fit.motion;
    link.residual = fit.residual;
    const rigid::RigidMotion Kinv = rigid::invert(fit.motion);
    for (std::size_t s = 0; s < pts.size(); ++s)
      link.inverse_residual = std::max(
          link.inverse_residual, (Kinv.apply(imgs[s]) - pts[s]).norm());
    rc.links[j] = link;
  });

  // coverage: every coarse canonical point sits in phi_j(B_{5/4 t}) for the
  // chart of its nearest fine anchor
  double cover = 0.0;
  for (std::size_t z = 0; z < space.size(); ++z) {
    const std::size_t j = fine.canonical[z].chart;
    const auto x = rc.phi_inverse(j, coarse.canonical[z]);
    if (!x) {
      throw StructuralError("refinement coverage: sample " +
                            std::to_string(z) + " unreachable in chart " +
                            std::to_string(j));
    }
    cover = std::max(cover, x->norm());
  }
  rc.coverage_radius = cover;

  // transition closeness against the fine atlas (sampled pairs)
  double phiphi = 0.0;
  std::size_t counted = 0;
  for (const auto& [key, st] : fine.transitions.maps) {
    if (counted > 400) break;
    ++counted;
    const std::size_t j2 = key.first, j1 = key.second;  // map j2 -> j1 stored?
    const std::size_t from = st.from, to = st.to;
    const auto& lf = rc.links[from];
    const auto& lt = rc.links[to];
    SmoothMap mid =
        lf.parent == lt.parent
            ? SmoothMap::identity(n)
            : (coarse.has_transition(lt.parent, lf.parent)
                   ? coarse.transition(lt.parent, lf.parent)
                   : SmoothMap());
    if (!mid.valid()) continue;
    // phi_to^{-1} o phi_from = K_to^{-1} o I_coarse o K_from
    SmoothMap chain = SmoothMap::compose(
        SmoothMap::rigid(rigid::invert(lt.K)),
        SmoothMap::compose(mid, SmoothMap::rigid(lf.K)));
    SmoothMap fine_map = fine.transitions.map_between(to, from);
    for (const Vec& x : smooth::region_grid(
             Region::ball(Vec::Zero(n), std::min(4.0 * tc, 8.0 * fine.t)),
             grid)) {
      if (x.norm() >= 8.0 * fine.t) continue;
      if (fine_map.eval(x).norm() >= 8.0 * fine.t) continue;
      phiphi = std::max(phiphi, (chain.eval(x) - fine_map.eval(x)).norm());
    }
    (void)j1;
    (void)j2;
  }
  rc.phiphi_residual = phiphi;
  return rc;
}

std::optional<Vec> RefinementCharts::phi_inverse(std::size_t fine_chart,
                                                 const ManifoldPoint& w) const {
  const auto& link = links[fine_chart];
  Vec xc;
  if (w.chart == link.parent) {
    xc = w.coords;
  } else if (coarse->has_transition(link.parent, w.chart)) {
    if (!coarse->in_domain(link.parent, w.chart, w.coords)) return std::nullopt;
    xc = coarse->transition(link.parent, w.chart).eval(w.coords);
  } else {
    return std::nullopt;
  }
  return rigid::invert(link.K).apply(xc);
}

namespace {

// deterministic unit direction for the injected perturbations
Vec seeded_direction(int n, std::uint64_t seed, std::size_t j) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + j + 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(n);
  for (int k = 0; k < n; ++k) v(k) = gauss(rng);
  const double nn = v.norm();
  return nn > 0 ? Vec(v / nn) : Vec::Unit(n, 0);
}

}  // namespace

PatchedMap patch_immersion(const RefinementCharts& charts,
                           const PatchOptions& opt) {
  const GluingAtlas& fine = *charts.fine;
  const GluingAtlas& coarse = *charts.coarse;
  const int n = coarse.n;
  const double t = 2.0 * coarse.t;  // patch scale
  const std::size_t m = fine.chart_count();

  PatchedMap pm;
  pm.charts = &charts;
  pm.t = t;
  pm.H.resize(m);
  pm.stage_of.resize(m);

  int num_classes = 0;
  for (std::size_t j = 0; j < m; ++j) {
    pm.stage_of[j] = fine.anchor_class[j];
    num_classes = std::max(num_classes, fine.anchor_class[j] + 1);
  }
  const int N = std::max(2, num_classes);
  auto stage_radius = [&](int k) { return (2.0 - double(k) / N) * t; };

  // injected per-chart perturbations (identity when eps = 0)
  std::vector<SmoothMap> P(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (opt.eps_injected > 0.0) {
      const Vec dir = seeded_direction(n, opt.seed, j);
      rigid::RigidMotion tr = rigid::RigidMotion::translation(
          dir * (opt.eps_injected * t));
      P[j] = SmoothMap::blended(SmoothMap::rigid(tr),
                                {Bump{Vec::Zero(n), 2.0 * t, 3.0 * t}});
    } else {
      P[j] = SmoothMap::identity(n);
    }
  }
  pm.perturbations = P;

  // transition between patch charts: phi_{jp}^{-1} o phi_j
  auto patch_transition = [&](std::size_t to, std::size_t from) -> SmoothMap {
    const auto& lf = charts.links[from];
    const auto& lt = charts.links[to];
    SmoothMap mid = lf.parent == lt.parent
                        ? SmoothMap::identity(n)
                        : (coarse.has_transition(lt.parent, lf.parent)
                               ? coarse.transition(lt.parent, lf.parent)
                               : SmoothMap());
    if (!mid.valid()) return SmoothMap();
    return SmoothMap::compose(
        SmoothMap::rigid(rigid::invert(lt.K)),
        SmoothMap::compose(mid, SmoothMap::rigid(lf.K)));
  };

  // stage k = class index, ascending
  for (int stage = 0; stage < num_classes; ++stage) {
    StageRow row;
    row.stage = stage + 1;
    row.eta_k = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (pm.stage_of[j] != stage) continue;
      ++row.charts;
      if (stage == 0) {
        pm.H[j] = SmoothMap::identity(n);
        continue;
      }
      // processed overlapping charts
      std::vector<std::pair<Region, SmoothMap>> pieces;
      std::vector<Bump> bumps;
      double worst_eps = 0.0;
      for (std::size_t jp = 0; jp < m; ++jp) {
        if (pm.stage_of[jp] >= stage) continue;
        SmoothMap T_from_j = patch_transition(jp, j);  // j-coords -> jp-coords
        if (!T_from_j.valid()) continue;
        const Vec cj = T_from_j.rigid_reference().v;  // approx image of 0
        if (cj.norm() > 2.0 * stage_radius(stage - 1)) continue;
        // overlap center in j-coordinates
        SmoothMap T_to_j = patch_transition(j, jp);
        if (!T_to_j.valid()) continue;
        const Vec cprime = T_to_j.eval(Vec::Zero(n));
        if (cprime.norm() > 2.0 * stage_radius(stage - 1)) continue;

        // goal piece: P_j^{-1} o I_fine_{j,jp} o P_jp o H_jp o T_{jp j}
        if (!fine.has_transition(j, jp)) continue;
        SmoothMap goal = SmoothMap::compose(
            SmoothMap::inverse(P[j],
                               rigid::invert(P[j].rigid_reference()), 0.0),
            SmoothMap::compose(
                fine.transition(j, jp),
                SmoothMap::compose(P[jp],
                                   SmoothMap::compose(pm.H[jp], T_from_j))));
        // The stage ladder orders the processing; the bump radii are fixed
        // (enforce agreement out to 1.25t, support inside the 2t domain) so
        // the blend constant stays independent of the class count.
        const double r2 = std::min(1.8 * t, stage_radius(stage - 1));
        const double r1 = 1.25 * t;
        if (!(r1 < r2)) continue;
        pieces.emplace_back(Region::ball(cprime, r2 * 1.25), goal);
        bumps.push_back(Bump{cprime, r1, r2});
        const auto nr = smooth::ck_norm(goal, SmoothMap::identity(n),
                                        Region::ball(cprime, r2), t, 1,
                                        opt.grid);
        worst_eps = std::max(worst_eps, nr.value);
      }
      if (pieces.empty()) {
        pm.H[j] = SmoothMap::identity(n);
        continue;
      }
      ++row.blended;
      pieces.emplace_back(
          Region::ball(Vec::Zero(n), 1e9 * t), SmoothMap::identity(n));
      SmoothMap H_goal = SmoothMap::select(std::move(pieces));
      pm.H[j] = SmoothMap::blended(H_goal, std::move(bumps));
      const auto hn = smooth::ck_norm(pm.H[j], SmoothMap::identity(n),
                                      Region::ball(Vec::Zero(n), 2.0 * t), t,
                                      1, opt.grid);
      row.max_h_norm = std::max(row.max_h_norm, hn.value);
      row.eta_k = std::max(row.eta_k, worst_eps);
    }
    pm.max_h_norm = std::max(pm.max_h_norm, row.max_h_norm);
    pm.ledger.push_back(row);
  }

  // overlap agreement of the chart-local formulas
  double overlap = 0.0;
  std::size_t counted = 0;
  for (std::size_t j = 0; j < m && counted < 200; ++j) {
    for (std::size_t jp = 0; jp < j && counted < 200; ++jp) {
      SmoothMap T = patch_transition(jp, j);
      if (!T.valid() || !fine.has_transition(jp, j)) continue;
      if (T.rigid_reference().v.norm() > 1.5 * t) continue;
      ++counted;
      SmoothMap fine_tr = fine.transition(jp, j);
      for (const Vec& x : smooth::region_grid(
               Region::ball(Vec::Zero(n), 0.9 * t), opt.grid)) {
        const Vec xj = T.eval(x);
        if (xj.norm() > 0.9 * t) continue;
        // compare the two local formulas as fine chart-jp coordinates
        const Vec via_j =
            fine_tr.eval(P[j].eval(pm.H[j].eval(x)));
        const Vec via_jp = P[jp].eval(pm.H[jp].eval(xj));
        overlap = std::max(overlap, (via_j - via_jp).norm());
      }
    }
  }
  pm.overlap_residual = overlap;
  return pm;
}

namespace {

ManifoldPoint apply_over(const PatchedMap& pm,
                         const std::vector<std::size_t>& candidates,
                         const ManifoldPoint& w) {
  std::size_t best = static_cast<std::size_t>(-1);
  int best_stage = std::numeric_limits<int>::max();
  Vec best_x;
  for (std::size_t j : candidates) {
    const auto x = pm.charts->phi_inverse(j, w);
    if (!x) continue;
    if (x->norm() >= pm.t) continue;
    if (std::make_pair(pm.stage_of[j], j) < std::make_pair(best_stage, best)) {
      best = j;
      best_stage = pm.stage_of[j];
      best_x = *x;
    }
  }
  if (best == static_cast<std::size_t>(-1))
    return {static_cast<std::size_t>(-1), Vec()};
  Vec y = pm.perturbations[best].eval(pm.H[best].eval(best_x));
  return {best, y};
}

}  // namespace

ManifoldPoint PatchedMap::apply(const ManifoldPoint& w) const {
  const GluingAtlas& fine = *charts->fine;
  std::vector<std::size_t> all(fine.chart_count());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  const ManifoldPoint out = apply_over(*this, all, w);
  if (out.chart == static_cast<std::size_t>(-1))
    throw StructuralError("patched map: point not covered by any chart");
  return out;
}

ManifoldPoint PatchedMap::apply(const ManifoldPoint& w,
                                std::size_t fine_hint) const {
  const GluingAtlas& fine = *charts->fine;
  std::vector<std::size_t> cand{fine_hint};
  cand.insert(cand.end(), fine.neighbors[fine_hint].begin(),
              fine.neighbors[fine_hint].end());
  const ManifoldPoint out = apply_over(*this, cand, w);
  if (out.chart != static_cast<std::size_t>(-1)) return out;
  return apply(w);
}

VerifyReport verify_h(const PatchedMap& h, int grid) {
  const GluingAtlas& coarse = *h.charts->coarse;
  const GluingAtlas& fine = *h.charts->fine;
  const auto& space = *coarse.space;
  VerifyReport rep;

  // (i) Jacobian spread of the coordinate representative P o H o K^{-1}
  double spread = 0.0;
  for (std::size_t j = 0; j < fine.chart_count(); ++j) {
    const SmoothMap repmap = SmoothMap::compose(
        h.perturbations[j],
        SmoothMap::compose(
            h.H[j], SmoothMap::rigid(rigid::invert(h.charts->links[j].K))));
    for (const Vec& x : smooth::region_grid(
             Region::ball(Vec::Zero(coarse.n), h.t), grid)) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(repmap.jacobian(x));
      for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k)
        spread = std::max(spread, std::fabs(svd.singularValues()(k) - 1.0));
    }
    if (fine.chart_count() > 64 && j > 64) break;  // sampled beyond this
  }
  rep.jacobian_spread = spread;

  // (ii)-(iv) on the canonical sample
  std::vector<ManifoldPoint> images(space.size());
  parallel_for(space.size(), [&](std::size_t z) {
    images[z] = h.apply(coarse.canonical[z], fine.canonical[z].chart);
  });

  rep.displacement = 0.0;
  for (std::size_t z = 0; z < space.size(); ++z) {
    const double d = space.dist(fine.eval_f(images[z]),
                                coarse.eval_f(coarse.canonical[z]));
    if (d > rep.displacement) {
      rep.displacement = d;
      rep.witness = "displacement at sample " + std::to_string(z);
    }
  }

  // injectivity dichotomy: distant coarse pairs keep distant images
  rep.injective = true;
  rep.injectivity_margin = std::numeric_limits<double>::infinity();
  const std::size_t stride = std::max<std::size_t>(1, space.size() / 64);
  for (std::size_t a = 0; a < space.size(); a += stride)
    for (std::size_t b = a + stride; b < space.size(); b += stride) {
      const double dc =
          coarse.pseudo_distance(coarse.canonical[a], coarse.canonical[b]);
      if (dc < coarse.t / 4.0) continue;
      const double df = fine.pseudo_distance(images[a], images[b]);
      rep.injectivity_margin = std::min(rep.injectivity_margin, df);
      if (df <= 1e-9 * fine.t) {
        rep.injective = false;
        rep.witness = "collision of samples " + std::to_string(a) + "," +
                      std::to_string(b);
      }
    }

  // surjectivity: every fine canonical point is hit up to chart resolution
  double surj = 0.0;
  for (std::size_t z = 0; z < space.size(); ++z) {
    const ManifoldPoint& v = fine.canonical[z];
    const double d = fine.pseudo_distance(images[z], v);
    surj = std::max(surj, d);
  }
  rep.surjectivity_defect = surj;

  rep.pass = rep.injective && rep.jacobian_spread < 0.5 &&
             rep.surjectivity_defect < 2.0 * coarse.t &&
             rep.displacement < 40.0 * coarse.t;
  if (!rep.pass && rep.witness.empty()) rep.witness = "threshold breach";
  return rep;
}

}  // namespace reifenberg::refine
