#include "reifenberg/modification.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "reifenberg/parallel.hpp"

namespace reifenberg::modify {

using smooth::Bump;
using smooth::CkNormReport;
using Mat = Eigen::MatrixXd;

namespace {

// sup over B_r(0) of |A x + b - x|; dominates the residual on any probe set.
double rigid_dev_bound(const RigidMotion& m, double r) {
  return rigid::operator_norm(m.Q - Mat::Identity(m.dim(), m.dim())) * r +
         m.v.norm();
}

// Stack-resident rigid motion for the triple scans (n <= 3 in practice; the
// Eigen/map-based path costs ~microseconds per triple, which the 10^7-triple
// sweeps of sub-resolved atlases cannot afford).
struct FlatRigid {
  double Q[9];
  double v[3];
  int n;

  static FlatRigid from(const RigidMotion& m) {
    FlatRigid f;
    f.n = m.dim();
    for (int i = 0; i < f.n; ++i) {
      f.v[i] = m.v(i);
      for (int j = 0; j < f.n; ++j) f.Q[i * f.n + j] = m.Q(i, j);
    }
    return f;
  }
  FlatRigid inverse() const {
    FlatRigid r;
    r.n = n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r.Q[i * n + j] = Q[j * n + i];
    for (int i = 0; i < n; ++i) {
      double s = 0;
      for (int j = 0; j < n; ++j) s += r.Q[i * n + j] * v[j];
      r.v[i] = -s;
    }
    return r;
  }
  // a.compose(b): x -> a(b(x))
  FlatRigid compose(const FlatRigid& b) const {
    FlatRigid r;
    r.n = n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int k = 0; k < n; ++k) s += Q[i * n + k] * b.Q[k * n + j];
        r.Q[i * n + j] = s;
      }
      double s = v[i];
      for (int k = 0; k < n; ++k) s += Q[i * n + k] * b.v[k];
      r.v[i] = s;
    }
    return r;
  }
  // Frobenius bound on sup_{B_r} |Qx+v-x|: conservative, allocation-free
  double dev_bound(double r) const {
    double fro = 0, vn = 0;
    for (int i = 0; i < n; ++i) {
      vn += v[i] * v[i];
      for (int j = 0; j < n; ++j) {
        const double d = Q[i * n + j] - (i == j ? 1.0 : 0.0);
        fro += d * d;
      }
    }
    return std::sqrt(fro) * r + std::sqrt(vn);
  }
  double translation_norm() const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += v[i] * v[i];
    return std::sqrt(s);
  }
};

std::vector<Vec> ball_grid(int n, double r, int G) {
  return smooth::region_grid(Region::ball(Vec::Zero(n), r), G);
}

std::vector<Vec> random_ball_points(int n, double r, std::size_t count,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec x(n);
    for (int k = 0; k < n; ++k) x(k) = gauss(rng);
    const double nn = x.norm();
    if (nn == 0.0) {
      out.push_back(Vec::Zero(n));
      continue;
    }
    out.push_back(x * (r * std::pow(unif(rng), 1.0 / n) / nn));
  }
  return out;
}

struct TripleMaps {
  const SmoothMap* m21;
  const SmoothMap* m31;
  const SmoothMap* m32;
  SmoothMap inv21, inv31, inv32;
  TripleMaps(const SmoothMap& a, const SmoothMap& b, const SmoothMap& c)
      : m21(&a), m31(&b), m32(&c) {
    inv21 = SmoothMap::inverse(a, rigid::invert(a.rigid_reference()), 0.0);
    inv31 = SmoothMap::inverse(b, rigid::invert(b.rigid_reference()), 0.0);
    inv32 = SmoothMap::inverse(c, rigid::invert(c.rigid_reference()), 0.0);
  }
  // I_{to,from} with charts labelled 1,2,3
  const SmoothMap& get(int to, int from) const {
    if (to == 2 && from == 1) return *m21;
    if (to == 1 && from == 2) return inv21;
    if (to == 3 && from == 1) return *m31;
    if (to == 1 && from == 3) return inv31;
    if (to == 3 && from == 2) return *m32;
    return inv32;  // (2,3)
  }
};

double pattern_residual(const TripleMaps& tm, int a, int b, int c, double r,
                        const std::vector<Vec>& probes) {
  const SmoothMap& Iba = tm.get(b, a);
  const SmoothMap& Icb = tm.get(c, b);
  const SmoothMap& Ica = tm.get(c, a);
  double worst = 0.0;
  for (const Vec& x : probes) {
    if (x.norm() >= r) continue;
    const Vec y = Iba.eval(x);
    if (y.norm() >= r) continue;
    const Vec z = Icb.eval(y);
    if (z.norm() >= r) continue;
    worst = std::max(worst, (Ica.eval(x) - z).norm());
  }
  return worst;
}

constexpr int kPatterns[3][3] = {{1, 2, 3}, {3, 1, 2}, {1, 3, 2}};

}  // namespace

double cocyclicity_residual(const SmoothMap& I21, const SmoothMap& I31,
                            const SmoothMap& I32, double r, int G,
                            const std::vector<Vec>& extra_probes) {
  TripleMaps tm(I21, I31, I32);
  std::vector<Vec> probes = ball_grid(I21.dim(), r, G);
  probes.insert(probes.end(), extra_probes.begin(), extra_probes.end());
  double worst = 0.0;
  for (const auto& pat : kPatterns)
    worst = std::max(worst,
                     pattern_residual(tm, pat[0], pat[1], pat[2], r, probes));
  return worst;
}

PropTrickReport prop_trick_check(const SmoothMap& I21, const SmoothMap& I31,
                                 const SmoothMap& I32, double r, double eps,
                                 double t, int G) {
  TripleMaps tm(I21, I31, I32);
  PropTrickReport rep;
  const auto probes = ball_grid(I21.dim(), r, G);
  // cross patterns: all six (a,b,c) orderings measured without the chain
  // shortcut, as almost-cocyclicity
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b)
      for (int c = 1; c <= 3; ++c) {
        if (a == b || b == c || a == c) continue;
        for (const Vec& x : probes) {
          if (x.norm() >= r) continue;
          rep.cross_residual =
              std::max(rep.cross_residual,
                       (tm.get(c, a).eval(x) -
                        tm.get(c, b).eval(tm.get(b, a).eval(x)))
                           .norm());
        }
      }
  rep.pattern123_residual = pattern_residual(tm, 1, 2, 3, r, probes);
  rep.residual_at_shrunk =
      cocyclicity_residual(I21, I31, I32, r - eps, G);
  rep.pass = rep.cross_residual < eps &&
             rep.pattern123_residual <= 1e-9 * t &&
             rep.residual_at_shrunk <= 1e-9 * t;
  return rep;
}

TmlResult tml_modify(const SmoothMap& I21, const SmoothMap& I31,
                     const SmoothMap& I32, const RigidMotion& R21,
                     const RigidMotion& R31, const RigidMotion& R32,
                     const TmlOptions& opt) {
  const int n = I21.dim();
  const double t = opt.t;
  const double rt = opt.r * t;
  TmlResult out;
  out.I32_new = I32;
  out.support_center = Vec::Zero(n);

  // measured triple defect sup |I32(I21 x) - I31 x| on B_rt
  const SmoothMap chain = SmoothMap::compose(I32, I21);
  double defect = 0.0;
  if (chain.is_rigid() && I31.is_rigid()) {
    const RigidMotion d =
        rigid::compose(rigid::invert(I31.rigid_reference()),
                       chain.rigid_reference());
    defect = rigid_dev_bound(d, rt);
  }
  if (!(chain.is_rigid() && I31.is_rigid()) || defect > opt.exactness_tol * t) {
    defect = 0.0;
    for (const Vec& x : ball_grid(n, rt, opt.grid))
      defect = std::max(defect, (chain.eval(x) - I31.eval(x)).norm());
  }
  out.defect = defect / t;
  if (defect <= opt.exactness_tol * t) return out;  // already cocyclical

  // image-ball geometry of M = I32 o I21
  const RigidMotion RM = rigid::compose(R32, R21);
  const Vec c = chain.eval(Vec::Zero(n));
  double dev = 0.0;
  for (const Vec& x : ball_grid(n, rt, opt.grid))
    dev = std::max(dev, (chain.eval(x) - (RM.Q * x + c)).norm());

  const double U2R = rt - 1.1 * dev;
  const double U1R = (1.0 - 1.0 / (2.0 * opt.N)) * rt;
  if (!(U1R < U2R))
    throw smooth::BlendRefused(
        "tml_modify: image deviation eats the blend gap (dev=" +
        std::to_string(dev) + ")");

  // Case 1: chain set empty
  if (c.norm() > 2.0 * U1R + dev) return out;

  const SmoothMap H = SmoothMap::compose(
      I31, SmoothMap::compose(
               SmoothMap::inverse(I21, rigid::invert(R21), 0.0),
               SmoothMap::inverse(I32, rigid::invert(R32), 0.0)));

  smooth::BlendResult br = smooth::blend(H, c, U1R, U2R, t, 2, opt.grid);
  out.eps_used = br.eps;
  out.blend_bound = br.bound;
  out.I32_new = SmoothMap::compose(br.map, I32);
  out.modified = true;
  out.support_center = c;
  out.support_radius = U2R;

  // C2 distance to the input map, on the support pulled back through I32
  const Vec sc = rigid::invert(R32).apply(c);
  out.c2_change = smooth::ck_norm(out.I32_new, I32,
                                  Region::ball(sc, U2R + 2.0 * dev + 0.1 * t),
                                  t, 2, opt.grid)
                      .value;
  return out;
}

RigidMotion IsometryFamily::rigid_map(std::size_t to, std::size_t from) const {
  auto it = maps.find({std::min(to, from), std::max(to, from)});
  if (it == maps.end()) throw StructuralError("rigid_map: pair not adjacent");
  // stored map goes min -> max coordinates
  if (from < to) return it->second;
  return rigid::invert(it->second);
}

SmoothMap ModifiedFamily::map_between(std::size_t to, std::size_t from) const {
  auto it = maps.find({std::min(to, from), std::max(to, from)});
  if (it == maps.end())
    throw StructuralError("map_between: pair not adjacent");
  const Stored& st = it->second;
  if (st.from == from && st.to == to) return st.map;
  return SmoothMap::inverse(st.map,
                            rigid::invert(st.map.rigid_reference()), 0.0);
}

namespace {

struct WorkingMaps {
  std::map<std::pair<std::size_t, std::size_t>, ModifiedFamily::Stored> maps;

  SmoothMap get(std::size_t to, std::size_t from) const {
    auto it = maps.find({std::min(to, from), std::max(to, from)});
    if (it == maps.end())
      throw StructuralError("working map missing");
    const auto& st = it->second;
    if (st.from == from && st.to == to) return st.map;
    return SmoothMap::inverse(st.map,
                              rigid::invert(st.map.rigid_reference()), 0.0);
  }
  void put(std::size_t to, std::size_t from, SmoothMap m, double change) {
    auto& st = maps[{std::min(to, from), std::max(to, from)}];
    st.from = from;
    st.to = to;
    st.map = std::move(m);
    st.c2_change += change;
  }
};

struct ChainTriple {
  std::size_t j1, j2, j3;
};

}  // namespace

namespace {

// flat per-unordered-pair transition table; rigid entries carry both
// orientations stack-resident
struct FlatTable {
  std::vector<std::vector<std::size_t>> adj;            // sorted neighbours
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
  std::vector<FlatRigid> fwd;  // min -> max orientation
  std::vector<FlatRigid> bwd;
  std::vector<char> is_rigid;

  bool adjacent(std::size_t a, std::size_t b) const {
    const auto& nb = adj[a];
    return std::binary_search(nb.begin(), nb.end(), b);
  }
  std::size_t idx(std::size_t a, std::size_t b) const {
    return index.at({std::min(a, b), std::max(a, b)});
  }
  // I_{to,from}
  const FlatRigid& get(std::size_t to, std::size_t from) const {
    const std::size_t i = idx(to, from);
    return from < to ? fwd[i] : bwd[i];
  }
};

FlatTable flat_table(const ModifiedFamily& fam) {
  FlatTable tb;
  tb.adj.assign(fam.count, {});
  for (const auto& [key, st] : fam.maps) {
    tb.index[key] = tb.fwd.size();
    const bool rigid_map = st.map.is_rigid();
    tb.is_rigid.push_back(rigid_map ? 1 : 0);
    RigidMotion ref = st.map.rigid_reference();
    // stored orientation is st.from -> st.to; normalize to min -> max
    if (st.from > st.to) ref = rigid::invert(ref);
    FlatRigid f = FlatRigid::from(ref);
    tb.fwd.push_back(f);
    tb.bwd.push_back(f.inverse());
    tb.adj[key.first].push_back(key.second);
    tb.adj[key.second].push_back(key.first);
  }
  for (auto& nb : tb.adj) std::sort(nb.begin(), nb.end());
  return tb;
}

}  // namespace

double family_compatibility_residual(const ModifiedFamily& fam, int G,
                                     std::size_t random_probes,
                                     std::uint64_t seed) {
  const double t = fam.t;
  if (fam.maps.empty()) return 0.0;
  const int n = fam.maps.begin()->second.map.dim();
  const double r8 = 8.0 * t;
  std::vector<Vec> probes = ball_grid(n, r8, G);
  {
    auto rnd = random_ball_points(n, r8, random_probes, seed);
    probes.insert(probes.end(), rnd.begin(), rnd.end());
  }
  const FlatTable tb = flat_table(fam);

  std::vector<double> worst(fam.count, 0.0);
  parallel_for(fam.count, [&](std::size_t j2) {
    double w = 0.0;
    for (std::size_t j1 : tb.adj[j2])
      for (std::size_t j3 : tb.adj[j2]) {
        if (j3 == j1) continue;
        const std::size_t i21 = tb.idx(j2, j1);
        const std::size_t i32 = tb.idx(j3, j2);
        const bool all_rigid = tb.is_rigid[i21] && tb.is_rigid[i32];
        if (all_rigid) {
          const FlatRigid chain = tb.get(j3, j2).compose(tb.get(j2, j1));
          // chain set empty: image ball of B_8t misses B_8t entirely
          if (chain.translation_norm() >= 2.0 * r8) continue;
          if (tb.adjacent(j3, j1) && tb.is_rigid[tb.idx(j3, j1)]) {
            const FlatRigid delta =
                tb.get(j3, j1).inverse().compose(chain);
            const double bound = delta.dev_bound(r8);
            if (bound <= 1e-10 * t) {
              w = std::max(w, bound);
              continue;
            }
          }
        }
        // slow path: probe the chain set through the smooth maps
        const SmoothMap I21 = fam.map_between(j2, j1);
        const SmoothMap I32 = fam.map_between(j3, j2);
        bool any = false;
        double wt = 0.0;
        SmoothMap I31;
        for (const Vec& x : probes) {
          const Vec y = I21.eval(x);
          if (y.norm() >= r8) continue;
          const Vec z = I32.eval(y);
          if (z.norm() >= r8) continue;
          if (!any) {
            if (!fam.adjacent(j3, j1)) {
              wt = std::numeric_limits<double>::infinity();
              break;
            }
            I31 = fam.map_between(j3, j1);
            any = true;
          }
          wt = std::max(wt, (I31.eval(x) - z).norm());
        }
        w = std::max(w, wt);
      }
    worst[j2] = w;
  });
  double res = 0.0;
  for (double w : worst) res = std::max(res, w);
  return res;
}

IsometryFamily synthetic_family(std::size_t count, int num_classes,
                                double beta, std::uint64_t seed, int n,
                                double t) {
  if (num_classes < 3) throw StructuralError("need at least 3 classes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  IsometryFamily fam;
  fam.count = count;
  fam.num_classes = num_classes;
  fam.t = t;
  fam.cls.resize(count);

  // per-chart world frames: clusters of three nearly coincident charts
  std::vector<RigidMotion> frames;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t cluster = j / 3;
    const int slot = static_cast<int>(j % 3);
    fam.cls[j] = static_cast<int>((3 * cluster + slot) % num_classes);
    RigidMotion F = RigidMotion::identity(n);
    if (n == 2) F.Q = RigidMotion::rotation2(0.15 * u(rng)).Q;
    Vec v(n);
    for (int k = 0; k < n; ++k) v(k) = 0.4 * t * u(rng);
    v(0) += 100.0 * t * static_cast<double>(cluster);  // clusters far apart
    F.v = v;
    frames.push_back(F);
  }
  for (std::size_t a = 0; a < count; ++a)
    for (std::size_t b = a + 1; b < count; ++b) {
      if (a / 3 != b / 3) continue;  // adjacency within a cluster only
      // exact transition a -> b, then the injected rigid defect
      RigidMotion exact =
          rigid::compose(rigid::invert(frames[b]), frames[a]);
      RigidMotion defect = RigidMotion::identity(n);
      if (n == 2) defect.Q = RigidMotion::rotation2(beta / 60.0 * u(rng)).Q;
      Vec dv(n);
      for (int k = 0; k < n; ++k) dv(k) = beta * t / 8.0 * u(rng);
      defect.v = dv;
      fam.maps[{a, b}] = rigid::compose(defect, exact);
    }
  return fam;
}

ModifiedFamily modify_family(const IsometryFamily& family,
                             const ModifyOptions& opt) {
  const double t = family.t;
  const int N = family.num_classes;
  if (family.count == 0) throw StructuralError("empty family");
  if (static_cast<std::size_t>(family.cls.size()) != family.count)
    throw StructuralError("class table size mismatch");
  const int n = family.maps.empty() ? 1 : family.maps.begin()->second.dim();

  // flat transition table for the O(sum deg^2) scans
  FlatTable tb;
  tb.adj.assign(family.count, {});
  for (const auto& [key, m] : family.maps) {
    tb.index[key] = tb.fwd.size();
    tb.is_rigid.push_back(1);
    FlatRigid f = FlatRigid::from(m);
    tb.fwd.push_back(f);
    tb.bwd.push_back(f.inverse());
    tb.adj[key.first].push_back(key.second);
    tb.adj[key.second].push_back(key.first);
  }
  for (auto& nb : tb.adj) std::sort(nb.begin(), nb.end());
  const auto& adj = tb.adj;

  for (std::size_t j = 0; j < family.count; ++j) {
    std::set<int> seen{family.cls[j]};
    for (std::size_t k : adj[j]) {
      if (!seen.insert(family.cls[k]).second)
        throw StructuralError(
            "apartition violated at chart " + std::to_string(j) +
            ": two neighbours share class " + std::to_string(family.cls[k]));
    }
  }

  // hypothesis B (chain reach implies closure) and hypothesis C (triple
  // defect on B_10t) in one flat scan
  double beta_abs = 0.0;
  for (std::size_t j2 = 0; j2 < family.count; ++j2)
    for (std::size_t j1 : adj[j2])
      for (std::size_t j3 : adj[j2]) {
        if (j3 <= j1) continue;
        const FlatRigid chain = tb.get(j3, j2).compose(tb.get(j2, j1));
        const bool closed = tb.adjacent(j3, j1);
        // I32(I21(B_8t)) reaches B_9t iff |chain(0)| < 17t
        if (chain.translation_norm() < 17.0 * t * 1.01 && !closed)
          throw StructuralError("chain closure (hypothesis B) violated at (" +
                                std::to_string(j3) + "," + std::to_string(j1) +
                                ") via " + std::to_string(j2));
        if (closed) {
          const FlatRigid delta = tb.get(j3, j1).inverse().compose(chain);
          beta_abs = std::max(beta_abs, delta.dev_bound(10.0 * t));
        }
      }

  ModifiedFamily out;
  out.count = family.count;
  out.cls = family.cls;
  out.t = t;
  out.beta = beta_abs / t;

  WorkingMaps work;
  for (const auto& [key, m] : family.maps) {
    ModifiedFamily::Stored st;
    st.from = key.first;
    st.to = key.second;
    st.map = SmoothMap::rigid(m);
    work.maps[key] = st;
  }

  // Group the chart triples by their class triple; only class triples
  // that actually occur get a step (the enumeration order is unchanged, and
  // singleton-class colorings would otherwise cost |N|^3 empty steps).
  // Triples whose defect bound is already below the exactness floor are
  // counted but never re-processed (flat scan, no map machinery).
  std::map<std::tuple<int, int, int>, std::vector<ChainTriple>> by_class;
  std::map<std::tuple<int, int, int>, std::pair<std::size_t, std::size_t>>
      class_counts;  // total, skipped-exact
  for (std::size_t j2 = 0; j2 < family.count; ++j2)
    for (std::size_t j3 : adj[j2])
      for (std::size_t j1 : adj[j2]) {
        if (j1 == j3) continue;
        const int a3 = family.cls[j3], a2 = family.cls[j2],
                  a1 = family.cls[j1];
        if (!(a3 > a2 && a2 > a1)) continue;  // canonical role assignment
        if (!tb.adjacent(j3, j1)) continue;
        auto& cnt = class_counts[{a3, a2, a1}];
        ++cnt.first;
        const FlatRigid delta =
            tb.get(j3, j1).inverse().compose(
                tb.get(j3, j2).compose(tb.get(j2, j1)));
        if (delta.dev_bound(10.0 * t) <= opt.exactness_tol * t) {
          ++cnt.second;
          continue;
        }
        by_class[{a3, a2, a1}].push_back({j1, j2, j3});
      }
  // paper order: increasing #T with digits (a1,a2,a3) most-significant-last
  std::vector<std::pair<std::tuple<int, int, int>, std::vector<ChainTriple>>>
      steps;
  for (auto& [key, cnt] : class_counts)
    steps.emplace_back(key, std::move(by_class[key]));
  std::sort(steps.begin(), steps.end(), [](const auto& A, const auto& B) {
    const auto [a3, a2, a1] = A.first;
    const auto [b3, b2, b1] = B.first;
    return std::make_tuple(a3, a2, a1) < std::make_tuple(b3, b2, b1);
  });

  const double n3 = static_cast<double>(N) * N * N;
  const double c1_doc = smooth::blend_constant(
      2, n, (10.0 / (2.0 * opt.tml_N)), (1.0 - 1.0 / (2.0 * opt.tml_N)) * 10.0);

  int k = 0;
  for (const auto& [T, triples] : steps) {
    ++k;
    LedgerRow row;
    row.step = k;
    row.a3 = std::get<0>(T);
    row.a2 = std::get<1>(T);
    row.a1 = std::get<2>(T);
    row.radius = 10.0 - (k - 1) / std::max(n3, 6.0 * steps.size());
    row.beta_k = std::pow(c1_doc + 1.0, std::min(k, 64)) * out.beta;
    const auto& cnt = class_counts.at(T);
    row.triples = cnt.first;
    row.skipped_exact = cnt.second;

    for (const auto& tr : triples) {
      TmlOptions topt;
      topt.t = t;
      topt.r = row.radius;
      topt.N = opt.tml_N;
      topt.grid = opt.grid;
      topt.exactness_tol = opt.exactness_tol;
      TmlResult res = tml_modify(
          work.get(tr.j2, tr.j1), work.get(tr.j3, tr.j1),
          work.get(tr.j3, tr.j2), family.rigid_map(tr.j2, tr.j1),
          family.rigid_map(tr.j3, tr.j1), family.rigid_map(tr.j3, tr.j2),
          topt);
      row.max_defect = std::max(row.max_defect, res.defect);
      if (res.modified) {
        work.put(tr.j3, tr.j2, res.I32_new, res.c2_change);
        row.max_c2_change = std::max(row.max_c2_change, res.c2_change);
      } else {
        ++row.skipped_exact;
      }
    }
    out.ledger.push_back(row);
  }

  out.maps = work.maps;

  // final compatibility sweep + bounded repair
  for (int pass = 0; pass <= opt.max_repair_passes; ++pass) {
    out.final_residual = family_compatibility_residual(
        out, opt.check_grid, opt.random_probes, opt.seed);
    if (out.final_residual <= 1e-10 * t || pass == opt.max_repair_passes)
      break;
    out.repair_passes = pass + 1;
    // reprocess every triple that still shows a residual; rigid triples
    // below the exactness floor are skipped by the flat bound
    const FlatTable cur = flat_table(out);
    for (std::size_t j2 = 0; j2 < family.count; ++j2)
      for (std::size_t j1 : adj[j2])
        for (std::size_t j3 : adj[j2]) {
          if (j3 == j1 || !family.adjacent(j3, j1)) continue;
          const std::size_t i21 = cur.idx(j2, j1), i32 = cur.idx(j3, j2),
                            i31 = cur.idx(j3, j1);
          if (cur.is_rigid[i21] && cur.is_rigid[i32] && cur.is_rigid[i31]) {
            const FlatRigid delta = cur.get(j3, j1).inverse().compose(
                cur.get(j3, j2).compose(cur.get(j2, j1)));
            if (delta.dev_bound(8.0 * t) <= 1e-10 * t) continue;
          }
          const double res = cocyclicity_residual(
              out.map_between(j2, j1), out.map_between(j3, j1),
              out.map_between(j3, j2), 8.0 * t, opt.check_grid);
          if (res > 1e-10 * t) {
            TmlOptions topt;
            topt.t = t;
            topt.r = 10.0;
            topt.N = opt.tml_N;
            topt.grid = opt.grid;
            topt.exactness_tol = opt.exactness_tol;
            TmlResult fix = tml_modify(
                out.map_between(j2, j1), out.map_between(j3, j1),
                out.map_between(j3, j2), family.rigid_map(j2, j1),
                family.rigid_map(j3, j1), family.rigid_map(j3, j2), topt);
            if (fix.modified) {
              auto& st =
                  out.maps[{std::min(j2, j3), std::max(j2, j3)}];
              st.from = j2;
              st.to = j3;
              st.map = fix.I32_new;
              st.c2_change += fix.c2_change;
            }
          }
        }
  }

  // max C2 distance to the original isometries
  for (auto& [key, st] : out.maps) {
    if (st.map.is_rigid()) continue;
    const RigidMotion orig = family.rigid_map(st.to, st.from);
    // measure on the union of a generous ball around the change supports
    Region reg = Region::ball(Vec::Zero(n), 12.0 * t);
    const double change =
        smooth::ck_norm(st.map, SmoothMap::rigid(orig), reg, t, 2, opt.grid)
            .value;
    st.c2_change = change;
    out.max_c2_change = std::max(out.max_c2_change, change);
  }
  return out;
}

}  // namespace reifenberg::modify
