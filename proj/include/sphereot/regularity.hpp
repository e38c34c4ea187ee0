#pragma once

// Empirical Holder diagnostics for the transport maps and numerical checks of
// the quantitative relations between t+, t-, lambda, s+, s- and omega.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sphereot/errors.hpp"
#include "sphereot/map_extractor.hpp"
#include "sphereot/sphere_geometry.hpp"

namespace sphereot {

/// Distance window [r_min, r_max] for pairwise diagnostics.
struct ScaleWindow {
  double r_min = 0.0;
  double r_max = 0.5;

  bool contains(double r) const noexcept { return r >= r_min && r <= r_max; }
  /// A slope needs at least one octave of distances.
  bool resolvable() const noexcept { return r_max >= 2.0 * r_min; }

  /// r_min = 2 x mesh spacing, r_max = 0.5.
  static ScaleWindow for_spacing(double spacing) { return {2.0 * spacing, 0.5}; }
};

/// The exponent 1/(4n-1) proven for t+ on S^n.
inline double holder_exponent(int n) { return 1.0 / (4.0 * n - 1.0); }

struct HolderSample {
  Vector x;
  Vector fx;
};

using SampleFilter = std::function<bool(const HolderSample&)>;

struct HolderReport {
  std::string region;
  /// NaN when the report is degenerate (no pair moves).
  double alpha_hat = std::numeric_limits<double>::quiet_NaN();
  double C_hat = std::numeric_limits<double>::quiet_NaN();
  ScaleWindow scale_window;
  std::size_t pair_count = 0;
  bool low_confidence = false;
  bool degenerate = false;
  /// Binned maxima (log r, log |f(x1) - f(x0)|) used for the fit.
  std::vector<std::pair<double, double>> envelope;
  /// Every in-window pair, when requested.
  std::vector<std::pair<double, double>> log_pairs;
};

inline constexpr std::size_t kMinConfidentPairs = 30;
inline constexpr int kEnvelopeBins = 10;

/// Fits log |f(x1) - f(x0)| <= log C + alpha log |x1 - x0| on the upper
/// envelope of the in-window pairs: pairs are split into distance deciles,
/// the largest displacement of each decile is kept, and a least-squares line
/// through those maxima gives (alpha_hat, log C_hat).
inline HolderReport holder_fit(const std::vector<HolderSample>& samples, const SampleFilter& filter,
                               const ScaleWindow& window, std::string region = {}, bool keep_pairs = false) {
  std::vector<const HolderSample*> kept;
  for (const auto& s : samples)
    if (!filter || filter(s)) kept.push_back(&s);
  if (kept.size() < 2) throw InsufficientData("holder_fit: fewer than 2 samples in region");

  struct Pair {
    double r;
    double d;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < kept.size(); ++a)
    for (std::size_t b = a + 1; b < kept.size(); ++b) {
      const double r = (kept[a]->x - kept[b]->x).norm();
      if (!window.contains(r) || !(r > 0.0)) continue;
      pairs.push_back({r, (kept[a]->fx - kept[b]->fx).norm()});
    }
  if (pairs.size() < 2) throw InsufficientData("holder_fit: fewer than 2 usable pairs in the scale window");

  HolderReport rep;
  rep.region = std::move(region);
  rep.scale_window = window;
  rep.pair_count = pairs.size();
  rep.low_confidence = pairs.size() < kMinConfidentPairs;
  if (keep_pairs)
    for (const auto& p : pairs)
      if (p.d > 0.0) rep.log_pairs.emplace_back(std::log(p.r), std::log(p.d));

  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.r < b.r; });
  const std::size_t bins = std::min<std::size_t>(kEnvelopeBins, pairs.size());
  for (std::size_t k = 0; k < bins; ++k) {
    const std::size_t lo = k * pairs.size() / bins;
    const std::size_t hi = (k + 1) * pairs.size() / bins;
    const Pair* best = nullptr;
    for (std::size_t q = lo; q < hi; ++q)
      if (pairs[q].d > 0.0 && (!best || pairs[q].d > best->d)) best = &pairs[q];
    if (best) rep.envelope.emplace_back(std::log(best->r), std::log(best->d));
  }
  if (rep.envelope.size() < 2) {
    rep.degenerate = true;
    return rep;
  }
  double mx = 0.0, my = 0.0;
  for (const auto& [lx, ly] : rep.envelope) {
    mx += lx;
    my += ly;
  }
  mx /= rep.envelope.size();
  my /= rep.envelope.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [lx, ly] : rep.envelope) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
  }
  if (!(sxx > 0.0)) {
    rep.degenerate = true;
    return rep;
  }
  rep.alpha_hat = sxy / sxx;
  rep.C_hat = std::exp(my - rep.alpha_hat * mx);
  return rep;
}

/// sup |f(x1) - f(x0)| / |x1 - x0|^exponent over in-window pairs: the
/// smallest Holder constant valid for all sampled pairs at a fixed exponent.
inline double holder_constant(const std::vector<HolderSample>& samples, double exponent, const ScaleWindow& window) {
  double best = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < samples.size(); ++a)
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      const double r = (samples[a].x - samples[b].x).norm();
      if (!window.contains(r) || !(r > 0.0)) continue;
      ++count;
      best = std::max(best, (samples[a].fx - samples[b].fx).norm() / std::pow(r, exponent));
    }
  if (count == 0) throw InsufficientData("holder_constant: no pairs in the scale window");
  return best;
}

enum class MapBranch { Plus, Minus };

inline std::vector<HolderSample> map_samples(const MultiMap& mm, const std::vector<std::size_t>& atoms,
                                             MapBranch branch) {
  std::vector<HolderSample> out;
  out.reserve(atoms.size());
  for (std::size_t i : atoms) {
    const auto& e = mm.atoms.at(i);
    out.push_back({e.x.coords(), branch == MapBranch::Plus ? e.t_plus.coords() : e.t_minus.coords()});
  }
  return out;
}

/// Constants of the t- Holder bound on a subset U of the bivalent region.
struct RegionConstants {
  double k_U = 0.0;
  double C_plus = 0.0;
  /// (1 + 1/k_U)(C_plus + 2), the constant as stated.
  double C_minus_statement = 0.0;
  /// (1 + 2/k_U)(C_plus + 2), the constant the derivation actually yields.
  double C_minus_proof = 0.0;
  /// min -x.t+(x) over U, the literal statement's k_U (negative on S2).
  double k_U_literal = std::numeric_limits<double>::quiet_NaN();
};

inline RegionConstants region_constants(double k_U, double C_plus) {
  if (!(k_U > 0.0)) throw DomainError("region_constants: k_U must be positive");
  if (!(C_plus >= 0.0)) throw DomainError("region_constants: C_plus must be nonnegative");
  RegionConstants rc;
  rc.k_U = k_U;
  rc.C_plus = C_plus;
  rc.C_minus_statement = (1.0 + 1.0 / k_U) * (C_plus + 2.0);
  rc.C_minus_proof = (1.0 + 2.0 / k_U) * (C_plus + 2.0);
  return rc;
}

/// k_U := min -x.t-(x) over U (positive on S2), and C_plus the sampled
/// Holder constant of t+ on U at exponent 1/(4n-1).
inline RegionConstants region_constants(const MultiMap& mm, const std::vector<std::size_t>& U,
                                        const ScaleWindow& window) {
  if (U.empty()) throw DomainError("region_constants: U is empty");
  double k = std::numeric_limits<double>::infinity();
  double k_literal = std::numeric_limits<double>::infinity();
  for (std::size_t i : U) {
    const auto& e = mm.atoms.at(i);
    if (!e.bivalent) throw DomainError("region_constants: atom " + std::to_string(i) + " is not bivalent");
    const double v = -e.x.dot(e.t_minus);
    if (!(v > 0.0)) throw DomainError("region_constants: -x.t-(x) <= 0 at atom " + std::to_string(i));
    k = std::min(k, v);
    k_literal = std::min(k_literal, -e.x.dot(e.t_plus));
  }
  const double c_plus = holder_constant(map_samples(mm, U, MapBranch::Plus), holder_exponent(mm.n), window);
  RegionConstants rc = region_constants(k, c_plus);
  rc.k_U_literal = k_literal;
  return rc;
}

/// max |f(x1) - f(x0)| / (C |x1 - x0|^exponent) over in-window pairs that also
/// pass `gate`. Values <= 1 confirm the bound at this resolution.
inline double bound_ratio(const std::vector<HolderSample>& samples, double C, double exponent,
                          const ScaleWindow& window,
                          const std::function<bool(const HolderSample&, const HolderSample&)>& gate = {}) {
  if (!(C > 0.0)) throw DomainError("bound_ratio: constant must be positive");
  double worst = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < samples.size(); ++a)
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      const double r = (samples[a].x - samples[b].x).norm();
      if (!window.contains(r) || !(r > 0.0)) continue;
      if (gate && !gate(samples[a], samples[b])) continue;
      ++count;
      worst = std::max(worst, (samples[a].fx - samples[b].fx).norm() / (C * std::pow(r, exponent)));
    }
  if (count == 0) throw InsufficientData("bound check: no pairs in the scale window");
  return worst;
}

/// Checks |t-(x1) - t-(x0)| <= C_minus_proof |x1 - x0|^{1/(4n-1)} on U.
/// Pairs are gated by |t-(x1) - t-(x0)|^2 < k_U / 2, the closeness under
/// which the normal-projection estimate holds.
///
/// With `converse`, the roles of t+ and t- are exchanged: the bound is
/// |t+(x1) - t+(x0)| <= (1 + 2/k')(C' + 2)|x1 - x0|^alpha with
/// k' = min x.t+(x) and C' the sampled constant of t-.
inline double t_minus_bound_check(const MultiMap& mm, const std::vector<std::size_t>& U, const ScaleWindow& window,
                                  bool converse = false) {
  if (U.size() < 2) throw InsufficientData("t_minus_bound_check: fewer than 2 atoms in U");
  const double alpha = holder_exponent(mm.n);
  if (!converse) {
    const RegionConstants rc = region_constants(mm, U, window);
    const double half_k = 0.5 * rc.k_U;
    return bound_ratio(map_samples(mm, U, MapBranch::Minus), rc.C_minus_proof, alpha, window,
                       [half_k](const HolderSample& a, const HolderSample& b) {
                         return (a.fx - b.fx).squaredNorm() < half_k;
                       });
  }
  double k = std::numeric_limits<double>::infinity();
  for (std::size_t i : U) {
    const auto& e = mm.atoms.at(i);
    const double v = e.x.dot(e.t_plus);
    if (!(v > 0.0)) throw DomainError("t_minus_bound_check: x.t+(x) <= 0 at atom " + std::to_string(i));
    k = std::min(k, v);
  }
  const double c_minus = holder_constant(map_samples(mm, U, MapBranch::Minus), alpha, window);
  const RegionConstants rc = region_constants(k, c_minus);
  const double half_k = 0.5 * k;
  return bound_ratio(map_samples(mm, U, MapBranch::Plus), rc.C_minus_proof, alpha, window,
                     [half_k](const HolderSample& a, const HolderSample& b) {
                       return (a.fx - b.fx).squaredNorm() < half_k;
                     });
}

/// Same check on raw samples with a caller-supplied constant.
inline double t_minus_bound_check(const std::vector<HolderSample>& samples, double C, int n,
                                  const ScaleWindow& window) {
  return bound_ratio(samples, C, holder_exponent(n), window);
}

struct SegmentNormalResult {
  double min_projection = 0.0;
  bool pass = false;
};

/// With h(y) = 1 - |y| and grad h(u) = -u/|u|, returns
/// min over u in [z0, z1] and i in {0, 1} of x_i . grad h(u), and whether it
/// exceeds k_U / 2. The segment is sampled at `samples` points.
inline SegmentNormalResult segment_normal_check(const Vector& x0, const Vector& x1, const Vector& z0,
                                                const Vector& z1, double k_U, int samples = 100) {
  const Vector d = z1 - z0;
  const double len2 = d.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp(-z0.dot(d) / len2, 0.0, 1.0) : 0.0;
  if ((z0 + t * d).norm() <= 1e-9) throw DomainError("segment_normal_check: the segment passes through the origin");
  SegmentNormalResult r;
  r.min_projection = std::numeric_limits<double>::infinity();
  const int steps = std::max(samples, 2);
  for (int s = 0; s < steps; ++s) {
    const Vector u = z0 + (static_cast<double>(s) / (steps - 1)) * d;
    const Vector grad = -u / u.norm();
    r.min_projection = std::min({r.min_projection, x0.dot(grad), x1.dot(grad)});
  }
  r.pass = r.min_projection > 0.5 * k_U;
  return r;
}

inline SegmentNormalResult segment_normal_check(const MultiMap& mm, std::size_t i0, std::size_t i1, double k_U,
                                                int samples = 100) {
  const auto& a = mm.atoms.at(i0);
  const auto& b = mm.atoms.at(i1);
  if (a.region != SourceRegion::S2 || b.region != SourceRegion::S2)
    throw DomainError("segment_normal_check: both atoms must be bivalent");
  return segment_normal_check(a.x.coords(), b.x.coords(), a.t_minus.coords(), b.t_minus.coords(), k_U, samples);
}

struct ObtuseSumMargin {
  double alpha = 0.0;
  double margin = 0.0;
};

/// alpha = max(0, angle(u, v) - pi/2) and margin = |u + v| - |u| cos(alpha).
/// The margin is nonnegative whenever alpha < pi/2.
inline ObtuseSumMargin obtuse_sum_margin(const Vector& u, const Vector& v) {
  const double nu = u.norm();
  if (!(nu > 0.0)) throw DomainError("obtuse_sum_margin: u must be nonzero");
  const double nv = v.norm();
  double angle = 0.0;
  if (nv > 0.0) angle = std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0));
  if (angle >= M_PI) throw DomainError("obtuse_sum_margin: u and v are antiparallel");
  ObtuseSumMargin r;
  r.alpha = std::max(0.0, angle - 0.5 * M_PI);
  if (r.alpha >= 0.5 * M_PI) throw DomainError("obtuse_sum_margin: alpha must be below pi/2");
  r.margin = (u + v).norm() - nu * std::cos(r.alpha);
  return r;
}

/// min over pairs in `region` of (s-(y1) - s-(y0)).(y1 - y0).
inline double monotonicity_check(const InverseMaps& inv, const std::vector<std::size_t>& region) {
  if (region.size() < 2) throw InsufficientData("monotonicity_check: fewer than 2 atoms");
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < region.size(); ++a)
    for (std::size_t b = a + 1; b < region.size(); ++b) {
      const auto& p = inv.atoms.at(region[a]);
      const auto& q = inv.atoms.at(region[b]);
      worst = std::min(worst, (p.s_minus.coords() - q.s_minus.coords()).dot(p.y.coords() - q.y.coords()));
    }
  return worst;
}

/// Angle between y1 - y0 and omega1 y1 - omega0 y0.
inline double beta_angle(const Vector& y0, double omega0, const Vector& y1, double omega1) {
  const Vector d = y1 - y0;
  const Vector w = omega1 * y1 - omega0 * y0;
  const double nd = d.norm(), nw = w.norm();
  if (!(nw > 0.0) || !(nd > 0.0)) throw DomainError("beta_angle: undefined for coincident weighted points");
  return std::acos(std::clamp(d.dot(w) / (nd * nw), -1.0, 1.0));
}

struct BetaRecord {
  std::size_t j = 0;
  double beta = 0.0;
  double gamma = 0.0;  // angle between y and y1
};

struct DichotomyProbe {
  std::size_t y1 = 0;
  int m = 0;
  std::vector<BetaRecord> betas;
  /// Theta_m(y1): targets with beta in [pi/2 - 1/m, pi/2].
  std::vector<std::size_t> members;
  /// beta < (pi - gamma)/2 (+1e-9) for every pair (y, y1).
  bool gamma_bound_ok = true;
  /// min over Theta_m of |s+(y1) - s+(y)| / |y1 - y|; NaN when Theta_m is empty.
  double K = std::numeric_limits<double>::quiet_NaN();
};

inline DichotomyProbe dichotomy_probe(const InverseMaps& inv, std::size_t y1, int m) {
  if (m <= 1) throw DomainError("dichotomy_probe: m must exceed 1");
  const auto& a = inv.atoms.at(y1);
  if (a.region != TargetRegion::T2) throw DomainError("dichotomy_probe: y1 must lie in T2");
  DichotomyProbe p;
  p.y1 = y1;
  p.m = m;
  const double lo = 0.5 * M_PI - 1.0 / m;
  for (std::size_t j = 0; j < inv.size(); ++j) {
    if (j == y1 || inv[j].region != TargetRegion::T2) continue;
    const auto& b = inv[j];
    BetaRecord rec;
    rec.j = j;
    rec.beta = beta_angle(b.y.coords(), b.omega, a.y.coords(), a.omega);
    rec.gamma = std::acos(std::clamp(a.y.dot(b.y), -1.0, 1.0));
    if (!(rec.beta < 0.5 * (M_PI - rec.gamma) + 1e-9)) p.gamma_bound_ok = false;
    if (rec.beta >= lo && rec.beta <= 0.5 * M_PI) {
      p.members.push_back(j);
      const double ratio = (a.s_plus.coords() - b.s_plus.coords()).norm() / (a.y.coords() - b.y.coords()).norm();
      p.K = std::isnan(p.K) ? ratio : std::min(p.K, ratio);
    }
    p.betas.push_back(rec);
  }
  return p;
}

struct InjectivityBound {
  double min_ratio_minus = std::numeric_limits<double>::quiet_NaN();
  double min_ratio_plus = std::numeric_limits<double>::quiet_NaN();
  std::size_t pairs_minus = 0;
  std::size_t pairs_plus = 0;
};

namespace detail {
// Targets sharing one source image cannot be told apart at this resolution;
// each group of equal images is replaced by one representative target.
inline double injectivity_ratio(const InverseMaps& inv, const std::vector<std::size_t>& V, MapBranch branch,
                                double exponent, double r_max, std::size_t& pairs) {
  struct Group {
    Vector image;
    Vector y_sum;
  };
  std::vector<Group> groups;
  for (std::size_t j : V) {
    const auto& e = inv.atoms.at(j);
    const Vector& img = branch == MapBranch::Plus ? e.s_plus.coords() : e.s_minus.coords();
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return (g.image - img).norm() <= 1e-12; });
    if (it == groups.end())
      groups.push_back({img, e.y.coords()});
    else
      it->y_sum += e.y.coords();
  }
  double worst = std::numeric_limits<double>::infinity();
  pairs = 0;
  for (std::size_t a = 0; a < groups.size(); ++a)
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      const double r = (groups[a].y_sum.normalized() - groups[b].y_sum.normalized()).norm();
      if (!(r > 0.0) || r > r_max) continue;
      ++pairs;
      worst = std::min(worst, (groups[a].image - groups[b].image).norm() / std::pow(r, exponent));
    }
  return pairs ? worst : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace detail

/// min over close pairs of |s(y1) - s(y0)| / |y1 - y0|^exponent for s = s-
/// and s = s+, after collapsing targets with identical images. Throws
/// InsufficientData when neither branch has a pair left.
inline InjectivityBound injectivity_lower_bound(const InverseMaps& inv, const std::vector<std::size_t>& V,
                                                double exponent, double r_max = 0.5) {
  if (V.size() < 2) throw InsufficientData("injectivity_lower_bound: fewer than 2 atoms");
  InjectivityBound r;
  r.min_ratio_minus = detail::injectivity_ratio(inv, V, MapBranch::Minus, exponent, r_max, r.pairs_minus);
  r.min_ratio_plus = detail::injectivity_ratio(inv, V, MapBranch::Plus, exponent, r_max, r.pairs_plus);
  if (r.pairs_minus == 0 && r.pairs_plus == 0)
    throw InsufficientData("injectivity_lower_bound: no distinct close pairs after deduplication");
  return r;
}

}  // namespace sphereot
