#pragma once

// Reads an optimal coupling as a pair of maps t+ / t- on the source sphere
// (and s+ / s- on the target sphere), and splits both spheres into the
// degenerate, univalent and bivalent regions.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "sphereot/errors.hpp"
#include "sphereot/measure.hpp"
#include "sphereot/sphere_geometry.hpp"
#include "sphereot/transport.hpp"

namespace sphereot {

enum class SourceRegion { Unclassified, S0, S1, S2 };
enum class TargetRegion { Unsupported, T0, T1, T2 };

inline const char* to_string(SourceRegion r) {
  switch (r) {
    case SourceRegion::S0: return "S0";
    case SourceRegion::S1: return "S1";
    case SourceRegion::S2: return "S2";
    default: return "unclassified";
  }
}
inline const char* to_string(TargetRegion r) {
  switch (r) {
    case TargetRegion::T0: return "T0";
    case TargetRegion::T1: return "T1";
    case TargetRegion::T2: return "T2";
    default: return "unsupported";
  }
}

/// Support of a coupling indexed by source and by target.
class SupportIndex {
 public:
  struct Link {
    std::size_t other;
    double mass;
  };

  explicit SupportIndex(const Coupling& c) : by_source_(c.source_count), by_target_(c.target_count) {
    for (const auto& e : c.entries) {
      by_source_[e.i].push_back({e.j, e.mass});
      by_target_[e.j].push_back({e.i, e.mass});
    }
  }
  const std::vector<Link>& of_source(std::size_t i) const { return by_source_.at(i); }
  const std::vector<Link>& of_target(std::size_t j) const { return by_target_.at(j); }

 private:
  std::vector<std::vector<Link>> by_source_;
  std::vector<std::vector<Link>> by_target_;
};

struct SupportImage {
  std::size_t j;
  double mass;
  double alignment;  // x_i . y_j
};

/// Targets receiving mass from source atom i, by descending x_i . y_j.
inline std::vector<SupportImage> support_images(const Coupling& coupling, const DiscreteMeasure& mu,
                                                const DiscreteMeasure& nu, std::size_t i) {
  if (i >= coupling.source_count) throw DomainError("support_images: source index out of range");
  std::vector<SupportImage> out;
  for (const auto& e : coupling.entries)
    if (e.i == i) out.push_back({e.j, e.mass, mu.point(i).dot(nu.point(e.j))});
  std::sort(out.begin(), out.end(), [](const SupportImage& a, const SupportImage& b) {
    return a.alignment > b.alignment || (a.alignment == b.alignment && a.j < b.j);
  });
  return out;
}

/// Group of support atoms read as one continuum image.
struct ImageCluster {
  SpherePoint point;  // mass-weighted spherical average
  double mass = 0.0;
  std::vector<std::size_t> atoms;
};

/// Single-linkage clusters of the given atoms: two atoms share a cluster when
/// a chain of hops no longer than merge_tol joins them.
inline std::vector<ImageCluster> cluster_images(const std::vector<SpherePoint>& points,
                                                const std::vector<SupportIndex::Link>& links, double merge_tol) {
  const std::size_t k = links.size();
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      if ((points[links[a].other].coords() - points[links[b].other].coords()).norm() <= merge_tol)
        parent[find(a)] = find(b);

  std::vector<ImageCluster> clusters;
  std::vector<long> slot(k, -1);
  std::vector<Vector> sums;
  for (std::size_t a = 0; a < k; ++a) {
    const std::size_t r = find(a);
    if (slot[r] < 0) {
      slot[r] = static_cast<long>(clusters.size());
      clusters.emplace_back();
      sums.push_back(Vector::Zero(points[links[a].other].ambient_dim()));
    }
    auto& c = clusters[static_cast<std::size_t>(slot[r])];
    c.mass += links[a].mass;
    c.atoms.push_back(links[a].other);
    sums[static_cast<std::size_t>(slot[r])] += links[a].mass * points[links[a].other].coords();
  }
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    clusters[c].point = SpherePoint::normalized(sums[c]);
    std::sort(clusters[c].atoms.begin(), clusters[c].atoms.end());
  }
  return clusters;
}

struct MultiMapEntry {
  SpherePoint x;
  SpherePoint t_plus;
  SpherePoint t_minus;
  double lambda = 0.0;
  /// |t+ - t- - lambda x|, the tangential part of t+ - t-.
  double collinearity_residual = 0.0;
  SourceRegion region = SourceRegion::Unclassified;
  bool bivalent = false;
  /// Target atoms merged into t+ and t- (identical when univalent).
  std::vector<std::size_t> plus_targets;
  std::vector<std::size_t> minus_targets;
  double plus_mass = 0.0;
  double minus_mass = 0.0;
};

struct MultiMap {
  int n = 0;
  double merge_tol = 0.0;
  double zero_tol = 0.0;
  std::vector<MultiMapEntry> atoms;
  /// Source atoms whose bivalent images violate x.t+ > 0 > x.t-, or whose
  /// univalent image lies on the far side (x.t+ < -zero_tol).
  std::vector<std::size_t> anomalies;

  std::size_t size() const noexcept { return atoms.size(); }
  const MultiMapEntry& operator[](std::size_t i) const { return atoms[i]; }

  std::vector<std::size_t> indices_in(SourceRegion r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (atoms[i].region == r) out.push_back(i);
    return out;
  }
};

namespace detail {
inline void fill_pair(MultiMapEntry& e) {
  const Vector diff = e.t_plus.coords() - e.t_minus.coords();
  e.lambda = diff.dot(e.x.coords());
  e.collinearity_residual = (diff - e.lambda * e.x.coords()).norm();
}
}  // namespace detail

/// Two-valued map read off an optimal coupling. Images of each source atom
/// are clustered with `merge_tol`; t+ is the cluster maximizing x.y and t-
/// the one minimizing it. A single cluster gives t- := t+.
inline MultiMap extract_multimap(const Coupling& coupling, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 double merge_tol) {
  if (!(merge_tol > 0.0)) throw DomainError("extract_multimap: merge_tol must be positive");
  if (coupling.source_count != mu.size() || coupling.target_count != nu.size())
    throw ExtractionError("extract_multimap: coupling does not match the measures");
  const SupportIndex support(coupling);
  MultiMap mm;
  mm.n = mu.dim();
  mm.merge_tol = merge_tol;
  mm.atoms.resize(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto& links = support.of_source(i);
    if (links.empty()) throw ExtractionError("source atom " + std::to_string(i) + " carries no mass");
    auto clusters = cluster_images(nu.points(), links, merge_tol);
    if (clusters.size() > 2)
      throw ExtractionError("source atom " + std::to_string(i) + " has " + std::to_string(clusters.size()) +
                            " image clusters; the discretization is under-resolved");
    const SpherePoint& x = mu.point(i);
    std::sort(clusters.begin(), clusters.end(),
              [&](const ImageCluster& a, const ImageCluster& b) { return x.dot(a.point) > x.dot(b.point); });
    auto& e = mm.atoms[i];
    e.x = x;
    e.t_plus = clusters.front().point;
    e.plus_targets = clusters.front().atoms;
    e.plus_mass = clusters.front().mass;
    e.t_minus = clusters.back().point;
    e.minus_targets = clusters.back().atoms;
    e.minus_mass = clusters.back().mass;
    e.bivalent = clusters.size() == 2;
    detail::fill_pair(e);
  }
  return mm;
}

/// Labels each source atom S0 / S1 / S2. Univalent atoms go to S0 when
/// |x.t+| <= zero_tol and to S1 otherwise; bivalent atoms go to S2.
inline MultiMap classify_regions(MultiMap mm, double zero_tol) {
  if (!(zero_tol > 0.0)) throw DomainError("classify_regions: zero_tol must be positive");
  mm.zero_tol = zero_tol;
  mm.anomalies.clear();
  for (std::size_t i = 0; i < mm.atoms.size(); ++i) {
    auto& e = mm.atoms[i];
    const double a_plus = e.x.dot(e.t_plus);
    if (e.bivalent) {
      e.region = SourceRegion::S2;
      if (!(a_plus > 0.0) || !(e.x.dot(e.t_minus) < 0.0) || !(e.lambda > 0.0)) mm.anomalies.push_back(i);
    } else if (std::abs(a_plus) <= zero_tol) {
      e.region = SourceRegion::S0;
    } else if (a_plus > zero_tol) {
      e.region = SourceRegion::S1;
    } else {
      e.region = SourceRegion::S0;
      mm.anomalies.push_back(i);
    }
  }
  return mm;
}

struct InverseEntry {
  SpherePoint y;
  SpherePoint s_plus;
  SpherePoint s_minus;
  double omega = 0.0;
  double collinearity_residual = 0.0;
  TargetRegion region = TargetRegion::Unsupported;
  std::vector<std::size_t> plus_sources;
  std::vector<std::size_t> minus_sources;
};

struct InverseMaps {
  int n = 0;
  std::vector<InverseEntry> atoms;

  std::size_t size() const noexcept { return atoms.size(); }
  const InverseEntry& operator[](std::size_t j) const { return atoms[j]; }

  std::vector<std::size_t> indices_in(TargetRegion r) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < atoms.size(); ++j)
      if (atoms[j].region == r) out.push_back(j);
    return out;
  }
};

/// Target-side maps s+ / s-, built from the sources of each target atom with
/// the same clustering and ordering rules as the source side (roles of the
/// two spheres exchanged). Uses the tolerances stored in `mm`.
inline InverseMaps invert_maps(const MultiMap& mm, const Coupling& coupling, const DiscreteMeasure& mu,
                               const DiscreteMeasure& nu) {
  if (coupling.source_count != mu.size() || coupling.target_count != nu.size() || mm.size() != mu.size())
    throw ExtractionError("invert_maps: coupling does not match the measures");
  const double zero_tol = mm.zero_tol > 0.0 ? mm.zero_tol : mm.merge_tol;
  const SupportIndex support(coupling);
  InverseMaps inv;
  inv.n = nu.dim();
  inv.atoms.resize(nu.size());
  for (std::size_t j = 0; j < nu.size(); ++j) {
    auto& e = inv.atoms[j];
    e.y = nu.point(j);
    const auto& links = support.of_target(j);
    if (links.empty()) {
      e.s_plus = e.s_minus = e.y;
      e.region = TargetRegion::Unsupported;
      continue;
    }
    auto clusters = cluster_images(mu.points(), links, mm.merge_tol);
    if (clusters.size() > 2)
      throw ExtractionError("target atom " + std::to_string(j) + " has " + std::to_string(clusters.size()) +
                            " source clusters; the discretization is under-resolved");
    std::sort(clusters.begin(), clusters.end(),
              [&](const ImageCluster& a, const ImageCluster& b) { return e.y.dot(a.point) > e.y.dot(b.point); });
    e.s_plus = clusters.front().point;
    e.plus_sources = clusters.front().atoms;
    e.s_minus = clusters.back().point;
    e.minus_sources = clusters.back().atoms;
    const Vector diff = e.s_plus.coords() - e.s_minus.coords();
    e.omega = diff.dot(e.y.coords());
    e.collinearity_residual = (diff - e.omega * e.y.coords()).norm();
    if (clusters.size() == 2)
      e.region = TargetRegion::T2;
    else
      e.region = std::abs(e.y.dot(e.s_plus)) <= zero_tol ? TargetRegion::T0 : TargetRegion::T1;
  }
  return inv;
}

/// Part of a measure kept on a subset of its atoms, without renormalization.
struct RestrictedMeasure {
  std::vector<std::size_t> atoms;
  std::vector<double> weights;
  double mass = 0.0;

  bool empty() const noexcept { return atoms.empty(); }

  /// The restriction rescaled to a probability measure.
  DiscreteMeasure normalized(const DiscreteMeasure& parent) const {
    if (!(mass > 0.0)) throw DomainError("cannot normalize a restriction of zero mass");
    std::vector<SpherePoint> pts;
    std::vector<double> w, a;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      pts.push_back(parent.point(atoms[k]));
      w.push_back(weights[k] / mass);
      a.push_back(parent.cell_areas()[atoms[k]]);
    }
    return DiscreteMeasure(parent.dim(), std::move(pts), std::move(w), std::move(a));
  }
};

/// Splits nu into nu1 (targets outside t-(S2)) and the remainder.
inline std::pair<RestrictedMeasure, RestrictedMeasure> nu1_split(const MultiMap& mm, const DiscreteMeasure& nu) {
  std::vector<char> inner(nu.size(), 0);
  for (const auto& e : mm.atoms)
    if (e.region == SourceRegion::S2)
      for (std::size_t j : e.minus_targets) inner.at(j) = 1;
  RestrictedMeasure nu1, rest;
  for (std::size_t j = 0; j < nu.size(); ++j) {
    auto& dst = inner[j] ? rest : nu1;
    dst.atoms.push_back(j);
    dst.weights.push_back(nu.weight(j));
    dst.mass += nu.weight(j);
  }
  return {std::move(nu1), std::move(rest)};
}

/// min over support pairs of (x_i - x_k).(y_j - y_l); nonnegative for an
/// optimal plan of the squared-distance cost.
inline double support_monotonicity_min(const Coupling& coupling, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  double worst = std::numeric_limits<double>::infinity();
  const auto& e = coupling.entries;
  for (std::size_t a = 0; a < e.size(); ++a)
    for (std::size_t b = a + 1; b < e.size(); ++b)
      worst = std::min(worst, (mu.point(e[a].i).coords() - mu.point(e[b].i).coords())
                                  .dot(nu.point(e[a].j).coords() - nu.point(e[b].j).coords()));
  return e.size() < 2 ? 0.0 : worst;
}

/// Per-atom check of the bivalent structure on a classified map.
struct BivalenceAudit {
  std::size_t s2_count = 0;
  std::size_t sign_violations = 0;         // lambda <= 0, x.t+ <= 0 or x.t- >= 0
  std::size_t collinearity_violations = 0;  // residual > ratio * lambda
  std::size_t plus_not_in_t1 = 0;           // target atoms of t+(S2) outside T1
  std::size_t plus_minus_overlap = 0;       // target atoms in both t+(S2) and t-(S2)
  double max_lambda = 0.0;
  double max_residual_ratio = 0.0;

  bool ok() const noexcept {
    return sign_violations == 0 && collinearity_violations == 0 && plus_not_in_t1 == 0 && plus_minus_overlap == 0;
  }
};

inline BivalenceAudit audit_bivalence(const MultiMap& mm, const InverseMaps& inv, double residual_ratio = 0.1) {
  BivalenceAudit a;
  std::unordered_set<std::size_t> plus, minus;
  for (const auto& e : mm.atoms) {
    a.max_lambda = std::max(a.max_lambda, e.lambda);
    if (e.region != SourceRegion::S2) continue;
    ++a.s2_count;
    if (!(e.lambda > 0.0) || !(e.x.dot(e.t_plus) > 0.0) || !(e.x.dot(e.t_minus) < 0.0)) ++a.sign_violations;
    if (e.lambda > 0.0) a.max_residual_ratio = std::max(a.max_residual_ratio, e.collinearity_residual / e.lambda);
    if (e.collinearity_residual > residual_ratio * e.lambda) ++a.collinearity_violations;
    plus.insert(e.plus_targets.begin(), e.plus_targets.end());
    minus.insert(e.minus_targets.begin(), e.minus_targets.end());
  }
  for (std::size_t j : plus) {
    if (inv[j].region != TargetRegion::T1) ++a.plus_not_in_t1;
    if (minus.count(j)) ++a.plus_minus_overlap;
  }
  return a;
}

}  // namespace sphereot
