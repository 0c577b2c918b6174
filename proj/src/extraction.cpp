#include "planeway/extraction.hpp"

#include "planeway/error.hpp"
#include "planeway/mapping.hpp"
#include "planeway/parallel.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <chrono>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace planeway {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BPoint, std::size_t>;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool lex_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

Vec3 oriented(Vec3 n) {
  constexpr double eps = 1e-6;
  if (n.z() < -eps) return -n;
  if (n.z() > eps) return n;
  if (n.x() < -eps || (std::abs(n.x()) <= eps && n.y() < 0.0)) return -n;
  return n;
}

std::vector<Vec3> gather(const PointCloud& cloud, const std::vector<std::size_t>& idx) {
  std::vector<Vec3> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(cloud.points[i]);
  return out;
}

void refit(const PointCloud& cloud, PlaneSegment& seg, const ExtractionConfig& config) {
  const auto pts = gather(cloud, seg.point_indices);
  const PlaneFit fit = fit_plane(pts);
  seg.transform = fit.frame;
  seg.inclination = fit.inclination;
  seg.thickness = fit.thickness;
  seg.kind = classify(fit.inclination, seg.merged_from_stairs, config);
}

ConvexPolygon2D local_hull(const PointCloud& cloud, const PlaneSegment& seg, const Transform& frame) {
  std::vector<Vec2> pts;
  pts.reserve(seg.size() + seg.extent_points.size());
  for (auto i : seg.point_indices) pts.push_back(frame.project(cloud.points[i]));
  for (const Vec3& p : seg.extent_points) pts.push_back(frame.project(p));
  return convex_hull(pts);
}

// Sutherland-Hodgman clip of one convex polygon by another; returns the overlap area.
double intersection_area(const ConvexPolygon2D& a, const ConvexPolygon2D& b) {
  std::vector<Vec2> poly = a.vertices();
  const auto& clip = b.vertices();
  for (std::size_t i = 0; i < clip.size() && !poly.empty(); ++i) {
    const Vec2& p0 = clip[i];
    const Vec2 e = clip[(i + 1) % clip.size()] - p0;
    std::vector<Vec2> next;
    for (std::size_t j = 0; j < poly.size(); ++j) {
      const Vec2& u = poly[j];
      const Vec2& v = poly[(j + 1) % poly.size()];
      const double su = cross2(e, u - p0);
      const double sv = cross2(e, v - p0);
      if (su >= 0.0) next.push_back(u);
      if ((su >= 0.0) != (sv >= 0.0)) next.push_back(u + (v - u) * (su / (su - sv)));
    }
    poly = std::move(next);
  }
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) twice += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * std::abs(twice);
}

// Hull of `seg` re-expressed in `frame` coordinates (via world positions of its hull).
ConvexPolygon2D hull_in_frame(const ConvexPolygon2D& hull, const Transform& own, const Transform& frame) {
  std::vector<Vec2> pts;
  for (const Vec2& v : hull.vertices()) pts.push_back(frame.project(own.to_world(v)));
  return convex_hull(pts);
}

ConvexPolygon2D xy_footprint(const ConvexPolygon2D& hull, const Transform& own) {
  std::vector<Vec2> pts;
  for (const Vec2& v : hull.vertices()) pts.push_back(own.to_world(v).head<2>());
  return convex_hull(pts);
}

void sort_segments(const PointCloud& cloud, std::vector<PlaneSegment>& segs) {
  std::vector<std::pair<Vec3, std::size_t>> keyed;
  for (std::size_t i = 0; i < segs.size(); ++i) keyed.emplace_back(segs[i].transform.translation, i);
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    const auto na = segs[a.second].size();
    const auto nb = segs[b.second].size();
    if (na != nb) return na > nb;
    return lex_less(a.first, b.first);
  });
  std::vector<PlaneSegment> out;
  out.reserve(segs.size());
  for (const auto& k : keyed) out.push_back(std::move(segs[k.second]));
  segs = std::move(out);
  (void)cloud;
}

struct Dsu {
  std::vector<std::size_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

}  // namespace

PlaneKind classify(double inclination, bool merged_from_stairs, const ExtractionConfig& config) {
  if (inclination >= config.traversable_max_inclination_deg * kDeg) return PlaneKind::Vertical;
  if (merged_from_stairs) return PlaneKind::Stairs;
  if (inclination < config.ground_max_inclination_deg * kDeg) return PlaneKind::Ground;
  return PlaneKind::Slope;
}

std::vector<std::vector<std::size_t>> knn_graph(const std::vector<Vec3>& points, int k) {
  std::vector<Entry> entries;
  entries.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    entries.emplace_back(BPoint(points[i].x(), points[i].y(), points[i].z()), i);
  }
  const bgi::rtree<Entry, bgi::quadratic<16>> tree(entries.begin(), entries.end());
  const std::size_t kk = std::min<std::size_t>(k, points.size());

  std::vector<std::vector<std::size_t>> out(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    std::vector<Entry> hits;
    hits.reserve(kk);
    tree.query(bgi::nearest(entries[i].first, static_cast<unsigned>(kk)), std::back_inserter(hits));
    std::vector<std::pair<double, std::size_t>> ranked;
    for (const auto& h : hits) ranked.emplace_back((points[h.second] - points[i]).squaredNorm(), h.second);
    std::sort(ranked.begin(), ranked.end());
    auto& nb = out[i];
    nb.reserve(ranked.size());
    for (const auto& r : ranked) nb.push_back(r.second);
  });
  return out;
}

PointCloud preprocess(const PointCloud& cloud, double voxel, int k_neighbors, int min_points, double std_ratio) {
  if (!(voxel > 0.0) || k_neighbors < 3) {
    throw Error(ErrorCode::ConfigError, "preprocess needs voxel > 0 and k_neighbors >= 3");
  }
  std::vector<Vec3> raw;
  raw.reserve(cloud.size());
  for (const Vec3& p : cloud.points) {
    if (p.allFinite()) raw.push_back(p);
  }
  if (raw.size() < static_cast<std::size_t>(std::max(min_points, k_neighbors))) {
    throw Error(ErrorCode::EmptyCloud, "only " + std::to_string(raw.size()) + " finite points");
  }

  // Statistical outlier removal on the mean distance to the k nearest neighbors.
  // Done before downsampling: voxel centroids of a surface lying on a voxel
  // boundary come out twice as dense, which would skew the statistics.
  const auto knn = knn_graph(raw, k_neighbors + 1);
  std::vector<double> mean_dist(raw.size(), 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t j = 1; j < knn[i].size(); ++j) mean_dist[i] += (raw[knn[i][j]] - raw[i]).norm();
    mean_dist[i] /= static_cast<double>(knn[i].size() - 1);
  }
  const double mu = std::accumulate(mean_dist.begin(), mean_dist.end(), 0.0) / mean_dist.size();
  double var = 0.0;
  for (double d : mean_dist) var += (d - mu) * (d - mu);
  const double limit = mu + std_ratio * std::sqrt(var / mean_dist.size());

  std::map<std::array<long long, 3>, std::pair<Vec3, std::size_t>> voxels;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (mean_dist[i] > limit) continue;
    const Vec3& p = raw[i];
    const std::array<long long, 3> key{static_cast<long long>(std::floor(p.x() / voxel)),
                                       static_cast<long long>(std::floor(p.y() / voxel)),
                                       static_cast<long long>(std::floor(p.z() / voxel))};
    auto& acc = voxels.try_emplace(key, Vec3::Zero(), 0).first->second;
    acc.first += p;
    ++acc.second;
  }
  PointCloud out;
  out.points.reserve(voxels.size());
  for (const auto& [key, acc] : voxels) out.points.push_back(acc.first / static_cast<double>(acc.second));
  if (out.points.size() < static_cast<std::size_t>(std::max(min_points, k_neighbors))) {
    throw Error(ErrorCode::EmptyCloud, "only " + std::to_string(out.points.size()) + " points after filtering");
  }

  const auto nbrs = knn_graph(out.points, k_neighbors);
  out.normals.resize(out.points.size());
  parallel_for(out.points.size(), [&](std::size_t i) {
    Vec3 c = Vec3::Zero();
    for (auto j : nbrs[i]) c += out.points[j];
    c /= static_cast<double>(nbrs[i].size());
    Mat3 cov = Mat3::Zero();
    for (auto j : nbrs[i]) {
      const Vec3 d = out.points[j] - c;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    out.normals[i] = oriented(eig.eigenvectors().col(0).normalized());
  });
  return out;
}

std::vector<PlaneSegment> region_growing(const PointCloud& cloud, const ExtractionConfig& config) {
  if (!cloud.has_normals()) throw Error(ErrorCode::DegenerateInput, "region growing needs normals");
  const std::size_t n = cloud.size();
  const auto nbrs = knn_graph(cloud.points, config.k_neighbors);

  std::vector<double> curvature(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    PlaneMoments m;
    for (auto j : nbrs[i]) m.add(cloud.points[j]);
    const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(m.covariance(), Eigen::EigenvaluesOnly).eigenvalues();
    const double sum = ev.sum();
    curvature[i] = sum > 0.0 ? std::max(ev(0), 0.0) / sum : 0.0;
  });
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return curvature[a] < curvature[b]; });

  const double cos_thr = std::cos(config.angle_threshold_deg * kDeg);
  std::vector<int> label(n, -1);
  std::vector<PlaneSegment> segments;
  std::vector<std::size_t> members, frontier;

  for (std::size_t seed : order) {
    if (label[seed] >= 0) continue;
    const int id = static_cast<int>(segments.size());
    members.assign(1, seed);
    frontier.assign(1, seed);
    label[seed] = id;
    PlaneMoments moments;
    moments.add(cloud.points[seed]);
    Vec3 normal = cloud.normals[seed];
    Vec3 center = cloud.points[seed];
    std::size_t next_refit = 8;

    for (std::size_t head = 0; head < frontier.size(); ++head) {
      for (auto j : nbrs[frontier[head]]) {
        if (label[j] >= 0) continue;
        if (std::abs(cloud.normals[j].dot(normal)) < cos_thr) continue;
        if (std::abs(normal.dot(cloud.points[j] - center)) >= config.dist_threshold) continue;
        label[j] = id;
        members.push_back(j);
        frontier.push_back(j);
        moments.add(cloud.points[j]);
        if (members.size() >= next_refit) {
          next_refit = members.size() * 3 / 2;
          try {
            const PlaneFit fit = moments.fit();
            normal = fit.frame.normal();
            center = fit.frame.translation;
          } catch (const Error&) {
            // Still collinear; keep the seed estimate.
          }
        }
      }
    }

    if (members.size() < static_cast<std::size_t>(config.min_segment_points)) {
      for (auto j : members) label[j] = -1;
      label[seed] = -2;  // never reseed from here
      continue;
    }
    PlaneSegment seg;
    seg.point_indices = members;
    std::sort(seg.point_indices.begin(), seg.point_indices.end());
    try {
      refit(cloud, seg, config);
    } catch (const Error&) {
      for (auto j : members) label[j] = -1;
      label[seed] = -2;
      continue;
    }
    segments.push_back(std::move(seg));
  }
  sort_segments(cloud, segments);
  return segments;
}

std::vector<PlaneSegment> merge_stairs(const PointCloud& cloud, std::vector<PlaneSegment> segments,
                                       const ExtractionConfig& config) {
  struct Tread {
    std::size_t seg;
    double z;
    Vec2 center;
    Vec2 long_axis;
    Vec2 short_axis;
    ConvexPolygon2D footprint;
  };
  std::vector<Tread> treads;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.inclination >= config.tread_max_inclination_deg * kDeg) continue;
    std::vector<Vec2> xy;
    for (auto i : seg.point_indices) xy.push_back(cloud.points[i].head<2>());
    Vec2 c = Vec2::Zero();
    for (const Vec2& p : xy) c += p;
    c /= static_cast<double>(xy.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const Vec2& p : xy) cov += (p - c) * (p - c).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    const Vec2 minor = eig.eigenvectors().col(0);
    double lo = 1e300, hi = -1e300;
    for (const Vec2& p : xy) {
      lo = std::min(lo, minor.dot(p - c));
      hi = std::max(hi, minor.dot(p - c));
    }
    if (hi - lo > config.tread_max_depth) continue;
    ConvexPolygon2D fp;
    try {
      fp = convex_hull(xy);
    } catch (const Error&) {
      continue;
    }
    treads.push_back({s, seg.transform.translation.z(), c, eig.eigenvectors().col(1), minor, fp});
  }
  std::sort(treads.begin(), treads.end(), [](const Tread& a, const Tread& b) {
    return a.z < b.z || (a.z == b.z && a.seg < b.seg);
  });

  auto footprint_gap = [](const ConvexPolygon2D& a, const ConvexPolygon2D& b) {
    if (polygons_overlap(a, b)) return 0.0;
    double best = 1e300;
    for (const ConvexPolygon2D* p : {&a, &b}) {
      const ConvexPolygon2D* q = p == &a ? &b : &a;
      const auto& qv = q->vertices();
      for (const Vec2& v : p->vertices()) {
        for (std::size_t i = 0; i < qv.size(); ++i) {
          best = std::min(best, point_segment_distance(v, qv[i], qv[(i + 1) % qv.size()]));
        }
      }
    }
    return best;
  };
  auto lateral_overlap = [](const Tread& a, const Tread& b) {
    double alo = 1e300, ahi = -1e300, blo = 1e300, bhi = -1e300;
    for (const Vec2& v : a.footprint.vertices()) {
      alo = std::min(alo, a.long_axis.dot(v));
      ahi = std::max(ahi, a.long_axis.dot(v));
    }
    for (const Vec2& v : b.footprint.vertices()) {
      blo = std::min(blo, a.long_axis.dot(v));
      bhi = std::max(bhi, a.long_axis.dot(v));
    }
    const double overlap = std::min(ahi, bhi) - std::max(alo, blo);
    return overlap / std::max(1e-9, std::min(ahi - alo, bhi - blo));
  };

  const double cos_dir = std::cos(30.0 * kDeg);
  std::vector<char> used(treads.size(), 0);
  std::vector<std::vector<std::size_t>> chains;
  for (std::size_t start = 0; start < treads.size(); ++start) {
    if (used[start]) continue;
    std::vector<std::size_t> chain{start};
    Vec2 direction = Vec2::Zero();
    double rise_ref = 0.0;
    while (true) {
      const Tread& cur = treads[chain.back()];
      std::optional<std::size_t> best;
      for (std::size_t k = chain.back() + 1; k < treads.size(); ++k) {
        if (used[k]) continue;
        const Tread& cand = treads[k];
        const double rise = cand.z - cur.z;
        if (rise < config.rise_min) continue;
        if (rise > config.rise_max) break;
        if (rise_ref > 0.0 && std::abs(rise - rise_ref) > config.rise_regularity * rise_ref) continue;
        if (footprint_gap(cur.footprint, cand.footprint) > config.gap_threshold) continue;
        if (lateral_overlap(cur, cand) < 0.5) continue;
        const Vec2 step = cand.center - cur.center;
        if (step.norm() < 1e-6) continue;
        const Vec2 dir = step.normalized();
        if (std::abs(dir.dot(cur.short_axis)) < cos_dir) continue;
        if (direction.norm() > 0.0 && dir.dot(direction) < cos_dir) continue;
        best = k;
        break;
      }
      if (!best) break;
      const Tread& nxt = treads[*best];
      const double rise = nxt.z - cur.z;
      rise_ref = chain.size() == 1 ? rise : rise_ref;
      // Ascent direction: the first tread's short axis, oriented by the first step.
      // Centroids of partially scanned treads wander sideways, the axis does not.
      if (direction.norm() == 0.0) {
        const Vec2 step = nxt.center - cur.center;
        direction = step.dot(cur.short_axis) >= 0.0 ? cur.short_axis : Vec2(-cur.short_axis);
      }
      chain.push_back(*best);
    }
    if (chain.size() >= 2) {
      for (auto c : chain) used[c] = 1;
      chains.push_back(std::move(chain));
    }
  }
  if (chains.empty()) return segments;

  std::vector<char> consumed(segments.size(), 0);
  std::vector<PlaneSegment> stairs;
  for (const auto& chain : chains) {
    PlaneSegment merged;
    merged.merged_from_stairs = true;
    double rise_sum = 0.0;
    for (std::size_t k = 0; k < chain.size(); ++k) {
      const auto& t = treads[chain[k]];
      consumed[t.seg] = 1;
      const auto& idx = segments[t.seg].point_indices;
      merged.point_indices.insert(merged.point_indices.end(), idx.begin(), idx.end());
      if (k > 0) rise_sum += t.z - treads[chain[k - 1]].z;
    }
    std::sort(merged.point_indices.begin(), merged.point_indices.end());
    refit(cloud, merged, config);

    // Reach one rise below the first tread and above the last one along the
    // fitted plane, so the merged surface meets the floor and landing.
    const double rise = rise_sum / static_cast<double>(chain.size() - 1);
    const double z_lo = treads[chain.front()].z - rise;
    const double z_hi = treads[chain.back()].z + rise;
    const Transform& f = merged.transform;
    const double slope_z = f.x_axis().z();
    if (slope_z > 1e-6) {
      double y_lo = 1e300, y_hi = -1e300;
      for (auto i : merged.point_indices) {
        const double y = f.project(cloud.points[i]).y();
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
      const double x_lo = (z_lo - f.translation.z()) / slope_z;
      const double x_hi = (z_hi - f.translation.z()) / slope_z;
      for (double x : {x_lo, x_hi}) {
        for (double y : {y_lo, y_hi}) merged.extent_points.push_back(f.to_world(Vec2(x, y)));
      }
    }
    stairs.push_back(std::move(merged));
  }

  // Riser points of neighbouring vertical structure inside the stair extent are
  // part of the steps, not obstacles; drop them.
  struct Carve {
    Transform frame;
    ConvexPolygon2D region;
    Vec2 ascent;
  };
  std::vector<Carve> carves;
  for (const auto& s : stairs) {
    const Vec3 ax = s.transform.x_axis();
    Vec2 ascent(ax.x(), ax.y());
    if (ascent.norm() < 1e-9) continue;
    carves.push_back({s.transform, expand_polygon(local_hull(cloud, s, s.transform), config.expand_margin),
                      ascent.normalized()});
  }
  const double max_rise_height = 0.25;
  std::vector<PlaneSegment> out;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (consumed[s]) continue;
    PlaneSegment seg = std::move(segments[s]);
    if (seg.inclination >= config.traversable_max_inclination_deg * kDeg) {
      std::vector<std::size_t> kept;
      for (auto i : seg.point_indices) {
        const Vec3& p = cloud.points[i];
        bool carved = false;
        for (const auto& c : carves) {
          if (std::abs(c.frame.height(p)) >= max_rise_height) continue;
          if (!c.region.contains(c.frame.project(p))) continue;
          const Vec3& nrm = cloud.has_normals() ? cloud.normals[i] : seg.transform.normal();
          if (std::abs(Vec2(nrm.x(), nrm.y()).dot(c.ascent)) < cos_dir) continue;
          carved = true;
          break;
        }
        if (!carved) kept.push_back(i);
      }
      if (kept.size() < static_cast<std::size_t>(config.min_segment_points)) continue;
      if (kept.size() != seg.point_indices.size()) {
        seg.point_indices = std::move(kept);
        try {
          refit(cloud, seg, config);
        } catch (const Error&) {
          continue;
        }
      }
    }
    out.push_back(std::move(seg));
  }
  for (auto& s : stairs) out.push_back(std::move(s));
  sort_segments(cloud, out);
  return out;
}

PartitionedSegments merge_coplanar(const PointCloud& cloud, std::vector<PlaneSegment> segments,
                                   const ExtractionConfig& config) {
  PartitionedSegments result;
  std::vector<PlaneSegment> trav;
  for (auto& s : segments) {
    s.kind = classify(s.inclination, s.merged_from_stairs, config);
    (s.kind == PlaneKind::Vertical ? result.vertical : trav).push_back(std::move(s));
  }
  const double cos_thr = std::cos(config.angle_threshold_deg * kDeg);

  auto hulls_of = [&](const std::vector<PlaneSegment>& segs) {
    std::vector<ConvexPolygon2D> hulls;
    for (const auto& s : segs) hulls.push_back(local_hull(cloud, s, s.transform));
    return hulls;
  };

  // Near-coincident parallel duplicates (e.g. both faces of a thin slab): keep the upper.
  {
    const auto hulls = hulls_of(trav);
    std::vector<char> drop(trav.size(), 0);
    for (std::size_t i = 0; i < trav.size(); ++i) {
      for (std::size_t j = i + 1; j < trav.size(); ++j) {
        if (drop[i] || drop[j]) continue;
        const auto& a = trav[i];
        const auto& b = trav[j];
        if (std::abs(a.transform.normal().dot(b.transform.normal())) < cos_thr) continue;
        const double area_a = hulls[i].area();
        const double area_b = hulls[j].area();
        const double ratio = area_a / area_b;
        if (ratio < config.same_size_ratio_min || ratio > config.same_size_ratio_max) continue;
        const double sep = std::abs(a.transform.height(b.transform.translation));
        if (sep >= config.thickness_gap) continue;
        const ConvexPolygon2D fa = xy_footprint(hulls[i], a.transform);
        const ConvexPolygon2D fb = xy_footprint(hulls[j], b.transform);
        if (intersection_area(fa, fb) < 0.5 * std::min(fa.area(), fb.area())) continue;
        const bool a_lower = a.transform.translation.z() < b.transform.translation.z();
        drop[a_lower ? i : j] = 1;
      }
    }
    std::vector<PlaneSegment> kept;
    for (std::size_t i = 0; i < trav.size(); ++i) {
      if (!drop[i]) kept.push_back(std::move(trav[i]));
    }
    trav = std::move(kept);
  }

  // Coplanar, touching pieces of one surface: union to a fixed point.
  while (true) {
    const auto hulls = hulls_of(trav);
    Dsu dsu(trav.size());
    bool any = false;
    for (std::size_t i = 0; i < trav.size(); ++i) {
      for (std::size_t j = i + 1; j < trav.size(); ++j) {
        const auto& a = trav[i];
        const auto& b = trav[j];
        if (a.merged_from_stairs != b.merged_from_stairs) continue;
        if (std::abs(a.transform.normal().dot(b.transform.normal())) < cos_thr) continue;
        if (std::abs(a.transform.height(b.transform.translation)) >= config.dist_threshold) continue;
        if (std::abs(b.transform.height(a.transform.translation)) >= config.dist_threshold) continue;
        const ConvexPolygon2D ea = expand_polygon(hulls[i], config.expand_margin);
        const ConvexPolygon2D eb =
            expand_polygon(hull_in_frame(hulls[j], b.transform, a.transform), config.expand_margin);
        if (!polygons_overlap(ea, eb)) continue;
        any = dsu.unite(i, j) || any;
      }
    }
    if (!any) break;
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < trav.size(); ++i) groups[dsu.find(i)].push_back(i);
    std::vector<PlaneSegment> next;
    for (const auto& [root, members] : groups) {
      if (members.size() == 1) {
        next.push_back(std::move(trav[members.front()]));
        continue;
      }
      PlaneSegment g;
      for (auto i : members) {
        g.merged_from_stairs = g.merged_from_stairs || trav[i].merged_from_stairs;
        g.point_indices.insert(g.point_indices.end(), trav[i].point_indices.begin(), trav[i].point_indices.end());
        g.extent_points.insert(g.extent_points.end(), trav[i].extent_points.begin(), trav[i].extent_points.end());
      }
      std::sort(g.point_indices.begin(), g.point_indices.end());
      refit(cloud, g, config);
      next.push_back(std::move(g));
    }
    trav = std::move(next);
  }

  for (auto& s : trav) {
    if (s.kind == PlaneKind::Vertical) {
      result.vertical.push_back(std::move(s));
    } else {
      result.traversable.push_back(std::move(s));
    }
  }
  sort_segments(cloud, result.traversable);
  sort_segments(cloud, result.vertical);
  return result;
}

namespace {

Vec3 rounded(const Vec3& p) { return p.unaryExpr([](double v) { return round_decimals(v, 6); }); }

ConvexPolygon2D rounded_polygon(const ConvexPolygon2D& poly) {
  std::vector<Vec2> pts;
  for (const Vec2& v : poly.vertices()) pts.emplace_back(round_decimals(v.x(), 6), round_decimals(v.y(), 6));
  try {
    return ConvexPolygon2D(pts);
  } catch (const Error&) {
    return convex_hull(pts);  // rounding made a vertex collinear; drop it
  }
}

}  // namespace

PlaneSet extract_traversable_planes(const PointCloud& input, const RunConfig& config, StageTimings* timings) {
  const ExtractionConfig& ec = config.extraction;
  if (input.points.empty()) throw Error(ErrorCode::NoTraversablePlane, "point cloud is empty");
  auto t0 = std::chrono::steady_clock::now();
  auto lap = [&](const char* stage) {
    if (!timings) return;
    const auto now = std::chrono::steady_clock::now();
    timings->emplace_back(stage, std::chrono::duration<double, std::milli>(now - t0).count());
    t0 = now;
  };
  PointCloud cloud;
  try {
    cloud = preprocess(input, ec.voxel, ec.k_neighbors, ec.min_segment_points, ec.outlier_std_ratio);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyCloud) throw Error(ErrorCode::NoTraversablePlane, e.what());
    throw;
  }
  lap("preprocess");
  auto segments = region_growing(cloud, ec);
  lap("segment");
  segments = merge_stairs(cloud, std::move(segments), ec);
  auto parts = merge_coplanar(cloud, std::move(segments), ec);
  lap("merge");
  if (parts.traversable.empty()) throw Error(ErrorCode::NoTraversablePlane, "no traversable plane found");

  std::vector<char> assigned(cloud.size(), 0);
  for (const auto* group : {&parts.traversable, &parts.vertical}) {
    for (const auto& s : *group) {
      for (auto i : s.point_indices) assigned[i] = 1;
    }
  }

  PlaneSet set;
  const std::size_t nt = parts.traversable.size();
  set.traversable.resize(nt);
  parallel_for(nt, [&](std::size_t k) {
    const PlaneSegment& seg = parts.traversable[k];
    TraversablePlane& tp = set.traversable[k];
    tp.id = static_cast<int>(k);
    tp.kind = seg.kind;
    // Everything that is serialized is kept at its printed precision, so a
    // plane set loaded from disk is bit-identical to the one built here.
    tp.frame = canonical_frame(seg.transform);
    tp.inclination = round_decimals(seg.inclination, 6);
    tp.thickness = round_decimals(seg.thickness, 6);
    tp.point_count = seg.size();
    tp.hull = rounded_polygon(local_hull(cloud, seg, tp.frame));
    tp.boundary = rounded_polygon(expand_polygon(tp.hull, ec.expand_margin));
    for (auto i : seg.point_indices) tp.support.push_back(tp.frame.project(cloud.points[i]));
    // Unsegmented points lying on this surface (step edges, creases) still mark it observed.
    const double band = std::max(3.0 * seg.thickness, 0.03);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (assigned[i]) continue;
      const Vec3 local = tp.frame.to_local(cloud.points[i]);
      if (std::abs(local.z()) >= band) continue;
      const Vec2 q = local.head<2>();
      if (tp.boundary.contains(q)) tp.support.push_back(q);
    }
  });

  set.vertical.resize(parts.vertical.size());
  parallel_for(parts.vertical.size(), [&](std::size_t k) {
    const PlaneSegment& seg = parts.vertical[k];
    VerticalPlane& vp = set.vertical[k];
    vp.frame = canonical_frame(seg.transform);
    vp.inclination = round_decimals(seg.inclination, 6);
    std::vector<Vec2> local;
    for (auto i : seg.point_indices) local.push_back(seg.transform.project(cloud.points[i]));
    try {
      for (auto i : alpha_shape_boundary(local, ec.alpha)) {
        vp.boundary_points.push_back(cloud.points[seg.point_indices[i]]);
      }
    } catch (const Error&) {
      for (auto i : seg.point_indices) vp.boundary_points.push_back(cloud.points[i]);
    }
    for (Vec3& p : vp.boundary_points) p = rounded(p);
  });

  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = i + 1; j < nt; ++j) {
      const auto& a = set.traversable[i];
      const auto& b = set.traversable[j];
      const auto seg = plane_polygon_intersection({a.frame, a.hull}, {b.frame, b.hull}, ec.expand_margin,
                                                  ec.min_interline_length);
      if (!seg) continue;
      const Segment3D link{rounded(seg->a), rounded(seg->b)};
      set.traversable[i].neighbors.push_back({static_cast<int>(j), link});
      set.traversable[j].neighbors.push_back({static_cast<int>(i), link});
    }
  }
  for (auto& tp : set.traversable) {
    std::sort(tp.neighbors.begin(), tp.neighbors.end(),
              [](const PlaneLink& a, const PlaneLink& b) { return a.plane < b.plane; });
  }

  lap("bound_and_link");
  std::vector<GridMap> grids(nt);
  parallel_for(nt, [&](std::size_t k) {
    grids[k] = build_grid(set.traversable[k], set.traversable, set.vertical, config.mapping, config.robot.d_s);
    for (double& v : grids[k].esdf_values()) v = round_decimals(v, 4);
  });
  for (std::size_t k = 0; k < nt; ++k) set.traversable[k].grid = std::move(grids[k]);
  lap("grid");
  return set;
}

}  // namespace planeway
