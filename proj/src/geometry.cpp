#include "planeway/geometry.hpp"

#include "planeway/error.hpp"

#include <boost/polygon/voronoi.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace planeway {
namespace {

constexpr double kHorizontalAxisSwitch = std::numbers::pi / 180.0;  // 1 degree

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

bool strictly_convex(const std::vector<Vec2>& v) {
  if (v.size() < 3) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    const Vec2& c = v[(i + 2) % v.size()];
    if (cross2(b - a, c - b) <= 0.0) return false;
  }
  return true;
}

}  // namespace

double Transform::yaw_offset() const {
  const Vec3 x = x_axis();
  return std::atan2(x.y(), x.x());
}

double round_decimals(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale + 0.0;
}

Mat3 orthonormalize(const Mat3& r) {
  const Vec3 z = r.col(2).normalized();
  const Vec3 x = (r.col(0) - r.col(0).dot(z) * z).normalized();
  Mat3 out;
  out << x, z.cross(x), z;
  return out;
}

Transform canonical_frame(const Transform& frame, int decimals) {
  auto rounded = [decimals](const Mat3& m) { return m.unaryExpr([decimals](double v) { return round_decimals(v, decimals); }).eval(); };
  Transform out;
  out.translation = frame.translation.unaryExpr([decimals](double v) { return round_decimals(v, decimals); });
  out.rotation = orthonormalize(frame.rotation);
  // Converges in one or two rounds in practice.
  for (int it = 0; it < 20; ++it) {
    const Mat3 next = orthonormalize(rounded(out.rotation));
    const bool fixed = rounded(next) == rounded(out.rotation);
    out.rotation = next;
    if (fixed) break;
  }
  return out;
}

void PlaneMoments::add(const Vec3& p) {
  ++count_;
  sum_ += p;
  outer_ += p * p.transpose();
}

void PlaneMoments::merge(const PlaneMoments& other) {
  count_ += other.count_;
  sum_ += other.sum_;
  outer_ += other.outer_;
}

Mat3 PlaneMoments::covariance() const {
  const double n = static_cast<double>(count_);
  const Vec3 m = sum_ / n;
  return outer_ / n - m * m.transpose();
}

PlaneFit PlaneMoments::fit() const {
  if (count_ < 3) throw Error(ErrorCode::DegenerateInput, "plane fit needs at least 3 points");
  return fit_plane_from_covariance(mean(), covariance());
}

PlaneFit fit_plane_from_covariance(const Vec3& centroid, const Mat3& covariance) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(covariance);
  const Vec3 evals = eig.eigenvalues();  // ascending
  const double largest = std::max(evals(2), 0.0);
  if (largest <= 0.0 || evals(1) <= 1e-10 * largest) {
    throw Error(ErrorCode::DegenerateInput, "points are coincident or collinear");
  }

  Vec3 normal = eig.eigenvectors().col(0).normalized();
  if (normal.z() < 0.0 || (normal.z() == 0.0 && normal.x() < 0.0)) normal = -normal;

  PlaneFit fit;
  fit.inclination = std::acos(std::clamp(normal.z(), -1.0, 1.0));
  fit.thickness = std::sqrt(std::max(evals(0), 0.0));

  const Vec3 reference = fit.inclination < kHorizontalAxisSwitch ? Vec3::UnitX() : Vec3::UnitZ();
  Vec3 x_axis = reference - reference.dot(normal) * normal;
  x_axis.normalize();
  const Vec3 y_axis = normal.cross(x_axis);

  fit.frame.rotation.col(0) = x_axis;
  fit.frame.rotation.col(1) = y_axis;
  fit.frame.rotation.col(2) = normal;
  fit.frame.translation = centroid;
  return fit;
}

PlaneFit fit_plane(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error(ErrorCode::DegenerateInput, "plane fit needs at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());
  return fit_plane_from_covariance(centroid, cov);
}

ConvexPolygon2D::ConvexPolygon2D(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  if (!strictly_convex(vertices_)) {
    throw Error(ErrorCode::DegenerateInput, "polygon vertices are not strictly convex and counter-clockwise");
  }
}

double ConvexPolygon2D::area() const {
  double twice = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    twice += cross2(vertices_[i], vertices_[(i + 1) % vertices_.size()]);
  }
  return 0.5 * twice;
}

Vec2 ConvexPolygon2D::centroid() const {
  // Shift to the first vertex to keep the shoelace sums well conditioned.
  const Vec2 o = vertices_.front();
  double twice = 0.0;
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2 a = vertices_[i] - o;
    const Vec2 b = vertices_[(i + 1) % vertices_.size()] - o;
    const double c = cross2(a, b);
    twice += c;
    acc += c * (a + b);
  }
  return o + acc / (3.0 * twice);
}

bool ConvexPolygon2D::contains(const Vec2& p, double tol) const {
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2& a = vertices_[i];
    const Vec2 e = vertices_[(i + 1) % vertices_.size()] - a;
    if (cross2(e, p - a) < -tol * e.norm()) return false;
  }
  return true;
}

Eigen::AlignedBox2d ConvexPolygon2D::bounds() const {
  Eigen::AlignedBox2d box;
  for (const Vec2& v : vertices_) box.extend(v);
  return box;
}

ConvexPolygon2D convex_hull(std::span<const Vec2> points) {
  std::vector<Vec2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) throw Error(ErrorCode::DegenerateInput, "convex hull needs 3 distinct points");

  Eigen::AlignedBox2d box;
  for (const Vec2& p : pts) box.extend(p);
  const double scale = std::max(box.sizes().maxCoeff(), 1e-300);
  const double eps = 1e-12 * scale * scale;

  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= eps) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Vec2& p = pts[i];
    while (k >= lower && cross2(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= eps) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw Error(ErrorCode::DegenerateInput, "points are collinear");
  return ConvexPolygon2D(std::move(hull));
}

ConvexPolygon2D expand_polygon(const ConvexPolygon2D& poly, double margin) {
  if (margin <= 0.0) return poly;
  const Vec2 c = poly.centroid();
  std::vector<Vec2> out;
  out.reserve(poly.size());
  for (const Vec2& v : poly.vertices()) {
    const Vec2 d = v - c;
    const double n = d.norm();
    out.push_back(n > 0.0 ? Vec2(v + margin * d / n) : v);
  }
  if (strictly_convex(out)) return ConvexPolygon2D(std::move(out));
  return convex_hull(out);
}

std::optional<Segment3D> plane_polygon_intersection(const PlanarRegion& a, const PlanarRegion& b,
                                                    double margin, double min_length) {
  const Vec3 na = a.frame.normal();
  const Vec3 nb = b.frame.normal();
  Vec3 dir = na.cross(nb);
  if (dir.norm() < std::sin(kHorizontalAxisSwitch)) return std::nullopt;
  dir.normalize();

  Mat3 m;
  m.row(0) = na.transpose();
  m.row(1) = nb.transpose();
  m.row(2) = dir.transpose();
  const Vec3 rhs(na.dot(a.frame.translation), nb.dot(b.frame.translation),
                 dir.dot(0.5 * (a.frame.translation + b.frame.translation)));
  const Vec3 origin = m.colPivHouseholderQr().solve(rhs);

  double t_min = -std::numeric_limits<double>::infinity();
  double t_max = std::numeric_limits<double>::infinity();
  for (const PlanarRegion* region : {&a, &b}) {
    const ConvexPolygon2D poly = expand_polygon(region->boundary, margin);
    const Vec2 p = region->frame.project(origin);
    const Vec2 d = (region->frame.rotation.transpose() * dir).head<2>();
    const auto& v = poly.vertices();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vec2 e = v[(i + 1) % v.size()] - v[i];
      const Vec2 inward(-e.y(), e.x());
      const double num = inward.dot(p - v[i]);
      const double den = inward.dot(d);
      if (std::abs(den) < 1e-12 * e.norm()) {
        if (num < 0.0) return std::nullopt;
        continue;
      }
      const double t = -num / den;
      if (den > 0.0) {
        t_min = std::max(t_min, t);
      } else {
        t_max = std::min(t_max, t);
      }
    }
  }
  if (!(t_max - t_min >= min_length)) return std::nullopt;

  Segment3D seg{origin + t_min * dir, origin + t_max * dir};
  if (lex_less(seg.b, seg.a)) std::swap(seg.a, seg.b);
  return seg;
}

std::vector<std::size_t> alpha_shape_boundary(std::span<const Vec2> points, double alpha) {
  if (points.size() < 3) throw Error(ErrorCode::DegenerateInput, "alpha shape needs at least 3 points");
  if (!(alpha > 0.0)) throw Error(ErrorCode::DegenerateInput, "alpha must be positive");

  Eigen::AlignedBox2d box;
  for (const Vec2& p : points) box.extend(p);
  const double extent = box.sizes().maxCoeff();
  if (!(extent > 0.0)) throw Error(ErrorCode::DegenerateInput, "all points coincide");

  // Boost's Voronoi builder wants integer sites; 1e8 steps across the extent.
  const double scale = 1e8 / extent;
  using Site = boost::polygon::point_data<int>;
  std::map<std::pair<int, int>, std::size_t> unique_index;
  std::vector<Site> sites;
  std::vector<std::size_t> site_of_point(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int x = static_cast<int>(std::lround((points[i].x() - box.min().x()) * scale));
    const int y = static_cast<int>(std::lround((points[i].y() - box.min().y()) * scale));
    auto [it, inserted] = unique_index.emplace(std::make_pair(x, y), sites.size());
    if (inserted) sites.emplace_back(x, y);
    site_of_point[i] = it->second;
  }
  if (sites.size() < 2) throw Error(ErrorCode::DegenerateInput, "all points coincide");

  boost::polygon::voronoi_diagram<double> vd;
  boost::polygon::construct_voronoi(sites.begin(), sites.end(), &vd);

  const double alpha_scaled = alpha * scale;
  auto face_kept = [&](const boost::polygon::voronoi_vertex<double>* v, std::size_t site) {
    if (v == nullptr) return false;
    const double dx = v->x() - sites[site].x();
    const double dy = v->y() - sites[site].y();
    return std::hypot(dx, dy) < alpha_scaled;
  };

  std::vector<char> on_boundary(sites.size(), 0);
  for (const auto& edge : vd.edges()) {
    const std::size_t s0 = edge.cell()->source_index();
    const std::size_t s1 = edge.twin()->cell()->source_index();
    if (s0 >= s1) continue;
    const bool k0 = face_kept(edge.vertex0(), s0);
    const bool k1 = face_kept(edge.vertex1(), s0);
    bool boundary = k0 != k1;
    if (!k0 && !k1) {
      // Edge of the alpha complex not attached to any kept triangle.
      const double half = 0.5 * std::hypot(double(sites[s0].x()) - sites[s1].x(),
                                           double(sites[s0].y()) - sites[s1].y());
      boundary = half < alpha_scaled;
    }
    if (boundary) {
      on_boundary[s0] = 1;
      on_boundary[s1] = 1;
    }
  }

  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (on_boundary[site_of_point[i]]) out.push_back(i);
  }
  return out;
}

bool polygons_overlap(const ConvexPolygon2D& a, const ConvexPolygon2D& b) {
  for (const ConvexPolygon2D* poly : {&a, &b}) {
    const auto& v = poly->vertices();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vec2 e = v[(i + 1) % v.size()] - v[i];
      const Vec2 axis(-e.y(), e.x());
      double amin = std::numeric_limits<double>::infinity(), amax = -amin;
      double bmin = amin, bmax = -amin;
      for (const Vec2& p : a.vertices()) {
        amin = std::min(amin, axis.dot(p));
        amax = std::max(amax, axis.dot(p));
      }
      for (const Vec2& p : b.vertices()) {
        bmin = std::min(bmin, axis.dot(p));
        bmax = std::max(bmax, axis.dot(p));
      }
      if (amax < bmin || bmax < amin) return false;
    }
  }
  return true;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace planeway
