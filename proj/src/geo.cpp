#include <cmath>
#include <numbers>

#include "feedforge/error.hpp"
#include "feedforge/geograph.hpp"

namespace feedforge {

namespace {

constexpr double kSemiMajor = 6378137.0;
constexpr double kFlattening = 1.0 / 298.257223563;
constexpr double kEccSq = kFlattening * (2.0 - kFlattening);

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

void to_ecef(double lon, double lat, double out[3]) {
  const double phi = deg2rad(lat);
  const double lam = deg2rad(lon);
  const double s = std::sin(phi);
  const double n = kSemiMajor / std::sqrt(1.0 - kEccSq * s * s);
  out[0] = n * std::cos(phi) * std::cos(lam);
  out[1] = n * std::cos(phi) * std::sin(lam);
  out[2] = n * (1.0 - kEccSq) * s;
}

}  // namespace

const Vec2& GeoPoint::planar() const {
  if (!xy) throw DataError("point has no projected coordinates");
  return *xy;
}

LocalFrame::LocalFrame(double lon0, double lat0) : lon0_(lon0), lat0_(lat0) {
  to_ecef(lon0, lat0, origin_);
  const double phi = deg2rad(lat0);
  const double lam = deg2rad(lon0);
  east_[0] = -std::sin(lam);
  east_[1] = std::cos(lam);
  east_[2] = 0.0;
  north_[0] = -std::sin(phi) * std::cos(lam);
  north_[1] = -std::sin(phi) * std::sin(lam);
  north_[2] = std::cos(phi);
}

Vec2 LocalFrame::forward(double lon, double lat) const {
  double p[3];
  to_ecef(lon, lat, p);
  const double d[3] = {p[0] - origin_[0], p[1] - origin_[1], p[2] - origin_[2]};
  return {east_[0] * d[0] + east_[1] * d[1] + east_[2] * d[2],
          north_[0] * d[0] + north_[1] * d[1] + north_[2] * d[2]};
}

GeoPoint LocalFrame::project(const GeoPoint& p) const {
  GeoPoint out = p;
  out.xy = forward(p.lon, p.lat);
  return out;
}

double arc_length(std::span<const GeoPoint> line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Vec2& a = line[i - 1].planar();
    const Vec2& b = line[i].planar();
    total += std::hypot(b.x - a.x, b.y - a.y);
  }
  return total;
}

double total_bend(std::span<const GeoPoint> line) {
  double bend = 0.0;
  bool have_prev = false;
  double px = 0.0, py = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Vec2& a = line[i - 1].planar();
    const Vec2& b = line[i].planar();
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    if (dx == 0.0 && dy == 0.0) continue;  // repeated vertex
    if (have_prev) {
      const double cross = px * dy - py * dx;
      const double dot = px * dx + py * dy;
      bend += std::abs(std::atan2(cross, dot));
    }
    px = dx;
    py = dy;
    have_prev = true;
  }
  return bend;
}

double GeoGraph::total_length() const {
  double total = 0.0;
  for (const auto& e : edges) total += arc_length(e.geometry);
  return total;
}

}  // namespace feedforge
