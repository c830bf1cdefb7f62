#include "cloudfort/geometry.hpp"

#include <algorithm>
#include <numbers>

#include "cloudfort/error.hpp"

namespace cloudfort {

bool is_orthonormal(const Rotation3::Matrix& m, double tolerance) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += m[k][i] * m[k][j];
      if (!std::isfinite(dot) || std::abs(dot - (i == j ? 1.0 : 0.0)) > tolerance)
        return false;
    }
  }
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  return std::abs(det - 1.0) <= tolerance;
}

Rotation3::Rotation3(const Matrix& m) : m_(m) {
  if (!is_orthonormal(m_)) throw invalid_input("rotation matrix is not orthonormal with det +1");
}

Point3 Rotation3::apply(const Point3& p) const noexcept {
  return {m_[0][0] * p.x + m_[0][1] * p.y + m_[0][2] * p.z,
          m_[1][0] * p.x + m_[1][1] * p.y + m_[1][2] * p.z,
          m_[2][0] * p.x + m_[2][1] * p.y + m_[2][2] * p.z};
}

Point3 Rotation3::apply_transpose(const Point3& p) const noexcept {
  return {m_[0][0] * p.x + m_[1][0] * p.y + m_[2][0] * p.z,
          m_[0][1] * p.x + m_[1][1] * p.y + m_[2][1] * p.z,
          m_[0][2] * p.x + m_[1][2] * p.y + m_[2][2] * p.z};
}

Rotation3 Rotation3::transpose() const noexcept {
  Matrix t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = m_[j][i];
  return Rotation3(t, Unchecked{});
}

double Rotation3::determinant() const noexcept {
  return m_[0][0] * (m_[1][1] * m_[2][2] - m_[1][2] * m_[2][1]) -
         m_[0][1] * (m_[1][0] * m_[2][2] - m_[1][2] * m_[2][0]) +
         m_[0][2] * (m_[1][0] * m_[2][1] - m_[1][1] * m_[2][0]);
}

Rotation3 operator*(const Rotation3& a, const Rotation3& b) noexcept {
  Rotation3::Matrix r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a.m_[i][k] * b.m_[k][j];
  return Rotation3(r, Rotation3::Unchecked{});
}

Rotation3 axis_rotation(Axis axis, double angle_degrees) {
  if (!std::isfinite(angle_degrees)) throw invalid_input("rotation angle must be finite");
  const double rad = angle_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  switch (axis) {
    case Axis::X:
      return Rotation3({{{1, 0, 0}, {0, c, -s}, {0, s, c}}});
    case Axis::Y:
      return Rotation3({{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}});
    case Axis::Z:
      break;
  }
  return Rotation3({{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}});
}

OctantCode::OctantCode(int value) : value_(static_cast<std::uint8_t>(value)) {
  if (value < 0 || value >= kCount)
    throw invalid_input("octant code out of range: " + std::to_string(value));
}

OctantCode octant_of(const Point3& point, const Point3& origin,
                     const Rotation3& rotation) noexcept {
  const Point3 local = rotation.apply_transpose(point - origin);
  const int code = (local.x >= 0.0 ? 4 : 0) | (local.y >= 0.0 ? 2 : 0) | (local.z >= 0.0 ? 1 : 0);
  return OctantCode(code);
}

Point3 centroid(const PointCloud& cloud) {
  if (cloud.empty()) throw invalid_input("centroid of an empty cloud");
  Point3 sum;
  for (const auto& p : cloud.points) sum = sum + p;
  return (1.0 / static_cast<double>(cloud.size())) * sum;
}

PointCloud normalize_cloud(const PointCloud& cloud) {
  if (cloud.empty()) throw invalid_input("cannot normalize an empty cloud");
  PointCloud out = cloud.empty_like();
  const auto& first = cloud.points.front();
  if (std::all_of(cloud.points.begin(), cloud.points.end(),
                  [&](const Point3& p) { return p == first; })) {
    out.points.assign(cloud.size(), Point3{});
    return out;
  }
  const Point3 center = centroid(cloud);
  out.points.reserve(cloud.size());
  double max_norm = 0.0;
  for (const auto& p : cloud.points) {
    out.points.push_back(p - center);
    max_norm = std::max(max_norm, out.points.back().norm());
  }
  if (max_norm == 0.0) return out;
  const double scale = 1.0 / max_norm;
  for (auto& p : out.points) p = scale * p;
  return out;
}

void require_finite(const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.points[i].is_finite())
      throw invalid_input("point " + std::to_string(i) + " has a non-finite coordinate");
  }
}

}  // namespace cloudfort
