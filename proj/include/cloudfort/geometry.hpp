#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cloudfort {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool is_finite() const noexcept {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
  double norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }
  double dot(const Point3& o) const noexcept { return x * o.x + y * o.y + z * o.z; }

  friend Point3 operator+(Point3 a, const Point3& b) noexcept {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Point3 operator-(Point3 a, const Point3& b) noexcept {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Point3 operator*(double s, const Point3& a) noexcept {
    return {s * a.x, s * a.y, s * a.z};
  }
  friend bool operator==(const Point3&, const Point3&) = default;
};

/// Ordered multiset of points. `label` is ground-truth metadata and `id` a
/// sample identifier; both travel with derived clouds (sub-clouds, triggered
/// copies) so downstream consumers can key on them.
struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::string> label;
  std::optional<std::string> id;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  /// Copy of the metadata with no points.
  PointCloud empty_like() const { return PointCloud{{}, label, id}; }
};

/// Right-handed 3x3 rotation, row-major.
class Rotation3 {
 public:
  using Matrix = std::array<std::array<double, 3>, 3>;

  Rotation3() : m_{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}} {}

  /// Throws InvalidInput unless `m` is orthonormal with determinant +1
  /// (tolerance 1e-9).
  explicit Rotation3(const Matrix& m);

  static Rotation3 identity() { return Rotation3(); }

  const Matrix& matrix() const noexcept { return m_; }
  double operator()(int row, int col) const noexcept { return m_[row][col]; }

  Point3 apply(const Point3& p) const noexcept;
  /// Rᵀ·p, i.e. the inverse rotation.
  Point3 apply_transpose(const Point3& p) const noexcept;
  Rotation3 transpose() const noexcept;
  double determinant() const noexcept;

  friend Rotation3 operator*(const Rotation3& a, const Rotation3& b) noexcept;

 private:
  struct Unchecked {};
  Rotation3(const Matrix& m, Unchecked) : m_(m) {}

  Matrix m_;
};

bool is_orthonormal(const Rotation3::Matrix& m, double tolerance = 1e-9);

enum class Axis { X, Y, Z };

Rotation3 axis_rotation(Axis axis, double angle_degrees);

/// Region index of a point relative to three orthogonal cutting planes.
/// Bits: (x >= 0) << 2 | (y >= 0) << 1 | (z >= 0). Region Rᵢ has i = value + 1.
class OctantCode {
 public:
  static constexpr int kCount = 8;

  constexpr OctantCode() = default;
  /// Throws InvalidInput outside [0, 7].
  explicit OctantCode(int value);

  constexpr int value() const noexcept { return value_; }
  constexpr int region() const noexcept { return value_ + 1; }

  friend constexpr bool operator==(OctantCode, OctantCode) = default;

 private:
  std::uint8_t value_ = 0;
};

/// Classifies Rᵀ·(p − origin) by sign; exact zeros count as the positive side.
OctantCode octant_of(const Point3& point, const Point3& origin,
                     const Rotation3& rotation) noexcept;

/// Arithmetic mean of the points. Throws InvalidInput on an empty cloud.
Point3 centroid(const PointCloud& cloud);

/// Centers on the centroid and scales so the farthest point has norm 1.
/// A cloud whose points all coincide maps to the origin.
PointCloud normalize_cloud(const PointCloud& cloud);

/// Throws InvalidInput if any coordinate is NaN or infinite.
void require_finite(const PointCloud& cloud);

}  // namespace cloudfort
