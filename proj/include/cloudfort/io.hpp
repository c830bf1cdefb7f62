#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cloudfort/attack.hpp"
#include "cloudfort/geometry.hpp"
#include "cloudfort/random.hpp"

namespace cloudfort {

// ---------------------------------------------------------------------------
// OFF meshes

struct MeshOFF {
  std::vector<Point3> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;  // polygons fan-triangulated
  std::size_t face_count = 0;                          // polygons as declared in the header
};

/// Accepts the standard "OFF" header line and the fused "OFF<v> <f> <e>"
/// variant found in ModelNet. '#' starts a comment.
MeshOFF parse_off(std::string_view text, const std::string& source = "<off>");
MeshOFF read_off(const std::string& path);

/// Area-weighted face choice, then uniform barycentric sampling.
PointCloud sample_mesh(const MeshOFF& mesh, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// XYZ text clouds: one "x y z" per line, '#' comments, blank lines ignored.

PointCloud parse_xyz(std::string_view text, const std::string& source = "<xyz>");
PointCloud read_xyz(const std::string& path);
/// Coordinates printed with 17 significant digits (exact double round trip).
std::string format_xyz(const PointCloud& cloud);
void write_xyz(const std::string& path, const PointCloud& cloud);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

// ---------------------------------------------------------------------------
// Synthetic parametric shapes

enum class ShapeKind { Sphere, Cube, Cylinder, Torus, PlaneGrid, TwoSphere };

ShapeKind parse_shape_kind(const std::string& name);
const char* to_string(ShapeKind kind) noexcept;

/// Raw surface samples of the shape in its canonical pose (unit sphere,
/// cube [-1,1]³, cylinder r=1 h=2 along z, torus R=0.7 r=0.3 in xy, square
/// grid in z=0, two spheres of radius 0.45 at x=±0.55).
PointCloud generate_shape(ShapeKind kind, std::size_t n_points, Rng& rng);

struct ShapeDatasetOptions {
  double scale_jitter = 0.15;   // per-axis scale drawn from [1-j, 1+j]
  double point_noise = 0.01;    // Gaussian sigma added to every coordinate
};

/// per_class samples of each shape, perturbed, normalized to the unit
/// sphere, labeled with the shape name and given ids "<shape>_<seed>_<index>".
Dataset generate_shape_dataset(const std::vector<ShapeKind>& classes, std::size_t per_class,
                               std::size_t n_points, std::uint64_t seed,
                               const ShapeDatasetOptions& options = {});

// ---------------------------------------------------------------------------
// Optional augmentation

/// Rotation about the y (up) axis by a uniform angle.
PointCloud augment_rotate(const PointCloud& cloud, Rng& rng);
/// Clipped Gaussian jitter.
PointCloud augment_jitter(const PointCloud& cloud, Rng& rng, double sigma = 0.01, double clip = 0.05);

// ---------------------------------------------------------------------------
// Dataset manifests: "<split> <class> <relative path>" per line, files are
// .off (sampled) or .xyz.

struct ManifestEntry {
  std::string split;  // "train" or "test"
  std::string label;
  std::string path;   // resolved against the manifest's directory
};

struct DatasetManifest {
  std::string root;
  std::vector<ManifestEntry> entries;  // sorted by (split, label, path)

  std::vector<std::string> classes() const;
};

DatasetManifest parse_manifest(std::string_view text, const std::string& root, const std::string& source = "<manifest>");
DatasetManifest read_manifest(const std::string& path);

/// Loads one split. OFF meshes are sampled to n_points with a per-file seed
/// derived from `seed`; XYZ files are taken as-is. Clouds are normalized when
/// `normalize` is set.
Dataset load_split(const DatasetManifest& manifest, const std::string& split, std::size_t n_points,
                   std::uint64_t seed, bool normalize);

}  // namespace cloudfort
