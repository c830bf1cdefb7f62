#include "cloudfort/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "cloudfort/error.hpp"

namespace cloudfort {

namespace {

/// Splits text into lines with 1-based numbers, dropping '#' comments and
/// blank lines.
struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

std::vector<Line> tokenize_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    auto line = text.substr(pos, end - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    Line l{number, {}};
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) l.tokens.push_back(line.substr(i, j - i));
      i = j;
    }
    if (!l.tokens.empty()) lines.push_back(std::move(l));
    if (end == text.size()) break;
    pos = end + 1;
  }
  return lines;
}

double parse_double(std::string_view token, const std::string& source, std::size_t line) {
  double v = 0.0;
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v))
    throw ParseError(source, line, "invalid number '" + std::string(token) + "'");
  return v;
}

std::size_t parse_count(std::string_view token, const std::string& source, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw ParseError(source, line, "invalid count '" + std::string(token) + "'");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Point3 random_unit_vector(Rng& rng) {
  for (;;) {
    const Point3 d{rng.normal(), rng.normal(), rng.normal()};
    const double len = d.norm();
    if (len > 1e-12) return (1.0 / len) * d;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

MeshOFF parse_off(std::string_view text, const std::string& source) {
  const auto lines = tokenize_lines(text);
  if (lines.empty()) throw ParseError(source, 1, "empty OFF file");

  // Header: "OFF" alone, "OFF v f e", or the fused "OFFv f e".
  std::vector<std::string_view> counts;
  std::size_t cursor = 0;
  {
    const auto& first = lines[0];
    const auto head = first.tokens[0];
    if (!head.starts_with("OFF")) throw ParseError(source, first.number, "missing OFF header");
    if (head.size() > 3) counts.push_back(head.substr(3));
    counts.insert(counts.end(), first.tokens.begin() + 1, first.tokens.end());
    cursor = 1;
    if (counts.empty()) {
      if (lines.size() < 2) throw ParseError(source, first.number, "missing vertex/face counts");
      counts = lines[1].tokens;
      cursor = 2;
    }
  }
  const std::size_t header_line = lines[cursor - 1].number;
  if (counts.size() < 2) throw ParseError(source, header_line, "expected '<vertices> <faces> [edges]'");
  const auto n_vertices = parse_count(counts[0], source, header_line);
  const auto n_faces = parse_count(counts[1], source, header_line);

  MeshOFF mesh;
  mesh.face_count = n_faces;
  mesh.vertices.reserve(n_vertices);
  for (std::size_t v = 0; v < n_vertices; ++v, ++cursor) {
    if (cursor >= lines.size())
      throw ParseError(source, lines.back().number,
                       "expected " + std::to_string(n_vertices) + " vertices, found " + std::to_string(v));
    const auto& l = lines[cursor];
    if (l.tokens.size() < 3) throw ParseError(source, l.number, "vertex needs three coordinates");
    mesh.vertices.push_back({parse_double(l.tokens[0], source, l.number),
                             parse_double(l.tokens[1], source, l.number),
                             parse_double(l.tokens[2], source, l.number)});
  }
  for (std::size_t f = 0; f < n_faces; ++f, ++cursor) {
    if (cursor >= lines.size())
      throw ParseError(source, lines.back().number,
                       "expected " + std::to_string(n_faces) + " faces, found " + std::to_string(f));
    const auto& l = lines[cursor];
    const auto k = parse_count(l.tokens[0], source, l.number);
    if (k < 3) throw ParseError(source, l.number, "face needs at least 3 vertices");
    if (l.tokens.size() < k + 1) throw ParseError(source, l.number, "face lists fewer indices than declared");
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) {
      idx[i] = parse_count(l.tokens[i + 1], source, l.number);
      if (idx[i] >= mesh.vertices.size())
        throw ParseError(source, l.number, "vertex index " + std::to_string(idx[i]) + " out of range (" +
                                               std::to_string(mesh.vertices.size()) + " vertices)");
    }
    for (std::size_t i = 1; i + 1 < k; ++i) mesh.triangles.push_back({idx[0], idx[i], idx[i + 1]});
  }
  if (cursor < lines.size())
    throw ParseError(source, lines[cursor].number, "unexpected data after the declared faces");
  return mesh;
}

MeshOFF read_off(const std::string& path) { return parse_off(read_text_file(path), path); }

PointCloud sample_mesh(const MeshOFF& mesh, std::size_t n, std::uint64_t seed) {
  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    const Point3 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
    const Point3 u = b - a, v = c - a;
    const Point3 cross{u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x};
    total += 0.5 * cross.norm();
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw invalid_input("cannot sample a mesh with zero surface area");

  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& t = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Point3 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
    cloud.points.push_back((1.0 - r1) * a + (r1 * (1.0 - r2)) * b + (r1 * r2) * c);
  }
  return cloud;
}

// ---------------------------------------------------------------------------

PointCloud parse_xyz(std::string_view text, const std::string& source) {
  PointCloud cloud;
  for (const auto& l : tokenize_lines(text)) {
    if (l.tokens.size() != 3)
      throw ParseError(source, l.number, "expected 3 coordinates, found " + std::to_string(l.tokens.size()));
    cloud.points.push_back({parse_double(l.tokens[0], source, l.number),
                            parse_double(l.tokens[1], source, l.number),
                            parse_double(l.tokens[2], source, l.number)});
  }
  return cloud;
}

PointCloud read_xyz(const std::string& path) { return parse_xyz(read_text_file(path), path); }

std::string format_xyz(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.size() * 64);
  for (const auto& p : cloud.points) {
    out += format_double(p.x);
    out += ' ';
    out += format_double(p.y);
    out += ' ';
    out += format_double(p.z);
    out += '\n';
  }
  return out;
}

void write_xyz(const std::string& path, const PointCloud& cloud) { write_text_file(path, format_xyz(cloud)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw invalid_input("cannot open file for writing: " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw invalid_input("failed writing file: " + path);
}

// ---------------------------------------------------------------------------

ShapeKind parse_shape_kind(const std::string& name) {
  static const std::pair<const char*, ShapeKind> kNames[] = {
      {"sphere", ShapeKind::Sphere},   {"cube", ShapeKind::Cube},
      {"cylinder", ShapeKind::Cylinder}, {"torus", ShapeKind::Torus},
      {"plane-grid", ShapeKind::PlaneGrid}, {"two-sphere", ShapeKind::TwoSphere},
  };
  for (const auto& [n, k] : kNames)
    if (name == n) return k;
  throw invalid_input("unknown shape class '" + name +
                      "' (expected sphere, cube, cylinder, torus, plane-grid, two-sphere)");
}

const char* to_string(ShapeKind kind) noexcept {
  switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Cube: return "cube";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Torus: return "torus";
    case ShapeKind::PlaneGrid: return "plane-grid";
    case ShapeKind::TwoSphere: return "two-sphere";
  }
  return "unknown";
}

PointCloud generate_shape(ShapeKind kind, std::size_t n_points, Rng& rng) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  PointCloud cloud;
  cloud.points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    Point3 p;
    switch (kind) {
      case ShapeKind::Sphere:
        p = random_unit_vector(rng);
        break;
      case ShapeKind::Cube: {
        const auto face = rng.below(6);
        const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
        const double s = (face % 2 == 0) ? 1.0 : -1.0;
        if (face < 2) p = {s, u, v};
        else if (face < 4) p = {u, s, v};
        else p = {u, v, s};
        break;
      }
      case ShapeKind::Cylinder: {
        // side area 4π, caps 2π together
        const double pick = rng.uniform() * 6.0;
        const double theta = rng.uniform() * kTwoPi;
        if (pick < 4.0) {
          p = {std::cos(theta), std::sin(theta), rng.uniform(-1.0, 1.0)};
        } else {
          const double r = std::sqrt(rng.uniform());
          p = {r * std::cos(theta), r * std::sin(theta), pick < 5.0 ? 1.0 : -1.0};
        }
        break;
      }
      case ShapeKind::Torus: {
        constexpr double kMajor = 0.7, kMinor = 0.3;
        // Rejection on the tube angle makes the samples area-uniform.
        double phi = 0.0;
        for (;;) {
          phi = rng.uniform() * kTwoPi;
          if (rng.uniform() * (kMajor + kMinor) <= kMajor + kMinor * std::cos(phi)) break;
        }
        const double theta = rng.uniform() * kTwoPi;
        const double ring = kMajor + kMinor * std::cos(phi);
        p = {ring * std::cos(theta), ring * std::sin(theta), kMinor * std::sin(phi)};
        break;
      }
      case ShapeKind::PlaneGrid: {
        constexpr int kCells = 16;
        const auto gx = rng.below(kCells + 1), gy = rng.below(kCells + 1);
        p = {-1.0 + 2.0 * double(gx) / kCells, -1.0 + 2.0 * double(gy) / kCells, 0.0};
        break;
      }
      case ShapeKind::TwoSphere: {
        constexpr double kRadius = 0.45, kOffset = 0.55;
        const double cx = rng.below(2) == 0 ? -kOffset : kOffset;
        p = Point3{cx, 0.0, 0.0} + kRadius * random_unit_vector(rng);
        break;
      }
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

Dataset generate_shape_dataset(const std::vector<ShapeKind>& classes, std::size_t per_class,
                               std::size_t n_points, std::uint64_t seed, const ShapeDatasetOptions& options) {
  if (per_class < 1) throw invalid_input("per_class must be >= 1");
  if (n_points < 1) throw invalid_input("n_points must be >= 1");
  Dataset out;
  out.reserve(classes.size() * per_class);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const std::string name = to_string(classes[c]);
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(classes[c])), i));
      PointCloud cloud = generate_shape(classes[c], n_points, rng);
      const Point3 scale{rng.uniform(1.0 - options.scale_jitter, 1.0 + options.scale_jitter),
                         rng.uniform(1.0 - options.scale_jitter, 1.0 + options.scale_jitter),
                         rng.uniform(1.0 - options.scale_jitter, 1.0 + options.scale_jitter)};
      for (auto& p : cloud.points) {
        p = {p.x * scale.x, p.y * scale.y, p.z * scale.z};
        if (options.point_noise > 0.0)
          p = p + options.point_noise * Point3{rng.normal(), rng.normal(), rng.normal()};
      }
      cloud = normalize_cloud(cloud);
      cloud.label = name;
      cloud.id = name + "_" + std::to_string(seed) + "_" + std::to_string(i);
      out.push_back(Sample{std::move(cloud), false, std::nullopt, std::nullopt});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PointCloud augment_rotate(const PointCloud& cloud, Rng& rng) {
  const auto r = axis_rotation(Axis::Y, rng.uniform() * 360.0);
  PointCloud out = cloud;
  for (auto& p : out.points) p = r.apply(p);
  return out;
}

PointCloud augment_jitter(const PointCloud& cloud, Rng& rng, double sigma, double clip) {
  PointCloud out = cloud;
  auto jitter = [&] { return std::clamp(sigma * rng.normal(), -clip, clip); };
  for (auto& p : out.points) p = p + Point3{jitter(), jitter(), jitter()};
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> DatasetManifest::classes() const {
  std::set<std::string> s;
  for (const auto& e : entries) s.insert(e.label);
  return {s.begin(), s.end()};
}

DatasetManifest parse_manifest(std::string_view text, const std::string& root, const std::string& source) {
  DatasetManifest m;
  m.root = root;
  for (const auto& l : tokenize_lines(text)) {
    if (l.tokens.size() != 3) throw ParseError(source, l.number, "expected '<split> <class> <path>'");
    std::string split(l.tokens[0]);
    if (split != "train" && split != "test")
      throw ParseError(source, l.number, "split must be 'train' or 'test', got '" + split + "'");
    const std::filesystem::path rel(std::string(l.tokens[2]));
    const auto resolved = rel.is_absolute() ? rel : std::filesystem::path(root) / rel;
    m.entries.push_back({std::move(split), std::string(l.tokens[1]), resolved.string()});
  }
  std::sort(m.entries.begin(), m.entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return std::tie(a.split, a.label, a.path) < std::tie(b.split, b.label, b.path);
  });
  return m;
}

DatasetManifest read_manifest(const std::string& path) {
  auto m = parse_manifest(read_text_file(path), std::filesystem::path(path).parent_path().string(), path);
  for (const auto& e : m.entries) {
    if (!std::filesystem::exists(e.path)) throw invalid_input("manifest entry does not exist: " + e.path);
  }
  return m;
}

Dataset load_split(const DatasetManifest& manifest, const std::string& split, std::size_t n_points,
                   std::uint64_t seed, bool normalize) {
  Dataset out;
  std::size_t index = 0;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    PointCloud cloud;
    const auto ext = std::filesystem::path(e.path).extension().string();
    if (ext == ".off") {
      cloud = sample_mesh(read_off(e.path), n_points, derive_seed(seed, index));
    } else if (ext == ".xyz") {
      cloud = read_xyz(e.path);
    } else {
      throw invalid_input("unsupported dataset file type: " + e.path);
    }
    if (cloud.empty()) throw invalid_input("dataset file has no points: " + e.path);
    if (normalize) cloud = normalize_cloud(cloud);
    cloud.label = e.label;
    cloud.id = std::filesystem::path(e.path).stem().string();
    out.push_back(Sample{std::move(cloud), false, std::nullopt, std::nullopt});
    ++index;
  }
  return out;
}

}  // namespace cloudfort
