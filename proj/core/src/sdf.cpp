#include "a3syn/sdf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "a3syn/codec.hpp"

namespace a3syn {
namespace {

constexpr char kMagic[6] = {'A', '3', 'S', 'D', 'F', '1'};

static_assert(std::endian::native == std::endian::little, "SDF cache I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated SDF cache file");
  return v;
}

// Sign of the doubled signed area of (0, p1, p2) with a symbolic tie-break, so that a
// point on a shared edge is counted by exactly one of the adjacent triangles.
int orientation(double x1, double y1, double x2, double y2, double& twice_area) {
  twice_area = y1 * x2 - x1 * y2;
  if (twice_area > 0) return 1;
  if (twice_area < 0) return -1;
  if (y2 > y1) return 1;
  if (y2 < y1) return -1;
  if (x1 > x2) return 1;
  if (x1 < x2) return -1;
  return 0;
}

bool point_in_triangle_2d(double x0, double y0, double x1, double y1, double x2, double y2, double x3, double y3,
                          double& a, double& b, double& c) {
  x1 -= x0; x2 -= x0; x3 -= x0;
  y1 -= y0; y2 -= y0; y3 -= y0;
  const int sa = orientation(x2, y2, x3, y3, a);
  if (sa == 0) return false;
  if (orientation(x3, y3, x1, y1, b) != sa) return false;
  if (orientation(x1, y1, x2, y2, c) != sa) return false;
  const double sum = a + b + c;
  if (sum == 0.0) return false;
  a /= sum;
  b /= sum;
  c /= sum;
  return true;
}

struct Builder {
  const TriangleMesh& mesh;
  Vec3 origin;
  double dx;
  std::array<int, 3> dims;
  std::vector<double> phi;
  std::vector<std::int32_t> closest;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  Vec3 node(int i, int j, int k) const { return origin + dx * Vec3(i, j, k); }

  double distance_to(std::int32_t t, const Vec3& p) const {
    const auto& f = mesh.faces[static_cast<std::size_t>(t)];
    return point_triangle_distance(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
  }

  void check_neighbour(int i0, int j0, int k0, int i1, int j1, int k1, const Vec3& p) {
    const auto t = closest[index(i1, j1, k1)];
    const auto here = index(i0, j0, k0);
    if (t < 0 || t == closest[here]) return;
    const double d = distance_to(t, p);
    if (d < phi[here]) {
      phi[here] = d;
      closest[here] = t;
    }
  }

  void sweep(int di, int dj, int dk) {
    const int i0 = di > 0 ? 1 : dims[0] - 2, i1 = di > 0 ? dims[0] : -1;
    const int j0 = dj > 0 ? 1 : dims[1] - 2, j1 = dj > 0 ? dims[1] : -1;
    const int k0 = dk > 0 ? 1 : dims[2] - 2, k1 = dk > 0 ? dims[2] : -1;
    for (int k = k0; k != k1; k += dk) {
      for (int j = j0; j != j1; j += dj) {
        for (int i = i0; i != i1; i += di) {
          const Vec3 p = node(i, j, k);
          check_neighbour(i, j, k, i - di, j, k, p);
          check_neighbour(i, j, k, i, j - dj, k, p);
          check_neighbour(i, j, k, i - di, j - dj, k, p);
          check_neighbour(i, j, k, i, j, k - dk, p);
          check_neighbour(i, j, k, i - di, j, k - dk, p);
          check_neighbour(i, j, k, i, j - dj, k - dk, p);
          check_neighbour(i, j, k, i - di, j - dj, k - dk, p);
        }
      }
    }
  }
};

}  // namespace

SdfGrid::SdfGrid(const Vec3& origin, double voxel_size, const std::array<int, 3>& dims, std::vector<float> values)
    : origin_(origin), voxel_size_(voxel_size), dims_(dims), values_(std::move(values)) {
  if (dims_[0] < 2 || dims_[1] < 2 || dims_[2] < 2) throw ContractViolation("SDF grid dims must all be >= 2");
  if (!(voxel_size_ > 0.0)) throw ContractViolation("SDF voxel size must be positive");
  const std::size_t n = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  if (values_.size() != n) throw ContractViolation("SDF value count does not match dims");
  for (float v : values_) {
    if (!std::isfinite(v)) throw ContractViolation("SDF values must be finite");
  }
}

double SdfGrid::query(const Vec3& p) const {
  Vec3 unused;
  return query(p, unused);
}

double SdfGrid::query(const Vec3& p, Vec3& gradient) const {
  Vec3 q = (p - origin_) / voxel_size_;
  Vec3 clamped;
  std::array<int, 3> cell;
  Vec3 t;
  std::array<bool, 3> inside;
  for (int a = 0; a < 3; ++a) {
    const double hi = dims_[a] - 1;
    clamped[a] = std::clamp(q[a], 0.0, hi);
    inside[a] = q[a] >= 0.0 && q[a] <= hi;
    cell[a] = std::min(static_cast<int>(std::floor(clamped[a])), dims_[a] - 2);
    t[a] = clamped[a] - cell[a];
  }

  double c[2][2][2];
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) c[di][dj][dk] = value(cell[0] + di, cell[1] + dj, cell[2] + dk);

  const double tx = t.x(), ty = t.y(), tz = t.z();
  const double c00 = c[0][0][0] * (1 - tx) + c[1][0][0] * tx;
  const double c10 = c[0][1][0] * (1 - tx) + c[1][1][0] * tx;
  const double c01 = c[0][0][1] * (1 - tx) + c[1][0][1] * tx;
  const double c11 = c[0][1][1] * (1 - tx) + c[1][1][1] * tx;
  const double c0 = c00 * (1 - ty) + c10 * ty;
  const double c1 = c01 * (1 - ty) + c11 * ty;
  double value_out = c0 * (1 - tz) + c1 * tz;

  const double ddx = ((c[1][0][0] - c[0][0][0]) * (1 - ty) + (c[1][1][0] - c[0][1][0]) * ty) * (1 - tz) +
                     ((c[1][0][1] - c[0][0][1]) * (1 - ty) + (c[1][1][1] - c[0][1][1]) * ty) * tz;
  const double ddy = (c10 - c00) * (1 - tz) + (c11 - c01) * tz;
  const double ddz = c1 - c0;
  gradient = Vec3(inside[0] ? ddx : 0.0, inside[1] ? ddy : 0.0, inside[2] ? ddz : 0.0) / voxel_size_;

  const Vec3 outside = (q - clamped) * voxel_size_;
  const double out_dist = outside.norm();
  if (out_dist > 0.0) {
    value_out += out_dist;
    gradient += outside / out_dist;
  }
  return value_out;
}

void SdfGrid::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write SDF cache " + path.string());
  out.write(kMagic, sizeof(kMagic));
  for (int d : dims_) put(out, static_cast<std::uint32_t>(d));
  for (int a = 0; a < 3; ++a) put(out, origin_[a]);
  put(out, voxel_size_);
  out.write(reinterpret_cast<const char*>(values_.data()), static_cast<std::streamsize>(values_.size() * sizeof(float)));
}

SdfGrid SdfGrid::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open SDF cache " + path.string());
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error("not an A3SDF1 file: " + path.string());
  std::array<int, 3> dims;
  for (auto& d : dims) d = static_cast<int>(get<std::uint32_t>(in));
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = get<double>(in);
  const double voxel = get<double>(in);
  std::vector<float> values(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!in) throw Error("truncated SDF cache file");
  return SdfGrid(origin, voxel, dims, std::move(values));
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return ap.norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return bp.norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return (ap - v * ab).norm();
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return cp.norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return (ap - w * ac).norm();
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (bp - w * (c - b)).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (ap - ab * v - ac * w).norm();
}

SdfGrid build_sdf_grid(const TriangleMesh& mesh, int resolution, double padding_fraction) {
  if (mesh.empty()) throw ContractViolation("cannot build an SDF from an empty mesh");
  if (resolution < 2) throw ContractViolation("SDF resolution must be >= 2");

  Aabb box = bounds_of(mesh.vertices);
  const double pad = std::max(padding_fraction, 0.0) * box.diagonal();
  box.lo -= Vec3::Constant(pad);
  box.hi += Vec3::Constant(pad);
  const Vec3 extent = box.hi - box.lo;
  const double longest = extent.maxCoeff();
  if (!(longest > 0.0)) throw ContractViolation("mesh bounding box is degenerate");

  const double dx = longest / (resolution - 1);
  std::array<int, 3> dims;
  for (int a = 0; a < 3; ++a) dims[a] = std::max(2, static_cast<int>(std::ceil(extent[a] / dx - 1e-9)) + 1);

  Builder bld{mesh, box.lo, dx, dims, {}, {}};
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  bld.phi.assign(n, std::numeric_limits<double>::max());
  bld.closest.assign(n, -1);
  std::array<std::vector<std::uint8_t>, 3> parity;
  for (auto& p : parity) p.assign(n, 0);

  constexpr int kExactBand = 1;
  for (std::size_t t = 0; t < mesh.faces.size(); ++t) {
    const auto& f = mesh.faces[t];
    std::array<Vec3, 3> g;
    for (int v = 0; v < 3; ++v) g[v] = (mesh.vertices[f[v]] - box.lo) / dx;

    std::array<int, 3> lo, hi;
    for (int a = 0; a < 3; ++a) {
      const double mn = std::min({g[0][a], g[1][a], g[2][a]});
      const double mx = std::max({g[0][a], g[1][a], g[2][a]});
      lo[a] = std::clamp(static_cast<int>(std::floor(mn)) - kExactBand, 0, dims[a] - 1);
      hi[a] = std::clamp(static_cast<int>(std::ceil(mx)) + kExactBand, 0, dims[a] - 1);
    }
    for (int k = lo[2]; k <= hi[2]; ++k) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const double d = bld.distance_to(static_cast<std::int32_t>(t), bld.node(i, j, k));
          const auto idx = bld.index(i, j, k);
          if (d < bld.phi[idx]) {
            bld.phi[idx] = d;
            bld.closest[idx] = static_cast<std::int32_t>(t);
          }
        }
      }
    }

    // Ray crossings along each axis `a`, rows indexed by the remaining axes (b, c).
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3, c = (a + 2) % 3;
      const int b0 = std::max(0, static_cast<int>(std::ceil(std::min({g[0][b], g[1][b], g[2][b]}))));
      const int b1 = std::min(dims[b] - 1, static_cast<int>(std::floor(std::max({g[0][b], g[1][b], g[2][b]}))));
      const int c0 = std::max(0, static_cast<int>(std::ceil(std::min({g[0][c], g[1][c], g[2][c]}))));
      const int c1 = std::min(dims[c] - 1, static_cast<int>(std::floor(std::max({g[0][c], g[1][c], g[2][c]}))));
      for (int rc = c0; rc <= c1; ++rc) {
        for (int rb = b0; rb <= b1; ++rb) {
          double wa, wb, wc;
          if (!point_in_triangle_2d(rb, rc, g[0][b], g[0][c], g[1][b], g[1][c], g[2][b], g[2][c], wa, wb, wc)) continue;
          const double fa = wa * g[0][a] + wb * g[1][a] + wc * g[2][a];
          int cross = static_cast<int>(std::ceil(fa));
          if (cross < 0) cross = 0;
          if (cross >= dims[a]) continue;
          std::array<int, 3> ijk;
          ijk[a] = cross;
          ijk[b] = rb;
          ijk[c] = rc;
          parity[a][bld.index(ijk[0], ijk[1], ijk[2])] ^= 1;
        }
      }
    }
  }

  for (int pass = 0; pass < 2; ++pass) {
    bld.sweep(+1, +1, +1);
    bld.sweep(-1, -1, -1);
    bld.sweep(+1, +1, -1);
    bld.sweep(-1, -1, +1);
    bld.sweep(+1, -1, +1);
    bld.sweep(-1, +1, -1);
    bld.sweep(+1, -1, -1);
    bld.sweep(-1, +1, +1);
  }

  // Prefix parity along each axis turns crossing toggles into inside flags.
  std::array<int, 3> stride{1, dims[0], dims[0] * dims[1]};
  for (int a = 0; a < 3; ++a) {
    for (std::size_t idx = 0; idx < n; ++idx) {
      const int coord = static_cast<int>((idx / static_cast<std::size_t>(stride[a])) % static_cast<std::size_t>(dims[a]));
      if (coord > 0) parity[a][idx] ^= parity[a][idx - static_cast<std::size_t>(stride[a])];
    }
  }

  std::vector<float> values(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const int votes = parity[0][idx] + parity[1][idx] + parity[2][idx];
    const double d = bld.phi[idx];
    values[idx] = static_cast<float>(votes >= 2 ? -d : d);
  }
  return SdfGrid(box.lo, dx, dims, std::move(values));
}

std::string sdf_cache_key(const TriangleMesh& mesh, int resolution, double padding_fraction) {
  std::vector<std::uint8_t> bytes;
  auto append = [&bytes](const void* p, std::size_t len) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + len);
  };
  for (const auto& v : mesh.vertices) append(v.data(), 3 * sizeof(double));
  for (const auto& f : mesh.faces) append(f.data(), 3 * sizeof(std::uint32_t));
  append(&resolution, sizeof(resolution));
  append(&padding_fraction, sizeof(padding_fraction));
  return sha256_hex(bytes);
}

SdfGrid load_or_build_sdf(const TriangleMesh& mesh, int resolution, double padding_fraction,
                          const std::filesystem::path& cache_dir) {
  const auto path = cache_dir / (sdf_cache_key(mesh, resolution, padding_fraction) + ".a3sdf");
  if (std::filesystem::exists(path)) {
    try {
      return SdfGrid::load(path);
    } catch (const Error&) {
      // Corrupt cache entries are rebuilt below.
    }
  }
  auto grid = build_sdf_grid(mesh, resolution, padding_fraction);
  grid.save(path);
  return grid;
}

}  // namespace a3syn
