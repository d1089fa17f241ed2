#include "a3syn/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace a3syn {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Felzenszwalb-Huttenlocher 1-D squared distance transform of f, in place.
void edt_1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (f[v[k]] == kInf) {
      v[k] = q;
      continue;
    }
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = f[v[k]] == kInf ? kInf : dq * dq + f[v[k]];
  }
  f.swap(d);
}

}  // namespace

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t b) { return b != 0; }));
}

Mask dilate_mask(const Mask& mask, int radius_px) {
  if (radius_px < 0) throw ContractViolation("dilation radius must be non-negative");
  if (radius_px == 0 || !mask.any()) return mask;

  const int w = mask.width;
  const int h = mask.height;
  std::vector<double> dist(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = mask.data[i] ? 0.0 : kInf;

  const int n = std::max(w, h);
  std::vector<double> f, d(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  for (int y = 0; y < h; ++y) {
    f.assign(dist.begin() + static_cast<std::ptrdiff_t>(y) * w, dist.begin() + static_cast<std::ptrdiff_t>(y + 1) * w);
    d.resize(w);
    edt_1d(f, d, v, z);
    std::copy(f.begin(), f.end(), dist.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  for (int x = 0; x < w; ++x) {
    f.resize(h);
    for (int y = 0; y < h; ++y) f[y] = dist[static_cast<std::size_t>(y) * w + x];
    d.resize(h);
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) dist[static_cast<std::size_t>(y) * w + x] = f[y];
  }

  Mask out(w, h);
  const double r2 = static_cast<double>(radius_px) * radius_px;
  for (std::size_t i = 0; i < dist.size(); ++i) out.data[i] = dist[i] <= r2 ? 1 : 0;
  return out;
}

double occlusion_rate(const Mask& without_scene, const Mask& with_scene) {
  if (!without_scene.same_size(with_scene)) throw ContractViolation("occlusion_rate needs equal mask sizes");
  const auto base = without_scene.count();
  if (base == 0) return 0.0;
  const double rate = 1.0 - static_cast<double>(with_scene.count()) / static_cast<double>(base);
  return std::clamp(rate, 0.0, 1.0);
}

}  // namespace a3syn
