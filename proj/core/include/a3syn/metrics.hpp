#pragma once

#include <optional>
#include <span>
#include <string>

#include "a3syn/common.hpp"
#include "a3syn/sdf.hpp"

namespace a3syn {

/// Fraction of vertices with strictly positive signed distance.
double non_collision_score(std::span<const Vec3> posed_vertices, const SdfGrid& grid);

/// True when some vertex touches or penetrates the scene (min distance <= 0).
bool contact_indicator(std::span<const Vec3> posed_vertices, const SdfGrid& grid);

/// Fraction of placements in contact.
double contact_ratio(std::span<const bool> contacts);

struct PlacementScore {
  double non_collision = 0.0;
  bool contact = false;
  std::optional<double> clip_score;
  std::size_t n_vertices = 0;
};

PlacementScore score_placement(std::span<const Vec3> posed_vertices, const SdfGrid& grid);

/// {"non_collision", "contact", "clip_score", "n_vertices"}, pretty-printed.
std::string report_json(const PlacementScore& score);

}  // namespace a3syn
