#include "a3syn/metrics.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace a3syn {

double non_collision_score(std::span<const Vec3> posed_vertices, const SdfGrid& grid) {
  if (posed_vertices.empty()) throw ContractViolation("non_collision_score needs vertices");
  const auto outside = std::count_if(posed_vertices.begin(), posed_vertices.end(),
                                     [&](const Vec3& v) { return grid.query(v) > 0.0; });
  return static_cast<double>(outside) / static_cast<double>(posed_vertices.size());
}

bool contact_indicator(std::span<const Vec3> posed_vertices, const SdfGrid& grid) {
  if (posed_vertices.empty()) throw ContractViolation("contact_indicator needs vertices");
  return std::any_of(posed_vertices.begin(), posed_vertices.end(),
                     [&](const Vec3& v) { return grid.query(v) <= 0.0; });
}

double contact_ratio(std::span<const bool> contacts) {
  if (contacts.empty()) throw ContractViolation("contact_ratio needs at least one placement");
  const auto n = std::count(contacts.begin(), contacts.end(), true);
  return static_cast<double>(n) / static_cast<double>(contacts.size());
}

PlacementScore score_placement(std::span<const Vec3> posed_vertices, const SdfGrid& grid) {
  PlacementScore score;
  score.non_collision = non_collision_score(posed_vertices, grid);
  score.contact = contact_indicator(posed_vertices, grid);
  score.n_vertices = posed_vertices.size();
  return score;
}

std::string report_json(const PlacementScore& score) {
  nlohmann::ordered_json doc;
  doc["non_collision"] = score.non_collision;
  doc["contact"] = score.contact;
  doc["clip_score"] = score.clip_score ? nlohmann::ordered_json(*score.clip_score) : nlohmann::ordered_json();
  doc["n_vertices"] = score.n_vertices;
  return doc.dump(2);
}

}  // namespace a3syn
