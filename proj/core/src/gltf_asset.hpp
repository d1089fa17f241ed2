#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "a3syn/common.hpp"

namespace a3syn::detail {

/// Parsed glTF 2.0 document (.gltf or .glb) with its buffers resolved.
class GltfAsset {
 public:
  static GltfAsset load(const std::filesystem::path& path);
  static GltfAsset parse(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& base_dir);

  const nlohmann::json& doc() const { return doc_; }
  const std::vector<std::uint8_t>& raw_bytes() const { return raw_; }

  /// Accessor elements widened to double; `normalized` integer data is mapped to [0, 1].
  std::vector<std::vector<double>> read_accessor(std::size_t index) const;
  std::size_t accessor_count(std::size_t index) const;

  std::size_t node_count() const;
  Mat4 local_matrix(std::size_t node) const;
  /// Parent node per node, -1 for roots. Throws "invalid hierarchy" when a node has two parents.
  std::vector<long> node_parents() const;
  /// Node transforms composed from the roots. Throws "invalid hierarchy" on cycles.
  std::vector<Mat4> node_globals() const;

 private:
  nlohmann::json doc_;
  std::vector<std::vector<std::uint8_t>> buffers_;
  std::vector<std::uint8_t> raw_;
};

}  // namespace a3syn::detail
