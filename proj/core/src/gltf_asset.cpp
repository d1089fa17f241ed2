#include "gltf_asset.hpp"

#include <cstring>

#include <Eigen/Geometry>

#include "a3syn/codec.hpp"

namespace a3syn::detail {
namespace {

using nlohmann::json;

std::uint32_t read_u32(const std::vector<std::uint8_t>& bytes, std::size_t at) {
  if (at + 4 > bytes.size()) throw Error("truncated glb");
  std::uint32_t v = 0;
  std::memcpy(&v, bytes.data() + at, 4);
  return v;
}

int component_count(const std::string& type) {
  if (type == "SCALAR") return 1;
  if (type == "VEC2") return 2;
  if (type == "VEC3") return 3;
  if (type == "VEC4") return 4;
  if (type == "MAT2") return 4;
  if (type == "MAT3") return 9;
  if (type == "MAT4") return 16;
  throw Error("unsupported accessor type " + type);
}

int component_size(int component_type) {
  switch (component_type) {
    case 5120:
    case 5121:
      return 1;
    case 5122:
    case 5123:
      return 2;
    case 5125:
    case 5126:
      return 4;
    default:
      throw Error("unsupported accessor component type " + std::to_string(component_type));
  }
}

double read_component(const std::uint8_t* p, int component_type, bool normalized) {
  switch (component_type) {
    case 5120: {
      std::int8_t v;
      std::memcpy(&v, p, 1);
      return normalized ? std::max(v / 127.0, -1.0) : v;
    }
    case 5121: {
      std::uint8_t v = *p;
      return normalized ? v / 255.0 : v;
    }
    case 5122: {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return normalized ? std::max(v / 32767.0, -1.0) : v;
    }
    case 5123: {
      std::uint16_t v;
      std::memcpy(&v, p, 2);
      return normalized ? v / 65535.0 : v;
    }
    case 5125: {
      std::uint32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
    default: {
      float v;
      std::memcpy(&v, p, 4);
      return v;
    }
  }
}

std::vector<std::uint8_t> load_uri(const std::string& uri, const std::filesystem::path& base_dir) {
  const std::string prefix = "data:";
  if (uri.rfind(prefix, 0) == 0) {
    const auto comma = uri.find(',');
    if (comma == std::string::npos || uri.find(";base64") > comma) throw Error("unsupported data uri");
    return base64_decode(std::string_view(uri).substr(comma + 1));
  }
  return read_file(base_dir / uri);
}

}  // namespace

GltfAsset GltfAsset::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.parent_path());
}

GltfAsset GltfAsset::parse(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& base_dir) {
  GltfAsset asset;
  asset.raw_ = bytes;
  std::vector<std::uint8_t> bin;
  bool has_bin = false;
  if (bytes.size() >= 12 && std::memcmp(bytes.data(), "glTF", 4) == 0) {
    if (read_u32(bytes, 4) != 2) throw Error("unsupported glb version");
    const std::size_t total = std::min<std::size_t>(read_u32(bytes, 8), bytes.size());
    std::size_t at = 12;
    bool has_json = false;
    while (at + 8 <= total) {
      const std::uint32_t len = read_u32(bytes, at);
      const std::uint32_t type = read_u32(bytes, at + 4);
      if (at + 8 + len > total) throw Error("truncated glb chunk");
      const auto* chunk = bytes.data() + at + 8;
      if (type == 0x4E4F534Au) {
        asset.doc_ = json::parse(chunk, chunk + len, nullptr, false);
        has_json = true;
      } else if (type == 0x004E4942u && !has_bin) {
        bin.assign(chunk, chunk + len);
        has_bin = true;
      }
      at += 8 + len;
    }
    if (!has_json) throw Error("glb has no JSON chunk");
  } else {
    asset.doc_ = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  }
  if (asset.doc_.is_discarded() || !asset.doc_.is_object()) throw Error("not a glTF document");

  if (const auto it = asset.doc_.find("buffers"); it != asset.doc_.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& buffer = (*it)[i];
      if (buffer.contains("uri")) {
        asset.buffers_.push_back(load_uri(buffer["uri"].get<std::string>(), base_dir));
      } else if (i == 0 && has_bin) {
        asset.buffers_.push_back(bin);
      } else {
        throw Error("buffer " + std::to_string(i) + " has no data");
      }
    }
  }
  return asset;
}

std::size_t GltfAsset::accessor_count(std::size_t index) const {
  return doc_.at("accessors").at(index).at("count").get<std::size_t>();
}

std::vector<std::vector<double>> GltfAsset::read_accessor(std::size_t index) const {
  const auto& acc = doc_.at("accessors").at(index);
  if (acc.contains("sparse")) throw Error("sparse accessors are not supported");
  const int ctype = acc.at("componentType").get<int>();
  const int ncomp = component_count(acc.at("type").get<std::string>());
  const int csize = component_size(ctype);
  const auto count = acc.at("count").get<std::size_t>();
  const bool normalized = acc.value("normalized", false);
  std::vector<std::vector<double>> out(count, std::vector<double>(static_cast<std::size_t>(ncomp), 0.0));
  if (!acc.contains("bufferView")) return out;

  const auto& view = doc_.at("bufferViews").at(acc.at("bufferView").get<std::size_t>());
  const auto& buffer = buffers_.at(view.at("buffer").get<std::size_t>());
  const std::size_t elem_size = static_cast<std::size_t>(ncomp) * csize;
  const std::size_t stride = view.value("byteStride", std::size_t{0}) ? view["byteStride"].get<std::size_t>() : elem_size;
  const std::size_t base = view.value("byteOffset", std::size_t{0}) + acc.value("byteOffset", std::size_t{0});
  const std::size_t view_end = view.value("byteOffset", std::size_t{0}) + view.at("byteLength").get<std::size_t>();
  if (count > 0 && (base + (count - 1) * stride + elem_size > view_end || view_end > buffer.size())) {
    throw Error("accessor " + std::to_string(index) + " overruns its buffer");
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto* p = buffer.data() + base + i * stride;
    for (int c = 0; c < ncomp; ++c) out[i][c] = read_component(p + c * csize, ctype, normalized);
  }
  return out;
}

std::size_t GltfAsset::node_count() const {
  return doc_.contains("nodes") ? doc_["nodes"].size() : 0;
}

Mat4 GltfAsset::local_matrix(std::size_t node) const {
  const auto& n = doc_.at("nodes").at(node);
  Mat4 m = Mat4::Identity();
  if (n.contains("matrix")) {
    const auto v = n["matrix"].get<std::vector<double>>();
    if (v.size() != 16) throw Error("node matrix must have 16 entries");
    for (int c = 0; c < 4; ++c) {
      for (int r = 0; r < 4; ++r) m(r, c) = v[static_cast<std::size_t>(c) * 4 + r];
    }
    return m;
  }
  Vec3 t = Vec3::Zero();
  Vec3 s = Vec3::Ones();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  if (n.contains("translation")) {
    const auto v = n["translation"].get<std::vector<double>>();
    t = Vec3(v.at(0), v.at(1), v.at(2));
  }
  if (n.contains("rotation")) {
    const auto v = n["rotation"].get<std::vector<double>>();
    q = Eigen::Quaterniond(v.at(3), v.at(0), v.at(1), v.at(2)).normalized();
  }
  if (n.contains("scale")) {
    const auto v = n["scale"].get<std::vector<double>>();
    s = Vec3(v.at(0), v.at(1), v.at(2));
  }
  m.topLeftCorner<3, 3>() = q.toRotationMatrix() * s.asDiagonal();
  m.topRightCorner<3, 1>() = t;
  return m;
}

std::vector<long> GltfAsset::node_parents() const {
  const std::size_t n = node_count();
  std::vector<long> parent(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = doc_["nodes"][i];
    if (!node.contains("children")) continue;
    for (const auto& c : node["children"]) {
      const auto child = c.get<std::size_t>();
      if (child >= n || parent[child] != -1) throw Error("invalid hierarchy");
      parent[child] = static_cast<long>(i);
    }
  }
  return parent;
}

std::vector<Mat4> GltfAsset::node_globals() const {
  const auto parent = node_parents();
  const std::size_t n = parent.size();
  std::vector<Mat4> global(n, Mat4::Identity());
  std::vector<int> state(n, 0);  // 0 new, 1 in progress, 2 done
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<std::size_t> chain;
    std::size_t cur = start;
    while (state[cur] == 0) {
      state[cur] = 1;
      chain.push_back(cur);
      if (parent[cur] < 0) break;
      cur = static_cast<std::size_t>(parent[cur]);
    }
    if (state[cur] == 1 && parent[cur] >= 0) throw Error("invalid hierarchy");
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const long p = parent[*it];
      global[*it] = p < 0 ? local_matrix(*it) : Mat4(global[static_cast<std::size_t>(p)] * local_matrix(*it));
      state[*it] = 2;
    }
  }
  return global;
}

}  // namespace a3syn::detail
