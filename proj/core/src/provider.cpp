#include "a3syn/provider.hpp"

#include <bit>
#include <cstring>

#include <nlohmann/json.hpp>

#include "a3syn/codec.hpp"

namespace a3syn {

void InpaintRequest::validate() const {
  if (image.width != mask.width || image.height != mask.height) throw ContractViolation("inpaint image and mask sizes differ");
  if (!(partial_ratio >= 0.0 && partial_ratio <= 1.0)) throw ContractViolation("partial ratio must lie in [0, 1]");
}

std::vector<RgbImage> AffordanceProvider::inpaint_many(std::span<const InpaintRequest> requests) {
  std::vector<RgbImage> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(inpaint(r));
  return out;
}

VerifyResult parse_verification_reply(std::string_view raw) {
  VerifyResult result;
  result.raw_response = std::string(raw);
  std::string_view body = raw;
  if (const auto fence = raw.find("```json"); fence != std::string_view::npos) {
    body = raw.substr(fence + 7);
    if (const auto end = body.find("```"); end != std::string_view::npos) body = body.substr(0, end);
  } else if (const auto open = raw.find('{'); open != std::string_view::npos) {
    const auto close = raw.rfind('}');
    if (close == std::string_view::npos || close < open) return result;
    body = raw.substr(open, close - open + 1);
  } else {
    return result;
  }
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return result;
  const auto it = doc.find("is_valid");
  if (it == doc.end() || !it->is_boolean()) return result;
  result.is_valid = it->get<bool>();
  return result;
}

CandidateSelection select_candidate(AffordanceProvider& provider,
                                    const std::function<std::vector<RgbImage>(int round)>& generate,
                                    const std::string& prompt, int max_rounds) {
  if (max_rounds < 1) throw ContractViolation("select_candidate needs at least one round");
  std::vector<std::string> raw;
  int verifications = 0;
  for (int round = 0; round < max_rounds; ++round) {
    auto candidates = generate(round);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto verdict = provider.verify(candidates[i], prompt);
      ++verifications;
      if (verdict.is_valid) return {std::move(candidates[i]), round, i, verifications};
      raw.push_back(verdict.raw_response);
    }
  }
  throw NoValidCandidate(std::move(raw));
}

std::string encode_feature_payload(const FeatureMap& map) {
  static_assert(std::endian::native == std::endian::little, "feature payloads assume a little-endian host");
  std::vector<std::uint8_t> bytes(map.data.size() * sizeof(float));
  std::memcpy(bytes.data(), map.data.data(), bytes.size());
  return base64_encode(bytes);
}

FeatureMap decode_feature_payload(int h, int w, int d, std::string_view base64) {
  if (h < 1 || w < 1 || d < 1) throw ProviderError("feature payload has invalid dims");
  const auto bytes = base64_decode(base64);
  FeatureMap map(h, w, d);
  if (bytes.size() != map.data.size() * sizeof(float)) {
    throw ProviderError("feature payload length " + std::to_string(bytes.size()) + " does not match h*w*d*4");
  }
  std::memcpy(map.data.data(), bytes.data(), bytes.size());
  return map;
}

}  // namespace a3syn
