#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "a3syn/provider.hpp"

namespace a3syn {

struct HttpProviderOptions {
  /// Base URL, e.g. "http://127.0.0.1:8080".
  std::string url;
  /// Sent as "Authorization: Bearer <token>" when non-empty.
  std::string bearer_token;
  std::chrono::seconds timeout{120};
};

/// Client for a remote provider speaking the JSON wire protocol:
///   POST /inpaint  {image, mask, prompt, gamma, seed} -> {image}
///   POST /features {image} -> {h, w, d, data}
///   POST /verify   {image, prompt} -> {is_valid, raw}
///   GET  /capabilities
/// Images travel as base64 PNG. Render hints are never sent.
class HttpProvider : public AffordanceProvider {
 public:
  explicit HttpProvider(HttpProviderOptions options);

  ProviderCapabilities capabilities() override;
  RgbImage inpaint(const InpaintRequest& request) override;
  FeatureMap extract_features(const RgbImage& image, const RenderHint* hint = nullptr) override;
  VerifyResult verify(const RgbImage& image, const std::string& prompt) override;

  /// Issues all requests concurrently; results keep request order.
  std::vector<RgbImage> inpaint_many(std::span<const InpaintRequest> requests) override;

 private:
  std::string post(const std::string& path, const std::string& body) const;
  std::string get(const std::string& path) const;

  HttpProviderOptions options_;
  std::optional<ProviderCapabilities> cached_caps_;
};

/// Token from A3SYN_PROVIDER_TOKEN, empty if unset.
std::string provider_token_from_env();

}  // namespace a3syn
