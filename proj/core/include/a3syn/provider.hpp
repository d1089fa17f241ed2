#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "a3syn/camera.hpp"
#include "a3syn/correspondence.hpp"
#include "a3syn/image.hpp"
#include "a3syn/rig.hpp"

namespace a3syn {

/// What a locally rendered image shows. Remote backends never see it; the mock
/// oracle uses it to synthesize ground-truth guidance.
struct ViewHint {
  Camera camera;
  PoseState pose;
};

/// One entry for a full-frame image, four for a 2x2 grid (row-major). Empty
/// entries mark padding tiles.
struct RenderHint {
  std::vector<std::optional<ViewHint>> views;
};

struct InpaintRequest {
  RgbImage image;
  /// Set pixels are synthesized; the rest must be preserved.
  Mask mask;
  std::string prompt;
  /// Fraction of the denoising schedule to run; 1 is full synthesis.
  double partial_ratio = 1.0;
  std::uint64_t seed = 0;
  std::optional<RenderHint> hint;

  void validate() const;
};

struct VerifyResult {
  bool is_valid = false;
  std::string raw_response;
};

struct ProviderCapabilities {
  bool supports_partial_denoising = false;
  int feature_height = 0;
  int feature_width = 0;
  int feature_dim = 1;
  int max_image_side = 1024;
};

/// The backend refused a request; carries its message.
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// The backend could not be reached.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Every candidate failed verification.
class NoValidCandidate : public Error {
 public:
  explicit NoValidCandidate(std::vector<std::string> raw)
      : Error("no valid candidate"), raw_responses_(std::move(raw)) {}
  const std::vector<std::string>& raw_responses() const { return raw_responses_; }

 private:
  std::vector<std::string> raw_responses_;
};

/// Inpainting, feature extraction and verification backend.
class AffordanceProvider {
 public:
  virtual ~AffordanceProvider() = default;

  virtual ProviderCapabilities capabilities() = 0;
  virtual RgbImage inpaint(const InpaintRequest& request) = 0;
  virtual FeatureMap extract_features(const RgbImage& image, const RenderHint* hint = nullptr) = 0;
  virtual VerifyResult verify(const RgbImage& image, const std::string& prompt) = 0;

  /// Several independent requests; the default runs them in order.
  virtual std::vector<RgbImage> inpaint_many(std::span<const InpaintRequest> requests);
};

/// Reads `is_valid` from a reply that may wrap its JSON in a ```json fence.
/// Anything unparsable is treated as invalid.
VerifyResult parse_verification_reply(std::string_view raw);

struct CandidateSelection {
  RgbImage image;
  int round = 0;
  std::size_t index = 0;
  int verifications = 0;
};

/// Returns the first candidate that passes verification. `generate(round)` yields a
/// fresh batch (new seeds) for each of at most `max_rounds` rounds.
CandidateSelection select_candidate(AffordanceProvider& provider,
                                    const std::function<std::vector<RgbImage>(int round)>& generate,
                                    const std::string& prompt, int max_rounds);

/// Features travel as base64 little-endian f32, row-major, channel-fastest.
std::string encode_feature_payload(const FeatureMap& map);
FeatureMap decode_feature_payload(int h, int w, int d, std::string_view base64);

}  // namespace a3syn
