#include "a3syn/http_provider.hpp"

#include <cstdlib>
#include <future>

#include "a3syn/codec.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace a3syn {
namespace {

using nlohmann::json;

std::string png_b64(const RgbImage& image) { return base64_encode(encode_png(image)); }

std::string png_b64(const Mask& mask) { return base64_encode(encode_png(mask)); }

json parse_body(const std::string& body, const std::string& path) {
  auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ProviderError(path + ": response is not a JSON object");
  return doc;
}

template <typename T>
T field(const json& doc, const char* key, const std::string& path) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw ProviderError(path + ": response lacks '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ProviderError(path + ": response field '" + key + "' has the wrong type");
  }
}

std::string checked_body(const httplib::Result& res, const std::string& path) {
  if (!res) throw TransportError(path + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    const auto doc = json::parse(res->body, nullptr, false);
    std::string message = "HTTP " + std::to_string(res->status);
    if (doc.is_object() && doc.contains("error") && doc["error"].is_string()) {
      message = doc["error"].get<std::string>();
    }
    throw ProviderError(path + ": " + message);
  }
  return res->body;
}

}  // namespace

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
  if (options_.url.empty()) throw ContractViolation("provider url is empty");
  while (!options_.url.empty() && options_.url.back() == '/') options_.url.pop_back();
}

std::string HttpProvider::post(const std::string& path, const std::string& body) const {
  httplib::Client client(options_.url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  if (!options_.bearer_token.empty()) client.set_bearer_token_auth(options_.bearer_token);
  auto res = client.Post(path, body, "application/json");
  return checked_body(res, path);
}

std::string HttpProvider::get(const std::string& path) const {
  httplib::Client client(options_.url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  if (!options_.bearer_token.empty()) client.set_bearer_token_auth(options_.bearer_token);
  auto res = client.Get(path);
  return checked_body(res, path);
}

ProviderCapabilities HttpProvider::capabilities() {
  if (cached_caps_) return *cached_caps_;
  const auto doc = parse_body(get("/capabilities"), "/capabilities");
  ProviderCapabilities caps;
  caps.supports_partial_denoising = field<bool>(doc, "supports_partial_denoising", "/capabilities");
  const auto dims = field<std::vector<int>>(doc, "feature_grid_dims", "/capabilities");
  if (dims.size() != 3 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    throw ProviderError("/capabilities: feature_grid_dims must be three positive integers");
  }
  caps.feature_height = dims[0];
  caps.feature_width = dims[1];
  caps.feature_dim = dims[2];
  caps.max_image_side = field<int>(doc, "max_image_side", "/capabilities");
  cached_caps_ = caps;
  return caps;
}

RgbImage HttpProvider::inpaint(const InpaintRequest& request) {
  request.validate();
  json body;
  body["image"] = png_b64(request.image);
  body["mask"] = png_b64(request.mask);
  body["prompt"] = request.prompt;
  body["gamma"] = request.partial_ratio;
  body["seed"] = request.seed;
  const auto doc = parse_body(post("/inpaint", body.dump()), "/inpaint");
  RgbImage out = decode_png_rgb(base64_decode(field<std::string>(doc, "image", "/inpaint")));
  if (!out.same_size(request.image)) throw ProviderError("/inpaint: returned image has different dimensions");
  return out;
}

FeatureMap HttpProvider::extract_features(const RgbImage& image, const RenderHint*) {
  json body;
  body["image"] = png_b64(image);
  const auto doc = parse_body(post("/features", body.dump()), "/features");
  return decode_feature_payload(field<int>(doc, "h", "/features"), field<int>(doc, "w", "/features"),
                                field<int>(doc, "d", "/features"), field<std::string>(doc, "data", "/features"));
}

VerifyResult HttpProvider::verify(const RgbImage& image, const std::string& prompt) {
  json body;
  body["image"] = png_b64(image);
  body["prompt"] = prompt;
  const auto raw = post("/verify", body.dump());
  const auto doc = json::parse(raw, nullptr, false);
  if (!doc.is_object()) return {false, raw};
  std::string reply = raw;
  if (const auto it = doc.find("raw"); it != doc.end() && it->is_string()) reply = it->get<std::string>();
  const auto it = doc.find("is_valid");
  if (it == doc.end() || !it->is_boolean()) return parse_verification_reply(reply);
  return {it->get<bool>(), reply};
}

std::vector<RgbImage> HttpProvider::inpaint_many(std::span<const InpaintRequest> requests) {
  std::vector<std::future<RgbImage>> pending;
  pending.reserve(requests.size());
  for (const auto& r : requests) {
    pending.push_back(std::async(std::launch::async, [this, &r] { return inpaint(r); }));
  }
  std::vector<RgbImage> out;
  out.reserve(requests.size());
  std::exception_ptr first_error;
  for (auto& f : pending) {
    try {
      out.push_back(f.get());
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::string provider_token_from_env() {
  const char* token = std::getenv("A3SYN_PROVIDER_TOKEN");
  return token ? std::string(token) : std::string();
}

}  // namespace a3syn
