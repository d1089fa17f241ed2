#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "a3syn/image.hpp"

namespace a3syn {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Error on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
/// Masks are written as 8-bit grayscale (0 / 255).
std::vector<std::uint8_t> encode_png(const Mask& mask);

/// Decodes any PNG into 8-bit RGB.
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);
/// Decodes any PNG into a mask; a pixel is set when its first channel is >= 128.
Mask decode_png_mask(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const Mask& mask);
RgbImage read_png_rgb(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace a3syn
