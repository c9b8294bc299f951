#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nodulekit/volume.hpp"

namespace nodulekit {

// RAWCT: magic "RAWCT\0\0\0", u32-LE header length, UTF-8 JSON header
// (dims, spacing_mm, rescale_slope, rescale_intercept, patient_id), then
// nx*ny*nz little-endian int16 stored values, x-fastest. HU = stored*slope
// + intercept, rounded half away from zero and clamped to int16.
CTVolume parse_volume(const std::filesystem::path& path);
CTVolume parse_volume_bytes(const std::vector<std::uint8_t>& bytes);

// Writes stored values equal to HU (slope 1, intercept 0).
void write_volume(const CTVolume& volume, const std::filesystem::path& path);
std::vector<std::uint8_t> volume_to_bytes(const CTVolume& volume);

}  // namespace nodulekit
