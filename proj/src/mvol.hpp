#pragma once

#include <string>

#include "volume.hpp"

namespace hepato {

// MVOL: minimal self-describing raw volume format. ASCII header
// ("MVOL 1", dims, spacing, origin, dtype, END), then the raw payload,
// little-endian int16 for volumes and uint8 {0,1} for masks, x-fastest.

CtVolume read_volume(const std::string& path);
void write_volume(const CtVolume& vol, const std::string& path);

BinaryMask read_mask(const std::string& path);
void write_mask(const BinaryMask& mask, const std::string& path);

// In-memory variants (used by the HTTP study source).
CtVolume parse_volume(const std::string& bytes, const std::string& context);
std::string serialize_volume(const CtVolume& vol);
std::string serialize_mask(const BinaryMask& mask);

// Locale-independent shortest round-trip decimal rendering.
std::string format_double(double v);

}  // namespace hepato
