#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "bodymodel.hpp"
#include "volume.hpp"

namespace hepato {

enum class PhantomKind { Body, ChestCrop, Head, Limb };

std::optional<PhantomKind> parse_phantom_kind(const std::string& name);
const char* phantom_kind_name(PhantomKind k);

struct LesionSpec {
  double hu = 24.0;
  double radius_mm = 0.0;     // explicit radius, or
  double fraction = 0.0;      // target share of liver volume (wins if > 0)
};

struct PhantomSpec {
  PhantomKind kind = PhantomKind::Body;
  double liver_hu = 50.0;
  std::optional<LesionSpec> lesion;
  double noise_sigma_hu = 10.0;
  double liver_scale = 1.0;
  double fov_liver_fraction = 1.0;  // chest_crop only
  uint64_t seed = 0;
  std::array<double, 3> spacing_mm{2.0, 2.0, 2.5};
  // force exact grid dims (spacing is then derived from the crop extent);
  // used for runtime benchmarks against a fixed acquisition matrix
  std::optional<std::array<int, 3>> dims_override;

  void validate() const;  // throws std::invalid_argument
};

struct PhantomTruth {
  BinaryMask liver_mask;  // includes the lesion
  double liver_mean_hu = 0.0;
  std::optional<BinaryMask> lesion_mask;
  bool liver_present = false;
};

// Deterministic synthesis: equal specs give byte-identical volumes.
std::pair<CtVolume, PhantomTruth> generate_phantom(const PhantomSpec& spec);

}  // namespace hepato
