#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace hepato {

constexpr int kHuMin = -1024;
constexpr int kHuMax = 3071;

// Grid geometry shared by volumes and masks. Voxel (x,y,z) is cell-centered
// at origin_mm + (index + 0.5) * spacing_mm on each axis. Data ordering is
// x-fastest, then y, then z.
struct VoxelGrid {
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::array<double, 3> origin_mm{0.0, 0.0, 0.0};

  std::size_t voxel_count() const {
    return std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);
  }
  std::size_t index(int x, int y, int z) const {
    return (std::size_t(z) * dims[1] + y) * dims[0] + x;
  }
  double extent_mm(int axis) const { return dims[axis] * spacing_mm[axis]; }
  double voxel_volume_mm3() const {
    return spacing_mm[0] * spacing_mm[1] * spacing_mm[2];
  }
  // voxel-center physical coordinate
  double center_mm(int axis, int i) const {
    return origin_mm[axis] + (i + 0.5) * spacing_mm[axis];
  }

  bool operator==(const VoxelGrid&) const = default;

  // throws std::invalid_argument on non-positive dims/spacing
  void validate() const;
};

struct CtVolume {
  VoxelGrid grid;
  std::vector<int16_t> values;  // Hounsfield units

  int16_t at(int x, int y, int z) const { return values[grid.index(x, y, z)]; }
};

struct BinaryMask {
  VoxelGrid grid;
  std::vector<uint8_t> bits;

  bool at(int x, int y, int z) const { return bits[grid.index(x, y, z)] != 0; }
  std::size_t popcount() const;
};

CtVolume make_volume(const VoxelGrid& grid, int16_t fill = 0);
BinaryMask make_mask(const VoxelGrid& grid, bool fill = false);

// Trilinear value at a physical point; samples are clamped to the border.
double sample_trilinear(const CtVolume& vol, double x_mm, double y_mm, double z_mm);
double sample_trilinear_mask(const BinaryMask& mask, double x_mm, double y_mm, double z_mm);

// Trilinear resample onto a grid with the given spacing covering the same
// physical extent. Throws std::invalid_argument if any output dim would be 0.
CtVolume resample(const CtVolume& vol, const std::array<double, 3>& target_spacing_mm);

// Occupancy resample: output bit set iff interpolated occupancy >= threshold.
BinaryMask resample_mask(const BinaryMask& mask, const std::array<double, 3>& target_spacing_mm,
                         double occupancy_threshold = 0.5);

BinaryMask threshold(const CtVolume& vol, double lo_hu, double hi_hu);

enum class MorphOp { Erode, Dilate, Close };

// Binary morphology with the discrete Euclidean ball of physical radius
// radius_mm on the mask's (possibly anisotropic) grid. Voxels outside the
// volume count as unset. Implemented with exact distance transforms.
BinaryMask morph(const BinaryMask& mask, MorphOp op, double radius_mm);

// Squared Euclidean distance (mm^2) from each voxel center to the nearest
// set voxel center; +inf (large sentinel) if the mask is empty.
std::vector<float> distance_sq_to_set_mm(const BinaryMask& mask);

struct ComponentSet {
  // 0 = background; labels 1..K ordered by size descending,
  // ties by smallest first linear index.
  std::vector<int32_t> labels;
  std::vector<std::size_t> sizes;  // sizes[k-1] = voxels with label k
};

// 6-connectivity (face neighbors).
ComponentSet connected_components(const BinaryMask& mask);
BinaryMask largest_component(const BinaryMask& mask);

double mask_volume_ml(const BinaryMask& mask);

// Separable Gaussian smoothing with physical sigma (mm); sigma 0 is identity.
CtVolume gaussian_smooth(const CtVolume& vol, double sigma_mm);

// Reverse slice order along z (for the opposite acquisition convention).
CtVolume flip_z(const CtVolume& vol);

}  // namespace hepato
