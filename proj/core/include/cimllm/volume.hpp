#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cimllm {

using Vec3 = std::array<double, 3>;
using Index3 = std::array<std::size_t, 3>;

/// Row-major 4x4 voxel-index -> world (mm) transform.
using Affine = std::array<std::array<double, 4>, 4>;

Affine identity_affine() noexcept;
Affine diagonal_affine(const Vec3& spacing, const Vec3& origin = {0.0, 0.0, 0.0}) noexcept;
/// Throws Error(GeometryMismatch) when the 3x3 block is singular.
Affine invert_affine(const Affine& a);
Vec3 apply_affine(const Affine& a, const Vec3& p) noexcept;
/// Column norms of the linear part, i.e. the physical size of one voxel step.
Vec3 affine_column_norms(const Affine& a) noexcept;

/// Shared sampling geometry of a voxel grid. The x index varies fastest in the
/// flat voxel layout (NIfTI order).
struct Geometry {
  Index3 dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Affine affine = identity_affine();

  [[nodiscard]] std::size_t voxel_count() const noexcept { return dims[0] * dims[1] * dims[2]; }
  [[nodiscard]] double voxel_volume_mm3() const noexcept {
    return spacing[0] * spacing[1] * spacing[2];
  }
  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + dims[0] * (j + dims[1] * k);
  }
  [[nodiscard]] Index3 coords(std::size_t flat) const noexcept {
    const std::size_t i = flat % dims[0];
    const std::size_t rest = flat / dims[0];
    return {i, rest % dims[1], rest / dims[1]};
  }
  [[nodiscard]] Vec3 world(std::size_t i, std::size_t j, std::size_t k) const noexcept;
  [[nodiscard]] Vec3 world(std::size_t flat) const noexcept {
    const auto c = coords(flat);
    return world(c[0], c[1], c[2]);
  }

  /// Same dims, spacing and affine within `tol_mm`.
  [[nodiscard]] bool matches(const Geometry& other, double tol_mm = 1e-3) const noexcept;

  /// Throws Error(GeometryMismatch) unless every invariant holds.
  void validate() const;

  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Immutable scalar image with intensities promoted to double.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  /// Throws on data/dims mismatch, invalid geometry or non-finite intensities.
  VoxelGrid(Geometry geometry, std::vector<double> data);

  [[nodiscard]] const Geometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] const Index3& dims() const noexcept { return geometry_.dims; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] double operator[](std::size_t flat) const noexcept { return data_[flat]; }
  [[nodiscard]] double at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[geometry_.index(i, j, k)];
  }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  Geometry geometry_;
  std::vector<double> data_;
};

/// Axis-aligned voxel box [lo, hi) in index space.
struct Box {
  Index3 lo{0, 0, 0};
  Index3 hi{0, 0, 0};
  [[nodiscard]] bool empty() const noexcept {
    return hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2];
  }
  [[nodiscard]] Index3 extent() const noexcept {
    return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
  }
};

class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Geometry geometry);
  BinaryMask(Geometry geometry, std::vector<std::uint8_t> bits);

  [[nodiscard]] const Geometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] const Index3& dims() const noexcept { return geometry_.dims; }
  [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }
  [[nodiscard]] bool operator[](std::size_t flat) const noexcept { return bits_[flat] != 0; }
  [[nodiscard]] bool at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return bits_[geometry_.index(i, j, k)] != 0;
  }
  void set(std::size_t flat, bool value = true) noexcept { bits_[flat] = value ? 1 : 0; }
  void set(std::size_t i, std::size_t j, std::size_t k, bool value = true) noexcept {
    bits_[geometry_.index(i, j, k)] = value ? 1 : 0;
  }
  [[nodiscard]] std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  [[nodiscard]] std::size_t count() const noexcept;
  [[nodiscard]] bool empty() const noexcept { return count() == 0; }
  [[nodiscard]] std::vector<std::size_t> indices() const;
  /// Tight bounding box grown by `margin` voxels and clipped to the grid.
  [[nodiscard]] Box bounding_box(std::size_t margin = 0) const noexcept;

  [[nodiscard]] BinaryMask operator|(const BinaryMask& other) const;
  [[nodiscard]] BinaryMask operator&(const BinaryMask& other) const;
  [[nodiscard]] BinaryMask minus(const BinaryMask& other) const;
  [[nodiscard]] BinaryMask complement() const;

  /// Sub-volume copy; the geometry's affine is shifted to keep world coordinates.
  [[nodiscard]] BinaryMask crop(const Box& box) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Geometry geometry_;
  std::vector<std::uint8_t> bits_;
};

/// Geometry of the sub-grid `box` of `parent` (same spacing, shifted origin).
Geometry crop_geometry(const Geometry& parent, const Box& box);

enum class TumorLabel : std::uint8_t { Background = 0, NonEnhancing = 1, Edema = 2, Enhancing = 4 };

/// Tumor subregion label volume. Only {0, 1, 2, 4} may appear.
class SegmentationMap {
 public:
  SegmentationMap() = default;
  /// Throws Error(LabelVocabularyViolation) for any other value.
  SegmentationMap(Geometry geometry, std::vector<std::uint8_t> labels);
  /// Labels from a loaded grid; values must be exactly one of {0, 1, 2, 4}.
  static SegmentationMap from_grid(const VoxelGrid& grid);

  [[nodiscard]] const Geometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  [[nodiscard]] std::uint8_t operator[](std::size_t flat) const noexcept { return labels_[flat]; }

  [[nodiscard]] std::size_t count(TumorLabel label) const noexcept;
  [[nodiscard]] BinaryMask mask(TumorLabel label) const;
  /// TC = NET ∪ ET
  [[nodiscard]] BinaryMask tumor_core() const;
  /// WT = NET ∪ ED ∪ ET
  [[nodiscard]] BinaryMask whole_tumor() const;

  friend bool operator==(const SegmentationMap&, const SegmentationMap&) = default;

 private:
  Geometry geometry_;
  std::vector<std::uint8_t> labels_;
};

}  // namespace cimllm
