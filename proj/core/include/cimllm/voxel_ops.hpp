#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cimllm/volume.hpp"

namespace cimllm::voxel {

enum class Connectivity { Six = 6, TwentySix = 26 };

/// Per-voxel Euclidean distance (mm) to the nearest voxel centre of a source set.
struct DistanceField {
  Geometry geometry;
  std::vector<double> mm;

  [[nodiscard]] double operator[](std::size_t flat) const noexcept { return mm[flat]; }
};

/// Exact squared Euclidean distance transform in mm², computed separably
/// (x, then y, then z) with the lower-envelope-of-parabolas method. For each
/// voxel the result is bit-identical to
///   min over sources s of ((dx*sx)^2 + (dy*sy)^2) + (dz*sz)^2
/// evaluated in that order. Throws Error(EmptySource) for an empty mask.
std::vector<double> squared_edt(const BinaryMask& source);

/// sqrt of squared_edt.
DistanceField edt(const BinaryMask& source);

/// Component label volume: 0 for background, 1..n for components in
/// descending size order (ties broken by first voxel in scan order).
struct ComponentLabels {
  std::vector<std::uint32_t> labels;
  std::vector<std::size_t> sizes;  // sizes[c-1] for label c
};

ComponentLabels label_components(const BinaryMask& mask, Connectivity connectivity);

/// Maximal connected subsets with at least `min_voxels` voxels, largest first.
std::vector<BinaryMask> connected_components(const BinaryMask& mask, Connectivity connectivity,
                                             std::size_t min_voxels = 1);

/// Number of components with at least `min_voxels` voxels, without
/// materialising one mask per component.
std::size_t count_components(const BinaryMask& mask, Connectivity connectivity, std::size_t min_voxels);

/// Mask voxels with at least one neighbour outside the mask; neighbours
/// beyond the grid edge count as outside.
BinaryMask boundary(const BinaryMask& mask, Connectivity connectivity = Connectivity::Six);

/// Exposed voxel-face area in mm². Throws Error(EmptyMask).
double surface_area(const BinaryMask& mask);

/// pi^(1/3) * (6V)^(2/3) / A with the face-count area. Not clamped to 1.
/// Throws Error(EmptyMask).
double sphericity(const BinaryMask& mask);

/// Central differences divided by spacing (one-sided at the edges).
double gradient_magnitude_at(const VoxelGrid& grid, std::size_t i, std::size_t j, std::size_t k) noexcept;
VoxelGrid gradient_magnitude(const VoxelGrid& grid);

/// 6-connected flood fill from every in-mask grid-border voxel of `passable`.
BinaryMask reachable_from_border(const BinaryMask& passable);

}  // namespace cimllm::voxel
