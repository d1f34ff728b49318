#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cimllm/volume.hpp"

namespace cimllm::nifti {

/// NIfTI-1 datatype codes accepted by the reader.
enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
  Int8 = 256,
  UInt16 = 512,
};

/// Loads a .nii / .nii.gz (or .hdr/.img pair) and returns the grid in
/// canonical (RAS-dominant) axis order. Gzip wrapping is detected from the
/// 0x1f8b signature, not the file extension.
VoxelGrid load_nifti(const std::filesystem::path& path);

/// Decodes an in-memory single-file NIfTI-1 image (already gunzipped or not).
VoxelGrid decode_nifti(std::span<const std::uint8_t> bytes);

/// Writes a single-file NIfTI-1 image with sform_code 1 and qform_code 0.
/// A path ending in ".gz" is gzip-compressed.
void write_nifti(const VoxelGrid& grid, const std::filesystem::path& path,
                 Datatype datatype = Datatype::Float32);

std::vector<std::uint8_t> encode_nifti(const VoxelGrid& grid, Datatype datatype = Datatype::Float32);

/// Permutes and flips axes so that voxel axis a is most aligned with world
/// axis a and increases along it. Idempotent.
VoxelGrid canonicalize(const VoxelGrid& grid);

/// Nearest-neighbour copy onto `target` for grids that differ only by an
/// integer voxel offset (padding or cropping). Voxels outside the source are
/// zero. Throws Error(GeometryMismatch) for any other relation.
VoxelGrid pad_or_crop(const VoxelGrid& source, const Geometry& target);

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

}  // namespace cimllm::nifti
