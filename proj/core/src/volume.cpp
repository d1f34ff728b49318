#include "cimllm/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cimllm/error.hpp"

namespace cimllm {

Affine identity_affine() noexcept {
  Affine a{};
  for (int i = 0; i < 4; ++i) a[i][i] = 1.0;
  return a;
}

Affine diagonal_affine(const Vec3& spacing, const Vec3& origin) noexcept {
  Affine a = identity_affine();
  for (int i = 0; i < 3; ++i) {
    a[i][i] = spacing[i];
    a[i][3] = origin[i];
  }
  return a;
}

Affine invert_affine(const Affine& a) {
  const double m00 = a[0][0], m01 = a[0][1], m02 = a[0][2];
  const double m10 = a[1][0], m11 = a[1][1], m12 = a[1][2];
  const double m20 = a[2][0], m21 = a[2][1], m22 = a[2][2];
  const double c00 = m11 * m22 - m12 * m21;
  const double c01 = m12 * m20 - m10 * m22;
  const double c02 = m10 * m21 - m11 * m20;
  const double det = m00 * c00 + m01 * c01 + m02 * c02;
  if (!std::isfinite(det) || std::abs(det) < 1e-12) {
    throw Error(ErrorCode::GeometryMismatch, "affine is singular");
  }
  const double inv = 1.0 / det;
  Affine r = identity_affine();
  r[0][0] = c00 * inv;
  r[0][1] = (m02 * m21 - m01 * m22) * inv;
  r[0][2] = (m01 * m12 - m02 * m11) * inv;
  r[1][0] = c01 * inv;
  r[1][1] = (m00 * m22 - m02 * m20) * inv;
  r[1][2] = (m02 * m10 - m00 * m12) * inv;
  r[2][0] = c02 * inv;
  r[2][1] = (m01 * m20 - m00 * m21) * inv;
  r[2][2] = (m00 * m11 - m01 * m10) * inv;
  for (int i = 0; i < 3; ++i) {
    r[i][3] = -(r[i][0] * a[0][3] + r[i][1] * a[1][3] + r[i][2] * a[2][3]);
  }
  return r;
}

Vec3 apply_affine(const Affine& a, const Vec3& p) noexcept {
  Vec3 out{};
  for (int r = 0; r < 3; ++r) {
    out[r] = a[r][0] * p[0] + a[r][1] * p[1] + a[r][2] * p[2] + a[r][3];
  }
  return out;
}

Vec3 affine_column_norms(const Affine& a) noexcept {
  Vec3 n{};
  for (int c = 0; c < 3; ++c) {
    n[c] = std::sqrt(a[0][c] * a[0][c] + a[1][c] * a[1][c] + a[2][c] * a[2][c]);
  }
  return n;
}

Vec3 Geometry::world(std::size_t i, std::size_t j, std::size_t k) const noexcept {
  return apply_affine(affine, {static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)});
}

bool Geometry::matches(const Geometry& other, double tol_mm) const noexcept {
  if (dims != other.dims) return false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(spacing[i] - other.spacing[i]) > tol_mm) return false;
  }
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (std::abs(affine[r][c] - other.affine[r][c]) > tol_mm) return false;
    }
  }
  return true;
}

void Geometry::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (dims[i] == 0) throw Error(ErrorCode::GeometryMismatch, "zero-length grid axis");
    if (!(spacing[i] > 0.0) || !std::isfinite(spacing[i])) {
      throw Error(ErrorCode::GeometryMismatch, "spacing must be positive and finite");
    }
  }
  (void)invert_affine(affine);
  const Vec3 norms = affine_column_norms(affine);
  for (int i = 0; i < 3; ++i) {
    if (std::abs(norms[i] - spacing[i]) > 1e-3) {
      throw Error(ErrorCode::GeometryMismatch,
                  "affine column norm " + std::to_string(norms[i]) + " disagrees with spacing " +
                      std::to_string(spacing[i]));
    }
  }
}

VoxelGrid::VoxelGrid(Geometry geometry, std::vector<double> data)
    : geometry_(std::move(geometry)), data_(std::move(data)) {
  geometry_.validate();
  if (data_.size() != geometry_.voxel_count()) {
    throw Error(ErrorCode::GeometryMismatch, "data length does not match dims");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteIntensity, "NaN or Inf intensity");
  }
}

BinaryMask::BinaryMask(Geometry geometry)
    : geometry_(std::move(geometry)), bits_(geometry_.voxel_count(), 0) {}

BinaryMask::BinaryMask(Geometry geometry, std::vector<std::uint8_t> bits)
    : geometry_(std::move(geometry)), bits_(std::move(bits)) {
  if (bits_.size() != geometry_.voxel_count()) {
    throw Error(ErrorCode::GeometryMismatch, "mask length does not match dims");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

std::vector<std::size_t> BinaryMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < bits_.size(); ++v) {
    if (bits_[v]) out.push_back(v);
  }
  return out;
}

Box BinaryMask::bounding_box(std::size_t margin) const noexcept {
  const auto& d = geometry_.dims;
  Index3 lo{d[0], d[1], d[2]};
  Index3 hi{0, 0, 0};
  bool any = false;
  std::size_t v = 0;
  for (std::size_t k = 0; k < d[2]; ++k) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      for (std::size_t i = 0; i < d[0]; ++i, ++v) {
        if (!bits_[v]) continue;
        any = true;
        lo[0] = std::min(lo[0], i);
        lo[1] = std::min(lo[1], j);
        lo[2] = std::min(lo[2], k);
        hi[0] = std::max(hi[0], i + 1);
        hi[1] = std::max(hi[1], j + 1);
        hi[2] = std::max(hi[2], k + 1);
      }
    }
  }
  if (!any) return Box{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = lo[a] > margin ? lo[a] - margin : 0;
    hi[a] = std::min(d[a], hi[a] + margin);
  }
  return Box{lo, hi};
}

namespace {
void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.dims() != b.dims()) throw Error(ErrorCode::GeometryMismatch, "mask dims differ");
}
}  // namespace

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
  require_same_dims(*this, other);
  BinaryMask out = *this;
  for (std::size_t v = 0; v < bits_.size(); ++v) out.bits_[v] = bits_[v] | other.bits_[v];
  return out;
}

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
  require_same_dims(*this, other);
  BinaryMask out = *this;
  for (std::size_t v = 0; v < bits_.size(); ++v) out.bits_[v] = bits_[v] & other.bits_[v];
  return out;
}

BinaryMask BinaryMask::minus(const BinaryMask& other) const {
  require_same_dims(*this, other);
  BinaryMask out = *this;
  for (std::size_t v = 0; v < bits_.size(); ++v) out.bits_[v] = bits_[v] & (1 - other.bits_[v]);
  return out;
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out = *this;
  for (auto& b : out.bits_) b = 1 - b;
  return out;
}

Geometry crop_geometry(const Geometry& parent, const Box& box) {
  Geometry g = parent;
  g.dims = box.extent();
  const Vec3 origin = parent.world(box.lo[0], box.lo[1], box.lo[2]);
  for (int r = 0; r < 3; ++r) g.affine[r][3] = origin[r];
  return g;
}

BinaryMask BinaryMask::crop(const Box& box) const {
  BinaryMask out(crop_geometry(geometry_, box));
  const auto e = box.extent();
  std::size_t dst = 0;
  for (std::size_t k = 0; k < e[2]; ++k) {
    for (std::size_t j = 0; j < e[1]; ++j) {
      const std::size_t src = geometry_.index(box.lo[0], box.lo[1] + j, box.lo[2] + k);
      for (std::size_t i = 0; i < e[0]; ++i) out.bits_[dst++] = bits_[src + i];
    }
  }
  return out;
}

namespace {
bool valid_label(std::uint8_t v) noexcept { return v == 0 || v == 1 || v == 2 || v == 4; }
}  // namespace

SegmentationMap::SegmentationMap(Geometry geometry, std::vector<std::uint8_t> labels)
    : geometry_(std::move(geometry)), labels_(std::move(labels)) {
  if (labels_.size() != geometry_.voxel_count()) {
    throw Error(ErrorCode::GeometryMismatch, "label length does not match dims");
  }
  for (auto v : labels_) {
    if (!valid_label(v)) {
      throw Error(ErrorCode::LabelVocabularyViolation,
                  "segmentation label " + std::to_string(v) + " outside {0,1,2,4}");
    }
  }
}

SegmentationMap SegmentationMap::from_grid(const VoxelGrid& grid) {
  std::vector<std::uint8_t> labels(grid.size());
  for (std::size_t v = 0; v < grid.size(); ++v) {
    const double x = grid[v];
    if (x != 0.0 && x != 1.0 && x != 2.0 && x != 4.0) {
      throw Error(ErrorCode::LabelVocabularyViolation,
                  "segmentation value " + std::to_string(x) + " outside {0,1,2,4}");
    }
    labels[v] = static_cast<std::uint8_t>(x);
  }
  return SegmentationMap(grid.geometry(), std::move(labels));
}

std::size_t SegmentationMap::count(TumorLabel label) const noexcept {
  const auto l = static_cast<std::uint8_t>(label);
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

BinaryMask SegmentationMap::mask(TumorLabel label) const {
  const auto l = static_cast<std::uint8_t>(label);
  std::vector<std::uint8_t> bits(labels_.size());
  for (std::size_t v = 0; v < labels_.size(); ++v) bits[v] = labels_[v] == l;
  return BinaryMask(geometry_, std::move(bits));
}

BinaryMask SegmentationMap::tumor_core() const {
  std::vector<std::uint8_t> bits(labels_.size());
  for (std::size_t v = 0; v < labels_.size(); ++v) bits[v] = labels_[v] == 1 || labels_[v] == 4;
  return BinaryMask(geometry_, std::move(bits));
}

BinaryMask SegmentationMap::whole_tumor() const {
  std::vector<std::uint8_t> bits(labels_.size());
  for (std::size_t v = 0; v < labels_.size(); ++v) bits[v] = labels_[v] != 0;
  return BinaryMask(geometry_, std::move(bits));
}

}  // namespace cimllm
