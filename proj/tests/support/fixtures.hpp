#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "cimllm/manifest.hpp"
#include "cimllm/volume.hpp"

namespace fixture {

using namespace cimllm;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cimllm") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Geometry grid(Index3 dims, Vec3 spacing = {1.0, 1.0, 1.0}, Vec3 origin = {0.0, 0.0, 0.0}) {
  return Geometry{dims, spacing, diagonal_affine(spacing, origin)};
}

/// Voxels whose centre lies within `radius` voxels of `centre` (index units).
inline BinaryMask ball(const Geometry& g, Vec3 centre, double radius) {
  BinaryMask m(g);
  for (std::size_t v = 0; v < m.size(); ++v) {
    const auto c = g.coords(v);
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = static_cast<double>(c[a]) - centre[a];
      d2 += d * d;
    }
    if (d2 <= radius * radius) m.set(v);
  }
  return m;
}

inline BinaryMask box(const Geometry& g, Index3 lo, Index3 hi) {
  BinaryMask m(g);
  for (std::size_t k = lo[2]; k < hi[2]; ++k) {
    for (std::size_t j = lo[1]; j < hi[1]; ++j) {
      for (std::size_t i = lo[0]; i < hi[0]; ++i) m.set(i, j, k);
    }
  }
  return m;
}

inline BinaryMask random_mask(const Geometry& g, std::mt19937_64& rng, double density) {
  std::bernoulli_distribution on(density);
  BinaryMask m(g);
  for (std::size_t v = 0; v < m.size(); ++v) {
    if (on(rng)) m.set(v);
  }
  return m;
}

/// Constant-intensity grid.
inline VoxelGrid constant(const Geometry& g, double value) {
  return VoxelGrid(g, std::vector<double>(g.voxel_count(), value));
}

/// Bundle with only a segmentation.
inline SubjectBundle seg_only(const SegmentationMap& seg, const std::string& id = "s") {
  SubjectBundle b;
  b.subject_id = id;
  b.segmentation = seg;
  return b;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace fixture
