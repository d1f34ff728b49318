#include "cimllm/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cimllm/error.hpp"

namespace cimllm::nifti {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kSingleFileOffset = 352;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
T swap_bytes(T value) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  std::reverse(raw.begin(), raw.end());
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

/// Little/big endian field reader over the raw header bytes.
class FieldReader {
 public:
  FieldReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t offset) const {
    T value;
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
    if (swap_) std::reverse(raw.begin(), raw.end());
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

template <typename T>
T load_element(const std::uint8_t* p, bool swap) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), p, sizeof(T));
  if (swap) std::reverse(raw.begin(), raw.end());
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

int bits_for(std::int16_t datatype) {
  switch (static_cast<Datatype>(datatype)) {
    case Datatype::UInt8:
    case Datatype::Int8: return 8;
    case Datatype::Int16:
    case Datatype::UInt16: return 16;
    case Datatype::Int32:
    case Datatype::Float32: return 32;
    case Datatype::Float64: return 64;
  }
  return 0;
}

Affine quaternion_affine(const FieldReader& h, const Vec3& pixdim, double qfac) {
  const double b = h.get<float>(256);
  const double c = h.get<float>(260);
  const double d = h.get<float>(264);
  double a = 1.0 - (b * b + c * c + d * d);
  a = a < 1e-7 ? 0.0 : std::sqrt(a);
  Affine m = identity_affine();
  const double r[3][3] = {
      {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
      {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
      {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
  const double scale[3] = {pixdim[0], pixdim[1], qfac * pixdim[2]};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] = r[i][j] * scale[j];
  }
  m[0][3] = h.get<float>(268);
  m[1][3] = h.get<float>(272);
  m[2][3] = h.get<float>(276);
  return m;
}

struct ParsedHeader {
  Index3 dims{};
  std::int16_t datatype = 0;
  std::size_t vox_offset = 0;
  double slope = 0.0;
  double inter = 0.0;
  Affine affine{};
  bool swap = false;
  bool paired = false;
};

ParsedHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::CorruptHeader, "file shorter than 348-byte header");

  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  const auto swapped_size = swap_bytes(sizeof_hdr);
  if (sizeof_hdr == 540 || swapped_size == 540) {
    throw Error(ErrorCode::CorruptHeader, "NIfTI-2 headers are not supported (NIfTI-1 only)");
  }

  // Endianness is probed from dim[0], which must lie in 1..7.
  std::int16_t dim0;
  std::memcpy(&dim0, bytes.data() + 40, 2);
  bool swap = false;
  if (dim0 < 1 || dim0 > 7) {
    dim0 = swap_bytes(dim0);
    swap = true;
    if (dim0 < 1 || dim0 > 7) throw Error(ErrorCode::CorruptHeader, "dim[0] outside 1..7 in either byte order");
  }
  FieldReader h(bytes, swap);
  if (h.get<std::int32_t>(0) != 348) throw Error(ErrorCode::CorruptHeader, "sizeof_hdr is not 348");

  const char* magic = reinterpret_cast<const char*>(bytes.data() + 344);
  ParsedHeader out;
  out.swap = swap;
  if (std::memcmp(magic, "n+1\0", 4) == 0) {
    out.paired = false;
  } else if (std::memcmp(magic, "ni1\0", 4) == 0) {
    out.paired = true;
  } else {
    throw Error(ErrorCode::CorruptHeader, "missing NIfTI-1 magic");
  }

  if (dim0 < 3) throw Error(ErrorCode::DimensionalityNot3D, "dim[0] = " + std::to_string(dim0));
  std::array<std::int64_t, 8> dim{};
  for (int i = 0; i < 8; ++i) dim[i] = h.get<std::int16_t>(40 + 2 * i);
  for (int i = 4; i <= dim0; ++i) {
    if (dim[i] > 1) throw Error(ErrorCode::DimensionalityNot3D, "non-singleton dimension " + std::to_string(i));
  }
  for (int i = 1; i <= 3; ++i) {
    if (dim[i] < 1) throw Error(ErrorCode::CorruptHeader, "non-positive dim[" + std::to_string(i) + "]");
    out.dims[i - 1] = static_cast<std::size_t>(dim[i]);
  }

  out.datatype = h.get<std::int16_t>(70);
  const int bits = bits_for(out.datatype);
  if (bits == 0) {
    throw Error(ErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(out.datatype));
  }
  const auto bitpix = h.get<std::int16_t>(72);
  if (bitpix != bits) throw Error(ErrorCode::CorruptHeader, "bitpix inconsistent with datatype");

  Vec3 pixdim{};
  for (int i = 0; i < 3; ++i) pixdim[i] = std::abs(static_cast<double>(h.get<float>(80 + 4 * i)));
  double qfac = h.get<float>(76);
  qfac = qfac < 0 ? -1.0 : 1.0;

  const double vox_offset = h.get<float>(108);
  if (!out.paired) {
    if (!(vox_offset >= static_cast<double>(kHeaderSize))) {
      throw Error(ErrorCode::CorruptHeader, "vox_offset precedes end of header");
    }
  }
  out.vox_offset = out.paired ? static_cast<std::size_t>(std::max(0.0, vox_offset))
                              : static_cast<std::size_t>(vox_offset);
  out.slope = h.get<float>(112);
  out.inter = h.get<float>(116);
  if (!std::isfinite(out.slope)) out.slope = 0.0;
  if (!std::isfinite(out.inter)) out.inter = 0.0;

  const auto qform_code = h.get<std::int16_t>(252);
  const auto sform_code = h.get<std::int16_t>(254);
  if (sform_code > 0 && sform_code >= qform_code) {
    out.affine = identity_affine();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) out.affine[r][c] = h.get<float>(280 + 16 * r + 4 * c);
    }
  } else if (qform_code > 0) {
    for (int i = 0; i < 3; ++i) {
      if (!(pixdim[i] > 0)) throw Error(ErrorCode::CorruptHeader, "qform with non-positive pixdim");
    }
    out.affine = quaternion_affine(h, pixdim, qfac);
  } else {
    for (int i = 0; i < 3; ++i) {
      if (!(pixdim[i] > 0)) throw Error(ErrorCode::CorruptHeader, "non-positive pixdim");
    }
    out.affine = diagonal_affine(pixdim);
  }
  return out;
}

std::vector<double> decode_payload(const ParsedHeader& hdr, std::span<const std::uint8_t> payload) {
  const std::size_t n = hdr.dims[0] * hdr.dims[1] * hdr.dims[2];
  const std::size_t width = static_cast<std::size_t>(bits_for(hdr.datatype)) / 8;
  if (payload.size() < n * width) throw Error(ErrorCode::CorruptHeader, "voxel payload truncated");
  std::vector<double> out(n);
  const std::uint8_t* p = payload.data();
  const bool s = hdr.swap;
  for (std::size_t v = 0; v < n; ++v, p += width) {
    switch (static_cast<Datatype>(hdr.datatype)) {
      case Datatype::UInt8: out[v] = *p; break;
      case Datatype::Int8: out[v] = static_cast<std::int8_t>(*p); break;
      case Datatype::Int16: out[v] = load_element<std::int16_t>(p, s); break;
      case Datatype::UInt16: out[v] = load_element<std::uint16_t>(p, s); break;
      case Datatype::Int32: out[v] = load_element<std::int32_t>(p, s); break;
      case Datatype::Float32: out[v] = load_element<float>(p, s); break;
      case Datatype::Float64: out[v] = load_element<double>(p, s); break;
    }
  }
  if (hdr.slope != 0.0) {
    for (auto& x : out) x = x * hdr.slope + hdr.inter;
  }
  for (double x : out) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteIntensity, "NaN or Inf voxel in payload");
  }
  return out;
}

VoxelGrid make_grid(const ParsedHeader& hdr, std::vector<double> data) {
  Geometry g;
  g.dims = hdr.dims;
  g.affine = hdr.affine;
  g.spacing = affine_column_norms(hdr.affine);
  for (double s : g.spacing) {
    if (!(s > 0)) throw Error(ErrorCode::CorruptHeader, "degenerate spatial transform");
  }
  try {
    return canonicalize(VoxelGrid(std::move(g), std::move(data)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::GeometryMismatch) throw Error(ErrorCode::CorruptHeader, e.what());
    throw;
  }
}

template <typename T>
void store(std::vector<std::uint8_t>& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

}  // namespace

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw Error(ErrorCode::Io, "inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::CorruptHeader, "gzip stream is corrupt or truncated");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorCode::CorruptHeader, "gzip stream truncated");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::Io, "deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::Io, "deflate failed");
  out.resize(zs.total_out);
  return out;
}

VoxelGrid decode_nifti(std::span<const std::uint8_t> bytes) {
  if (is_gzip(bytes)) {
    const auto raw = gzip_decompress(bytes);
    return decode_nifti(raw);
  }
  const ParsedHeader hdr = parse_header(bytes);
  if (hdr.paired) throw Error(ErrorCode::CorruptHeader, "header-only (ni1) image has no inline payload");
  if (hdr.vox_offset > bytes.size()) throw Error(ErrorCode::CorruptHeader, "vox_offset beyond end of file");
  return make_grid(hdr, decode_payload(hdr, bytes.subspan(hdr.vox_offset)));
}

VoxelGrid load_nifti(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (is_gzip(bytes)) bytes = gzip_decompress(bytes);
  const ParsedHeader hdr = parse_header(bytes);
  if (!hdr.paired) {
    if (hdr.vox_offset > bytes.size()) throw Error(ErrorCode::CorruptHeader, "vox_offset beyond end of file");
    return make_grid(hdr, decode_payload(hdr, std::span<const std::uint8_t>(bytes).subspan(hdr.vox_offset)));
  }
  auto img_path = path;
  img_path.replace_extension(".img");
  auto img = read_file(img_path);
  if (is_gzip(img)) img = gzip_decompress(img);
  if (hdr.vox_offset > img.size()) throw Error(ErrorCode::CorruptHeader, "vox_offset beyond end of .img");
  return make_grid(hdr, decode_payload(hdr, std::span<const std::uint8_t>(img).subspan(hdr.vox_offset)));
}

std::vector<std::uint8_t> encode_nifti(const VoxelGrid& grid, Datatype datatype) {
  const int bits = bits_for(static_cast<std::int16_t>(datatype));
  if (bits == 0) throw Error(ErrorCode::UnsupportedDatatype, "cannot encode datatype");
  const auto& g = grid.geometry();
  const std::size_t width = static_cast<std::size_t>(bits) / 8;
  std::vector<std::uint8_t> buf(kSingleFileOffset + grid.size() * width, 0);

  store<std::int32_t>(buf, 0, 348);
  store<std::int16_t>(buf, 40, 3);
  for (int i = 0; i < 3; ++i) store<std::int16_t>(buf, 42 + 2 * i, static_cast<std::int16_t>(g.dims[i]));
  for (int i = 3; i < 7; ++i) store<std::int16_t>(buf, 42 + 2 * i, 1);
  store<std::int16_t>(buf, 70, static_cast<std::int16_t>(datatype));
  store<std::int16_t>(buf, 72, static_cast<std::int16_t>(bits));
  store<float>(buf, 76, 1.0f);
  for (int i = 0; i < 3; ++i) store<float>(buf, 80 + 4 * i, static_cast<float>(g.spacing[i]));
  store<float>(buf, 108, static_cast<float>(kSingleFileOffset));
  store<float>(buf, 112, 0.0f);
  store<float>(buf, 116, 0.0f);
  buf[123] = 2;  // xyzt_units: mm
  store<std::int16_t>(buf, 252, 0);
  store<std::int16_t>(buf, 254, 1);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) store<float>(buf, 280 + 16 * r + 4 * c, static_cast<float>(g.affine[r][c]));
  }
  std::memcpy(buf.data() + 344, "n+1\0", 4);

  std::uint8_t* p = buf.data() + kSingleFileOffset;
  for (double x : grid.data()) {
    switch (datatype) {
      case Datatype::UInt8: *p = static_cast<std::uint8_t>(std::lround(x)); break;
      case Datatype::Int8: *p = static_cast<std::uint8_t>(static_cast<std::int8_t>(std::lround(x))); break;
      case Datatype::Int16: {
        const auto v = static_cast<std::int16_t>(std::lround(x));
        std::memcpy(p, &v, 2);
        break;
      }
      case Datatype::UInt16: {
        const auto v = static_cast<std::uint16_t>(std::lround(x));
        std::memcpy(p, &v, 2);
        break;
      }
      case Datatype::Int32: {
        const auto v = static_cast<std::int32_t>(std::lround(x));
        std::memcpy(p, &v, 4);
        break;
      }
      case Datatype::Float32: {
        const auto v = static_cast<float>(x);
        std::memcpy(p, &v, 4);
        break;
      }
      case Datatype::Float64: std::memcpy(p, &x, 8); break;
    }
    p += width;
  }
  return buf;
}

void write_nifti(const VoxelGrid& grid, const std::filesystem::path& path, Datatype datatype) {
  auto bytes = encode_nifti(grid, datatype);
  if (path.extension() == ".gz") bytes = gzip_compress(bytes);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

VoxelGrid canonicalize(const VoxelGrid& grid) {
  const Geometry& g = grid.geometry();
  // Greedy assignment of voxel axes to world axes by largest |direction cosine|.
  std::array<int, 3> world_of_voxel{-1, -1, -1};
  std::array<bool, 3> world_used{false, false, false};
  for (int round = 0; round < 3; ++round) {
    double best = -1.0;
    int best_v = -1, best_w = -1;
    for (int v = 0; v < 3; ++v) {
      if (world_of_voxel[v] >= 0) continue;
      for (int w = 0; w < 3; ++w) {
        if (world_used[w]) continue;
        const double mag = std::abs(g.affine[w][v]) / g.spacing[v];
        if (mag > best + 1e-12) {
          best = mag;
          best_v = v;
          best_w = w;
        }
      }
    }
    world_of_voxel[best_v] = best_w;
    world_used[best_w] = true;
  }

  std::array<int, 3> src{};   // new axis a reads old axis src[a]
  std::array<bool, 3> flip{};
  for (int v = 0; v < 3; ++v) {
    src[world_of_voxel[v]] = v;
  }
  bool identity = true;
  for (int a = 0; a < 3; ++a) {
    flip[a] = g.affine[a][src[a]] < 0.0;
    if (flip[a] || src[a] != a) identity = false;
  }
  if (identity) return grid;

  Geometry out;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = g.dims[src[a]];
    out.spacing[a] = g.spacing[src[a]];
  }
  // old_index = Q * new_index + c
  out.affine = identity_affine();
  Vec3 c{0.0, 0.0, 0.0};
  for (int a = 0; a < 3; ++a) {
    if (flip[a]) c[src[a]] = static_cast<double>(g.dims[src[a]] - 1);
  }
  for (int r = 0; r < 3; ++r) {
    for (int a = 0; a < 3; ++a) out.affine[r][a] = g.affine[r][src[a]] * (flip[a] ? -1.0 : 1.0);
    out.affine[r][3] = g.affine[r][0] * c[0] + g.affine[r][1] * c[1] + g.affine[r][2] * c[2] + g.affine[r][3];
  }

  std::vector<double> data(grid.size());
  const auto in = grid.data();
  std::size_t dst = 0;
  Index3 old{};
  for (std::size_t k = 0; k < out.dims[2]; ++k) {
    for (std::size_t j = 0; j < out.dims[1]; ++j) {
      for (std::size_t i = 0; i < out.dims[0]; ++i) {
        const Index3 n{i, j, k};
        for (int a = 0; a < 3; ++a) {
          old[src[a]] = flip[a] ? g.dims[src[a]] - 1 - n[a] : n[a];
        }
        data[dst++] = in[g.index(old[0], old[1], old[2])];
      }
    }
  }
  return VoxelGrid(std::move(out), std::move(data));
}

VoxelGrid pad_or_crop(const VoxelGrid& source, const Geometry& target) {
  const Geometry& s = source.geometry();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (std::abs(s.affine[r][c] - target.affine[r][c]) > 1e-3) {
        throw Error(ErrorCode::GeometryMismatch, "pad_or_crop requires identical orientation and spacing");
      }
    }
  }
  // Offset of target voxel (0,0,0) in source index space.
  const Affine inv = invert_affine(s.affine);
  const Vec3 origin{target.affine[0][3], target.affine[1][3], target.affine[2][3]};
  const Vec3 pos = apply_affine(inv, origin);
  std::array<long long, 3> offset{};
  for (int a = 0; a < 3; ++a) {
    const double r = std::round(pos[a]);
    if (std::abs(pos[a] - r) * s.spacing[a] > 1e-3) {
      throw Error(ErrorCode::GeometryMismatch, "grids are not related by an integer voxel offset");
    }
    offset[a] = static_cast<long long>(r);
  }
  std::vector<double> data(target.voxel_count(), 0.0);
  std::size_t dst = 0;
  for (std::size_t k = 0; k < target.dims[2]; ++k) {
    for (std::size_t j = 0; j < target.dims[1]; ++j) {
      for (std::size_t i = 0; i < target.dims[0]; ++i, ++dst) {
        const long long si = static_cast<long long>(i) + offset[0];
        const long long sj = static_cast<long long>(j) + offset[1];
        const long long sk = static_cast<long long>(k) + offset[2];
        if (si < 0 || sj < 0 || sk < 0 || si >= static_cast<long long>(s.dims[0]) ||
            sj >= static_cast<long long>(s.dims[1]) || sk >= static_cast<long long>(s.dims[2])) {
          continue;
        }
        data[dst] = source.at(static_cast<std::size_t>(si), static_cast<std::size_t>(sj),
                              static_cast<std::size_t>(sk));
      }
    }
  }
  Geometry out = target;
  out.spacing = s.spacing;
  return VoxelGrid(std::move(out), std::move(data));
}

}  // namespace cimllm::nifti
