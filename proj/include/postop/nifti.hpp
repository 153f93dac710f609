#pragma once

// NIfTI-1 reader/writer. Single-file ("n+1") streams, optionally gzip
// wrapped, plus the header/image pair ("ni1") through the file helpers.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "postop/error.hpp"
#include "postop/volume.hpp"

namespace postop::nifti {

using Bytes = std::vector<std::uint8_t>;

enum Datatype : int {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kUint16 = 512,
};

inline constexpr int kHeaderSize = 348;
inline constexpr int kSingleFileOffset = 352;

inline bool is_supported_datatype(int code) {
  switch (code) {
    case kUint8: case kInt16: case kInt32: case kFloat32: case kFloat64: case kUint16:
      return true;
    default:
      return false;
  }
}

inline int bitpix_for(int code) {
  switch (code) {
    case kUint8: return 8;
    case kInt16: return 16;
    case kUint16: return 16;
    case kInt32: return 32;
    case kFloat32: return 32;
    case kFloat64: return 64;
    default: throw Error(ErrorCode::UnsupportedDatatype, std::to_string(code));
  }
}

/// The subset of the 348-byte header that the pipeline interprets. Unused
/// text fields (descrip, aux_file, intent_name) are carried for completeness.
struct Header {
  int sizeof_hdr = kHeaderSize;
  std::array<std::int16_t, 8> dim{3, 1, 1, 1, 1, 1, 1, 1};
  std::int16_t intent_code = 0;
  std::int16_t datatype = kFloat32;
  std::int16_t bitpix = 32;
  std::array<float, 8> pixdim{1, 1, 1, 1, 1, 1, 1, 1};
  float vox_offset = kSingleFileOffset;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::uint8_t xyzt_units = 2;  // mm
  float cal_max = 0.0f, cal_min = 0.0f;
  std::int16_t qform_code = 0, sform_code = 0;
  float quatern_b = 0, quatern_c = 0, quatern_d = 0;
  float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
  std::array<float, 4> srow_x{1, 0, 0, 0}, srow_y{0, 1, 0, 0}, srow_z{0, 0, 1, 0};
  std::array<char, 80> descrip{};
  std::array<char, 4> magic{'n', '+', '1', '\0'};

  bool operator==(const Header&) const = default;
};

struct Image {
  Header header;
  VoxelGrid grid;
  /// Raw bytes between the header and vox_offset (extension flag + blobs).
  Bytes extensions;
};

struct WriteOptions {
  /// Round to nearest and accept for integer targets instead of failing on
  /// non-integer or out-of-range values.
  bool quantize = false;
  bool big_endian = false;
  /// Written verbatim after the header; must start with the 4-byte extension flag.
  Bytes extensions;
};

namespace detail {

inline bool is_gzip(std::span<const std::uint8_t> b) {
  return b.size() >= 2 && b[0] == 0x1F && b[1] == 0x8B;
}

inline Bytes gunzip(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(ErrorCode::IoError, "inflateInit2 failed");
  Bytes out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::TruncatedData, "corrupt or truncated gzip stream");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorCode::TruncatedData, "gzip stream ended early");
    }
  }
  inflateEnd(&zs);
  return out;
}

// Output is deterministic: zlib writes mtime=0 and no file name.
inline Bytes gzip(std::span<const std::uint8_t> in, int level = 6) {
  z_stream zs{};
  if (deflateInit2(&zs, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(ErrorCode::IoError, "deflateInit2 failed");
  Bytes out(deflateBound(&zs, static_cast<uLong>(in.size())) + 32);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::IoError, "deflate failed");
  out.resize(zs.total_out);
  return out;
}

template <typename T>
T byteswap_value(T v) {
  std::array<std::uint8_t, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  std::reverse(b.begin(), b.end());
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, bool swap) : b_(b), swap_(swap) {}
  template <typename T>
  T get(std::size_t off) const {
    T v;
    std::memcpy(&v, b_.data() + off, sizeof(T));
    return swap_ ? byteswap_value(v) : v;
  }

 private:
  std::span<const std::uint8_t> b_;
  bool swap_;
};

class Writer {
 public:
  Writer(Bytes& b, bool swap) : b_(b), swap_(swap) {}
  template <typename T>
  void put(std::size_t off, T v) {
    if (swap_) v = byteswap_value(v);
    std::memcpy(b_.data() + off, &v, sizeof(T));
  }

 private:
  Bytes& b_;
  bool swap_;
};

inline bool host_is_little() { return std::endian::native == std::endian::little; }

inline Header parse_header(std::span<const std::uint8_t> b, bool& swapped) {
  if (b.size() < kHeaderSize) throw Error(ErrorCode::TruncatedData, "stream shorter than header");
  std::int32_t sz;
  std::memcpy(&sz, b.data(), 4);
  if (sz == kHeaderSize) {
    swapped = false;
  } else if (byteswap_value(sz) == kHeaderSize) {
    swapped = true;
  } else {
    throw Error(ErrorCode::HeaderInconsistent, "sizeof_hdr is " + std::to_string(sz) + " in either byte order");
  }
  Reader r(b, swapped);
  Header h;
  h.sizeof_hdr = kHeaderSize;
  for (int i = 0; i < 8; ++i) h.dim[i] = r.get<std::int16_t>(40 + 2 * i);
  h.intent_code = r.get<std::int16_t>(68);
  h.datatype = r.get<std::int16_t>(70);
  h.bitpix = r.get<std::int16_t>(72);
  for (int i = 0; i < 8; ++i) h.pixdim[i] = r.get<float>(76 + 4 * i);
  h.vox_offset = r.get<float>(108);
  h.scl_slope = r.get<float>(112);
  h.scl_inter = r.get<float>(116);
  h.xyzt_units = b[123];
  h.cal_max = r.get<float>(124);
  h.cal_min = r.get<float>(128);
  std::memcpy(h.descrip.data(), b.data() + 148, 80);
  h.qform_code = r.get<std::int16_t>(252);
  h.sform_code = r.get<std::int16_t>(254);
  h.quatern_b = r.get<float>(256);
  h.quatern_c = r.get<float>(260);
  h.quatern_d = r.get<float>(264);
  h.qoffset_x = r.get<float>(268);
  h.qoffset_y = r.get<float>(272);
  h.qoffset_z = r.get<float>(276);
  for (int i = 0; i < 4; ++i) {
    h.srow_x[i] = r.get<float>(280 + 4 * i);
    h.srow_y[i] = r.get<float>(296 + 4 * i);
    h.srow_z[i] = r.get<float>(312 + 4 * i);
  }
  std::memcpy(h.magic.data(), b.data() + 344, 4);
  return h;
}

inline Bytes serialize_header(const Header& h, bool big_endian) {
  Bytes b(kHeaderSize, 0);
  Writer w(b, big_endian == host_is_little());
  w.put<std::int32_t>(0, kHeaderSize);
  b[38] = 'r';  // "regular"
  for (int i = 0; i < 8; ++i) w.put<std::int16_t>(40 + 2 * i, h.dim[i]);
  w.put<std::int16_t>(68, h.intent_code);
  w.put<std::int16_t>(70, h.datatype);
  w.put<std::int16_t>(72, h.bitpix);
  for (int i = 0; i < 8; ++i) w.put<float>(76 + 4 * i, h.pixdim[i]);
  w.put<float>(108, h.vox_offset);
  w.put<float>(112, h.scl_slope);
  w.put<float>(116, h.scl_inter);
  b[123] = h.xyzt_units;
  w.put<float>(124, h.cal_max);
  w.put<float>(128, h.cal_min);
  std::memcpy(b.data() + 148, h.descrip.data(), 80);
  w.put<std::int16_t>(252, h.qform_code);
  w.put<std::int16_t>(254, h.sform_code);
  w.put<float>(256, h.quatern_b);
  w.put<float>(260, h.quatern_c);
  w.put<float>(264, h.quatern_d);
  w.put<float>(268, h.qoffset_x);
  w.put<float>(272, h.qoffset_y);
  w.put<float>(276, h.qoffset_z);
  for (int i = 0; i < 4; ++i) {
    w.put<float>(280 + 4 * i, h.srow_x[i]);
    w.put<float>(296 + 4 * i, h.srow_y[i]);
    w.put<float>(312 + 4 * i, h.srow_z[i]);
  }
  std::memcpy(b.data() + 344, h.magic.data(), 4);
  return b;
}

/// NIfTI-1 quaternion expansion (method 2).
inline Eigen::Matrix4d qform_matrix(const Header& h) {
  const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
  double a = 1.0 - (b * b + c * c + d * d);
  a = a < 1e-7 ? 0.0 : std::sqrt(a);
  const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;  // 0 counts as +1
  Eigen::Matrix3d r;
  r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
  const Eigen::Vector3d scale(h.pixdim[1], h.pixdim[2], qfac * h.pixdim[3]);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r * scale.asDiagonal();
  m(0, 3) = h.qoffset_x;
  m(1, 3) = h.qoffset_y;
  m(2, 3) = h.qoffset_z;
  return m;
}

inline Eigen::Matrix4d header_affine(const Header& h) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  if (h.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      m(0, c) = h.srow_x[c];
      m(1, c) = h.srow_y[c];
      m(2, c) = h.srow_z[c];
    }
  } else if (h.qform_code > 0) {
    m = qform_matrix(h);
  } else {
    for (int a = 0; a < 3; ++a) m(a, a) = h.pixdim[a + 1];
  }
  return m;
}

inline Geometry header_geometry(const Header& h) {
  if (h.dim[0] < 3 || h.dim[0] > 7)
    throw Error(ErrorCode::HeaderInconsistent, "dim[0] = " + std::to_string(h.dim[0]));
  for (int a = 1; a <= 3; ++a)
    if (h.dim[a] < 1) throw Error(ErrorCode::HeaderInconsistent, "dim[1..3] must be >= 1");
  for (int a = 4; a <= h.dim[0]; ++a)
    if (h.dim[a] > 1)
      throw Error(ErrorCode::HeaderInconsistent,
                  "non-singleton dim[" + std::to_string(a) + "]; only 3D volumes are supported");
  Geometry g;
  g.dims = {static_cast<std::size_t>(h.dim[1]), static_cast<std::size_t>(h.dim[2]),
            static_cast<std::size_t>(h.dim[3])};
  for (int a = 0; a < 3; ++a) g.spacing[a] = std::abs(static_cast<double>(h.pixdim[a + 1]));
  g.affine = header_affine(h);
  g.validate();
  return g;
}

template <typename Raw>
void decode_voxels(std::span<const std::uint8_t> data, bool swap, double slope, double inter,
                   std::vector<double>& out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    Raw v;
    std::memcpy(&v, data.data() + i * sizeof(Raw), sizeof(Raw));
    if (swap) v = byteswap_value(v);
    const double x = static_cast<double>(v);
    out[i] = slope != 0.0 ? x * slope + inter : x;
  }
}

inline VoxelGrid decode_image(const Header& h, bool swapped, std::span<const std::uint8_t> data) {
  if (!is_supported_datatype(h.datatype))
    throw Error(ErrorCode::UnsupportedDatatype, std::to_string(h.datatype));
  if (h.bitpix != bitpix_for(h.datatype))
    throw Error(ErrorCode::HeaderInconsistent, "bitpix " + std::to_string(h.bitpix) +
                                                   " does not match datatype " +
                                                   std::to_string(h.datatype));
  VoxelGrid grid(header_geometry(h));
  const std::size_t need = grid.size() * static_cast<std::size_t>(h.bitpix / 8);
  if (data.size() < need)
    throw Error(ErrorCode::TruncatedData, "need " + std::to_string(need) + " data bytes, have " +
                                              std::to_string(data.size()));
  const double slope = std::isfinite(h.scl_slope) ? h.scl_slope : 0.0;
  const double inter = std::isfinite(h.scl_inter) ? h.scl_inter : 0.0;
  switch (h.datatype) {
    case kUint8: decode_voxels<std::uint8_t>(data, swapped, slope, inter, grid.data); break;
    case kInt16: decode_voxels<std::int16_t>(data, swapped, slope, inter, grid.data); break;
    case kUint16: decode_voxels<std::uint16_t>(data, swapped, slope, inter, grid.data); break;
    case kInt32: decode_voxels<std::int32_t>(data, swapped, slope, inter, grid.data); break;
    case kFloat32: decode_voxels<float>(data, swapped, slope, inter, grid.data); break;
    case kFloat64: decode_voxels<double>(data, swapped, slope, inter, grid.data); break;
  }
  return grid;
}

template <typename Raw>
void encode_voxels(const std::vector<double>& in, bool quantize, bool swap, std::uint8_t* dst) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    double x = in[i];
    Raw v;
    if constexpr (std::is_integral_v<Raw>) {
      constexpr double lo = static_cast<double>(std::numeric_limits<Raw>::min());
      constexpr double hi = static_cast<double>(std::numeric_limits<Raw>::max());
      if (quantize) {
        x = std::clamp(std::nearbyint(x), lo, hi);
      } else if (!(x >= lo && x <= hi) || std::nearbyint(x) != x) {
        throw Error(ErrorCode::LossyConversion,
                    "voxel " + std::to_string(i) + " value " + std::to_string(x) +
                        " is not representable; request quantization explicitly");
      }
      v = static_cast<Raw>(x);
    } else {
      v = static_cast<Raw>(x);
    }
    if (swap) v = byteswap_value(v);
    std::memcpy(dst + i * sizeof(Raw), &v, sizeof(Raw));
  }
}

}  // namespace detail

/// Decode a single-file NIfTI-1 stream. Gzip input is detected by its
/// 0x1F 0x8B prefix and inflated first.
inline Image read(std::span<const std::uint8_t> bytes) {
  Bytes inflated;
  if (detail::is_gzip(bytes)) {
    inflated = detail::gunzip(bytes);
    bytes = inflated;
  }
  if (bytes.size() < static_cast<std::size_t>(kSingleFileOffset))
    throw Error(ErrorCode::TruncatedData, "stream shorter than 352 bytes");
  bool swapped = false;
  Image img;
  img.header = detail::parse_header(bytes, swapped);
  const auto& m = img.header.magic;
  if (std::memcmp(m.data(), "n+1\0", 4) != 0) {
    if (std::memcmp(m.data(), "ni1\0", 4) == 0)
      throw Error(ErrorCode::BadMagic, "header/image pair (ni1) needs the separate image file");
    throw Error(ErrorCode::BadMagic, "magic is not n+1");
  }
  const double off = img.header.vox_offset;
  if (!(off >= kSingleFileOffset) || off != std::floor(off))
    throw Error(ErrorCode::HeaderInconsistent, "vox_offset must be an integer >= 352");
  const auto offset = static_cast<std::size_t>(off);
  if (offset > bytes.size()) throw Error(ErrorCode::TruncatedData, "vox_offset past end of stream");
  img.extensions.assign(bytes.begin() + kHeaderSize, bytes.begin() + offset);
  img.grid = detail::decode_image(img.header, swapped, bytes.subspan(offset));
  return img;
}

/// Decode a header/image pair ("ni1"); `vox_offset` is applied to the image stream.
inline Image read_pair(std::span<const std::uint8_t> hdr, std::span<const std::uint8_t> img_bytes) {
  Bytes h_inflated, i_inflated;
  if (detail::is_gzip(hdr)) hdr = h_inflated = detail::gunzip(hdr);
  if (detail::is_gzip(img_bytes)) img_bytes = i_inflated = detail::gunzip(img_bytes);
  bool swapped = false;
  Image img;
  img.header = detail::parse_header(hdr, swapped);
  if (std::memcmp(img.header.magic.data(), "ni1\0", 4) != 0)
    throw Error(ErrorCode::BadMagic, "magic is not ni1");
  const auto offset = static_cast<std::size_t>(std::max(0.0f, img.header.vox_offset));
  if (offset > img_bytes.size()) throw Error(ErrorCode::TruncatedData, "vox_offset past end");
  img.grid = detail::decode_image(img.header, swapped, img_bytes.subspan(offset));
  return img;
}

/// Header that `write` emits for `grid`.
inline Header make_header(const VoxelGrid& grid, int datatype) {
  if (!is_supported_datatype(datatype))
    throw Error(ErrorCode::UnsupportedDatatype, std::to_string(datatype));
  grid.geometry.validate();
  if (grid.data.size() != grid.geometry.voxel_count())
    throw Error(ErrorCode::HeaderInconsistent, "data length does not match dims");
  Header h;
  const auto& g = grid.geometry;
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
      throw Error(ErrorCode::HeaderInconsistent, "dimension too large for NIfTI-1");
    h.dim[a + 1] = static_cast<std::int16_t>(g.dims[a]);
    h.pixdim[a + 1] = static_cast<float>(g.spacing[a]);
  }
  h.dim[0] = 3;
  h.datatype = static_cast<std::int16_t>(datatype);
  h.bitpix = static_cast<std::int16_t>(bitpix_for(datatype));
  h.sform_code = 1;
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(g.affine(0, c));
    h.srow_y[c] = static_cast<float>(g.affine(1, c));
    h.srow_z[c] = static_cast<float>(g.affine(2, c));
  }
  return h;
}

inline Bytes write(const VoxelGrid& grid, int datatype, bool gz, const WriteOptions& opt = {}) {
  Header h = make_header(grid, datatype);
  if (!opt.extensions.empty() && opt.extensions.size() < 4)
    throw Error(ErrorCode::HeaderInconsistent, "extension block must start with 4-byte flag");
  const std::size_t ext = opt.extensions.empty() ? 4 : opt.extensions.size();
  h.vox_offset = static_cast<float>(kHeaderSize + ext);
  const bool swap = opt.big_endian == detail::host_is_little();
  Bytes out = detail::serialize_header(h, opt.big_endian);
  if (opt.extensions.empty())
    out.insert(out.end(), 4, 0);
  else
    out.insert(out.end(), opt.extensions.begin(), opt.extensions.end());
  const std::size_t start = out.size();
  out.resize(start + grid.size() * static_cast<std::size_t>(h.bitpix / 8));
  std::uint8_t* dst = out.data() + start;
  switch (datatype) {
    case kUint8: detail::encode_voxels<std::uint8_t>(grid.data, opt.quantize, swap, dst); break;
    case kInt16: detail::encode_voxels<std::int16_t>(grid.data, opt.quantize, swap, dst); break;
    case kUint16: detail::encode_voxels<std::uint16_t>(grid.data, opt.quantize, swap, dst); break;
    case kInt32: detail::encode_voxels<std::int32_t>(grid.data, opt.quantize, swap, dst); break;
    case kFloat32: detail::encode_voxels<float>(grid.data, opt.quantize, swap, dst); break;
    case kFloat64: detail::encode_voxels<double>(grid.data, opt.quantize, swap, dst); break;
  }
  return gz ? detail::gzip(out) : out;
}

inline constexpr double kLabelTolerance = 1e-6;

inline LabelVolume to_labels(const VoxelGrid& grid) {
  LabelVolume lv(grid.geometry);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = grid.data[i];
    const double r = std::nearbyint(v);
    if (!std::isfinite(v) || std::abs(v - r) > kLabelTolerance)
      throw Error(ErrorCode::NonIntegerLabels, "voxel " + std::to_string(i) + " = " +
                                                   std::to_string(v));
    if (r < 0 || r > kMaxLabel)
      throw Error(ErrorCode::LabelOutOfRange, std::to_string(static_cast<long long>(r)));
    lv.data[i] = static_cast<std::uint8_t>(r);
  }
  return lv;
}

/// Decode a canonical {0,1,2,3} label map. Float-stored labels are accepted
/// within 1e-6 of an integer.
inline LabelVolume read_labels(std::span<const std::uint8_t> bytes) {
  return to_labels(read(bytes).grid);
}

template <typename T>
VoxelGrid to_grid(const Volume<T>& v) {
  VoxelGrid g(v.geometry);
  std::transform(v.data.begin(), v.data.end(), g.data.begin(),
                 [](T x) { return static_cast<double>(x); });
  return g;
}

inline Bytes write_labels(const LabelVolume& lv, bool gz) { return write(to_grid(lv), kUint8, gz); }

// ---- file helpers ----

inline Bytes read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + p.string());
}

inline bool has_gz_suffix(const std::filesystem::path& p) { return p.extension() == ".gz"; }

inline Image read_image_file(const std::filesystem::path& p) {
  const Bytes b = read_file(p);
  const std::string name = p.filename().string();
  const bool is_hdr = name.ends_with(".hdr") || name.ends_with(".hdr.gz");
  if (!is_hdr) return read(b);
  std::filesystem::path img = p;
  const bool gz = has_gz_suffix(p);
  if (gz) img.replace_extension();  // drop .gz
  img.replace_extension(".img");
  if (gz && !std::filesystem::exists(img)) img += ".gz";
  return read_pair(b, read_file(img));
}

inline VoxelGrid read_file_grid(const std::filesystem::path& p) { return read_image_file(p).grid; }

inline LabelVolume read_label_file(const std::filesystem::path& p) {
  return to_labels(read_image_file(p).grid);
}

inline void write_grid_file(const std::filesystem::path& p, const VoxelGrid& g,
                            int datatype = kFloat32) {
  write_file(p, write(g, datatype, has_gz_suffix(p)));
}

inline void write_label_file(const std::filesystem::path& p, const LabelVolume& lv) {
  write_file(p, write_labels(lv, has_gz_suffix(p)));
}

}  // namespace postop::nifti
