#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "support.hpp"

using namespace postop;
namespace nf = postop::nifti;

namespace {

VoxelGrid ramp_grid(const Index3& dims, const Vec3& spacing = {1, 1, 1}) {
  VoxelGrid g(Geometry::axis_aligned(dims, spacing));
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = static_cast<double>(i % 251);
  return g;
}

nf::Bytes with_data(const nf::Header& h, const nf::Bytes& voxels, bool big_endian = false) {
  nf::Bytes out = nf::detail::serialize_header(h, big_endian);
  out.insert(out.end(), 4, 0);
  out.insert(out.end(), voxels.begin(), voxels.end());
  return out;
}

template <typename T>
nf::Bytes raw_bytes(const std::vector<T>& v) {
  nf::Bytes b(v.size() * sizeof(T));
  std::memcpy(b.data(), v.data(), b.size());
  return b;
}

}  // namespace

TEST(Nifti, ZeroGridByteLayout) {
  VoxelGrid g(Geometry::axis_aligned({2, 2, 2}, {1, 1, 1}), 0.0);
  const auto bytes = nf::write(g, nf::kFloat32, false);
  ASSERT_EQ(bytes.size(), 352u + 32u);
  EXPECT_TRUE(std::all_of(bytes.begin() + 352, bytes.end(), [](std::uint8_t b) { return b == 0; }));
  const auto img = nf::read(bytes);
  EXPECT_EQ(img.header.vox_offset, 352.0f);
  EXPECT_EQ(img.header.sform_code, 1);
  EXPECT_EQ(std::memcmp(img.header.magic.data(), "n+1\0", 4), 0);
}

TEST(Nifti, AtlasSizedFloatRoundTrip) {
  VoxelGrid g(Geometry::axis_aligned({240, 240, 155}, {1, 1, 1}));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-100.f, 100.f);
  for (auto& v : g.data) v = u(rng);
  const auto back = nf::read(nf::write(g, nf::kFloat32, false)).grid;
  EXPECT_EQ(back.geometry.dims, (Index3{240, 240, 155}));
  EXPECT_EQ(back.geometry.spacing, g.geometry.spacing);
  EXPECT_EQ(back.geometry.affine, g.geometry.affine);
  EXPECT_TRUE(back.data == g.data);
}

TEST(Nifti, RoundTripEveryDatatype) {
  for (int dt : {nf::kUint8, nf::kInt16, nf::kInt32, nf::kFloat32, nf::kFloat64, nf::kUint16})
    for (bool gz : {false, true}) {
      const auto g = ramp_grid({5, 4, 3}, {0.5, 1.25, 2.0});
      const auto back = nf::read(nf::write(g, dt, gz)).grid;
      EXPECT_EQ(back, g) << "datatype " << dt << " gz " << gz;
    }
}

TEST(Nifti, GzipInflatesToPlainStream) {
  const auto g = ramp_grid({7, 6, 5});
  const auto plain = nf::write(g, nf::kInt16, false);
  const auto packed = nf::write(g, nf::kInt16, true);
  ASSERT_EQ(packed[0], 0x1F);
  ASSERT_EQ(packed[1], 0x8B);
  EXPECT_EQ(nf::detail::gunzip(packed), plain);
  EXPECT_EQ(nf::write(g, nf::kInt16, true), packed);  // deterministic
}

TEST(Nifti, SlopeAndIntercept) {
  nf::Header h;
  h.dim = {3, 2, 2, 2, 1, 1, 1, 1};
  h.datatype = nf::kInt16;
  h.bitpix = 16;
  h.scl_slope = 2.0f;
  h.scl_inter = 1.0f;
  const auto img = nf::read(with_data(h, raw_bytes(std::vector<std::int16_t>(8, 5))));
  for (double v : img.grid.data) EXPECT_EQ(v, 11.0);
}

TEST(Nifti, SformWinsOverQform) {
  nf::Header h;
  h.dim = {3, 2, 2, 2, 1, 1, 1, 1};
  h.datatype = nf::kUint8;
  h.bitpix = 8;
  h.pixdim = {1, 1, 1, 1, 1, 1, 1, 1};
  h.qform_code = 1;
  h.quatern_d = 1.0f;  // 180 degrees about z
  h.qoffset_x = 10;
  h.sform_code = 2;
  h.srow_x = {2, 0, 0, -5};
  h.srow_y = {0, 3, 0, 6};
  h.srow_z = {0, 0, 4, 7};
  const auto bytes = with_data(h, nf::Bytes(8, 1));
  Eigen::Matrix4d expect;
  expect << 2, 0, 0, -5, 0, 3, 0, 6, 0, 0, 4, 7, 0, 0, 0, 1;
  EXPECT_EQ(nf::read(bytes).grid.geometry.affine, expect);

  h.sform_code = 0;
  const auto q = nf::read(with_data(h, nf::Bytes(8, 1))).grid.geometry.affine;
  Eigen::Matrix4d qexpect;
  qexpect << -1, 0, 0, 10, 0, -1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_TRUE(q.isApprox(qexpect, 1e-12)) << q;

  h.qform_code = 0;
  h.pixdim = {1, 1.5, 2.5, 3.5, 1, 1, 1, 1};
  const auto d = nf::read(with_data(h, nf::Bytes(8, 1))).grid.geometry.affine;
  EXPECT_EQ(d.diagonal(), Eigen::Vector4d(1.5, 2.5, 3.5, 1));
}

TEST(Nifti, QfacZeroCountsAsPositive) {
  nf::Header h;
  h.dim = {3, 1, 1, 1, 1, 1, 1, 1};
  h.datatype = nf::kUint8;
  h.bitpix = 8;
  h.qform_code = 1;
  h.pixdim = {0, 1, 1, 2, 1, 1, 1, 1};
  EXPECT_EQ(nf::detail::qform_matrix(h)(2, 2), 2.0);
  h.pixdim[0] = -1;
  EXPECT_EQ(nf::detail::qform_matrix(h)(2, 2), -2.0);
}

TEST(Nifti, ByteSwappedHeaderMatchesNative) {
  const auto g = ramp_grid({4, 3, 2}, {1.5, 2, 3});
  for (int dt : {nf::kInt16, nf::kFloat64, nf::kUint16}) {
    nf::WriteOptions be;
    be.big_endian = true;
    const auto big = nf::write(g, dt, false, be);
    const auto little = nf::write(g, dt, false);
    EXPECT_NE(big, little);
    const auto a = nf::read(big), b = nf::read(little);
    EXPECT_EQ(a.header, b.header);
    EXPECT_EQ(a.grid, b.grid);
  }
}

TEST(Nifti, SingletonTimeAxisIsSqueezed) {
  nf::Header h;
  h.dim = {4, 240, 240, 155, 1, 1, 1, 1};
  h.datatype = nf::kUint8;
  h.bitpix = 8;
  const auto img = nf::read(with_data(h, nf::Bytes(240u * 240u * 155u, 0)));
  EXPECT_EQ(img.grid.geometry.dims, (Index3{240, 240, 155}));

  h.dim = {4, 2, 2, 2, 3, 1, 1, 1};
  try {
    nf::read(with_data(h, nf::Bytes(24, 0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HeaderInconsistent);
  }
}

TEST(Nifti, ErrorContracts) {
  const auto good = nf::write(ramp_grid({2, 2, 2}), nf::kUint8, false);
  const auto code_of = [](const nf::Bytes& b) {
    try {
      nf::read(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;  // sentinel: no error
  };
  auto bad_magic = good;
  bad_magic[344] = 'x';
  EXPECT_EQ(code_of(bad_magic), ErrorCode::BadMagic);

  auto truncated = good;
  truncated.resize(355);
  EXPECT_EQ(code_of(truncated), ErrorCode::TruncatedData);
  EXPECT_EQ(code_of(nf::Bytes(100, 0)), ErrorCode::TruncatedData);

  auto bad_dt = good;
  const std::int16_t dt = 128;  // RGB24
  std::memcpy(bad_dt.data() + 70, &dt, 2);
  EXPECT_EQ(code_of(bad_dt), ErrorCode::UnsupportedDatatype);

  auto bad_bitpix = good;
  const std::int16_t bp = 16;
  std::memcpy(bad_bitpix.data() + 72, &bp, 2);
  EXPECT_EQ(code_of(bad_bitpix), ErrorCode::HeaderInconsistent);

  auto bad_size = good;
  const std::int32_t sz = 540;
  std::memcpy(bad_size.data(), &sz, 4);
  EXPECT_EQ(code_of(bad_size), ErrorCode::HeaderInconsistent);

  try {
    nf::write(ramp_grid({2, 2, 2}), 128, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedDatatype);
  }
}

TEST(Nifti, LossyConversionNeedsQuantize) {
  auto g = ramp_grid({2, 2, 2});
  g.data[3] = 1.5;
  try {
    nf::write(g, nf::kInt16, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LossyConversion);
  }
  g.data[3] = 300;
  EXPECT_THROW(nf::write(g, nf::kUint8, false), Error);
  nf::WriteOptions q;
  q.quantize = true;
  g.data[3] = 2.6;
  EXPECT_EQ(nf::read(nf::write(g, nf::kUint8, false, q)).grid.data[3], 3.0);
}

TEST(Nifti, LabelVolumes) {
  LabelVolume lv(Geometry::axis_aligned({3, 3, 3}, {1, 1, 1}), 0);
  lv.data[4] = 1;
  const auto back = nf::read_labels(nf::write_labels(lv, true));
  EXPECT_EQ(back, lv);
  EXPECT_EQ(count_nonzero(back), 1u);

  VoxelGrid g(lv.geometry, 0.0);
  g.data[0] = 4;
  try {
    nf::to_labels(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelOutOfRange);
    EXPECT_NE(std::string(e.what()).find('4'), std::string::npos);
  }
  g.data[0] = 2.0000001;
  EXPECT_EQ(nf::to_labels(g).data[0], 2);
  // Survives a float32 file round trip too.
  EXPECT_EQ(nf::read_labels(nf::write(g, nf::kFloat32, false)).data[0], 2);
  g.data[0] = 1.4;
  try {
    nf::to_labels(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonIntegerLabels);
  }
}

TEST(Nifti, ExtensionsPreserved) {
  nf::WriteOptions opt;
  opt.extensions = {1, 0, 0, 0, 16, 0, 0, 0, 6, 0, 0, 0, 'a', 'b', 'c', 'd'};
  const auto g = ramp_grid({2, 2, 2});
  const auto img = nf::read(nf::write(g, nf::kUint8, false, opt));
  EXPECT_EQ(img.header.vox_offset, 364.0f);
  EXPECT_EQ(img.extensions, opt.extensions);
  EXPECT_EQ(img.grid, g);
}

TEST(Nifti, FilesAndHeaderImagePairs) {
  fixtures::TempDir dir("nifti");
  const auto g = ramp_grid({4, 4, 4}, {1, 2, 3});
  nf::write_grid_file(dir / "a.nii.gz", g);
  nf::write_grid_file(dir / "a.nii", g);
  EXPECT_EQ(nf::read_file_grid(dir / "a.nii.gz"), g);
  EXPECT_EQ(nf::read_file_grid(dir / "a.nii"), g);
  const auto raw = nf::read_file(dir / "a.nii");
  EXPECT_FALSE(nf::detail::is_gzip(raw));

  // Split the single-file stream into an ni1 pair.
  nf::Header h = nf::read(raw).header;
  h.magic = {'n', 'i', '1', '\0'};
  h.vox_offset = 0;
  nf::write_file(dir / "b.hdr", nf::detail::serialize_header(h, false));
  nf::write_file(dir / "b.img", nf::Bytes(raw.begin() + 352, raw.end()));
  EXPECT_EQ(nf::read_file_grid(dir / "b.hdr"), g);
  try {
    nf::read_file_grid(dir / "missing.nii");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}
