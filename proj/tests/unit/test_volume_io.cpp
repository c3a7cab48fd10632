#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "iwseg/vol_io.hpp"

namespace iwseg {
namespace {

using testing::TempDir;

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

void write_bytes(const std::string& path, std::size_t n, unsigned char value = 0) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t i = 0; i < n; ++i) out.put(static_cast<char>(value));
}

TEST(VolIo, LoadsZeroVolumeFromHandWrittenHeader) {
  TempDir dir;
  write(dir.file("z.volhdr"), R"({"shape":[2,2,2],"dtype":"f32","spacing_mm":[1,1,1]})");
  write_bytes(dir.file("z.volraw"), 32);
  const Volume v = load_vol(dir.file("z.volhdr"));
  ASSERT_EQ(dtype_of(v), DType::f32);
  const auto& g = std::get<Grid<float>>(v);
  EXPECT_EQ(g.shape(), (Shape{2, 2, 2}));
  for (float x : g.data()) EXPECT_EQ(x, 0.0f);
}

TEST(VolIo, RejectsPayloadOfWrongLength) {
  TempDir dir;
  write(dir.file("z.volhdr"), R"({"shape":[2,2,2],"dtype":"f32","spacing_mm":[1,1,1]})");
  write_bytes(dir.file("z.volraw"), 28);
  try {
    load_vol(dir.file("z"));
    FAIL() << "expected a size mismatch";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("size mismatch"), std::string::npos);
  }
}

TEST(VolIo, RejectsUnknownDtypeAndGarbledHeaders) {
  TempDir dir;
  write(dir.file("a.volhdr"), R"({"shape":[1,1,1],"dtype":"i32","spacing_mm":[1,1,1]})");
  write_bytes(dir.file("a.volraw"), 4);
  EXPECT_THROW(load_vol(dir.file("a")), ValidationError);

  write(dir.file("b.volhdr"), R"({"shape":[1,1],"dtype":"u8")");
  write_bytes(dir.file("b.volraw"), 1);
  EXPECT_THROW(load_vol(dir.file("b")), ValidationError);

  write(dir.file("c.volhdr"), R"({"shape":[1,0,1],"dtype":"u8","spacing_mm":[1,1,1]})");
  EXPECT_THROW(load_vol(dir.file("c")), ValidationError);

  write(dir.file("d.volhdr"), R"({"shape":[1,1,1],"dtype":"u8","spacing_mm":[1,-1,1]})");
  write_bytes(dir.file("d.volraw"), 1);
  EXPECT_THROW(load_vol(dir.file("d")), ValidationError);

  EXPECT_THROW(load_vol(dir.file("missing")), IoError);
}

TEST(VolIo, SingleU8VoxelIsOneByte) {
  TempDir dir;
  save_vol(Grid<std::uint8_t>(Shape{1, 1, 1}, {}, 7), dir.file("one"));
  const auto raw = detail::read_file(dir.file("one.volraw"));
  ASSERT_EQ(raw.size(), 1u);
  EXPECT_EQ(raw[0], 0x07);
}

TEST(VolIo, HeaderIsTheDocumentedJson) {
  TempDir dir;
  save_vol(Grid<std::int16_t>(Shape{3, 2, 1}, Spacing{2.5, 1, 0.75}), dir.file("h"));
  const auto bytes = detail::read_file(dir.file("h.volhdr"));
  const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
  EXPECT_EQ(j["shape"], nlohmann::json::parse("[3,2,1]"));
  EXPECT_EQ(j["dtype"], "i16");
  EXPECT_EQ(j["spacing_mm"], nlohmann::json::parse("[2.5,1.0,0.75]"));
}

TEST(VolIo, PreservesNanPayloadBits) {
  TempDir dir;
  Grid<float> g(Shape{1, 1, 3});
  const std::uint32_t payload = 0x7fc12345u;  // quiet NaN with a payload
  g[0] = std::bit_cast<float>(payload);
  g[1] = -0.0f;
  g[2] = std::numeric_limits<float>::infinity();
  save_vol(g, dir.file("nan"));
  const auto raw = detail::read_file(dir.file("nan.volraw"));
  std::uint32_t first;
  std::memcpy(&first, raw.data(), 4);
  EXPECT_EQ(first, payload);
  const auto back = std::get<Grid<float>>(load_vol(dir.file("nan.volhdr")));
  EXPECT_EQ(std::bit_cast<std::uint32_t>(back[0]), payload);
  EXPECT_TRUE(std::signbit(back[1]));
  save_vol(back, dir.file("nan2"));
  EXPECT_EQ(detail::read_file(dir.file("nan2.volraw")), raw);
}

template <typename T>
Grid<T> random_grid(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(1, 5);
  std::uniform_real_distribution<double> sp(0.1, 3.0);
  Grid<T> g(Shape{d(rng), d(rng), d(rng)}, Spacing{sp(rng), sp(rng), sp(rng)});
  for (auto& v : g.data()) {
    std::uint64_t bits = rng();
    std::memcpy(&v, &bits, sizeof(T));  // arbitrary bit patterns, NaNs included
  }
  return g;
}

template <typename T>
void expect_round_trip(std::mt19937_64& rng, const TempDir& dir) {
  for (int i = 0; i < 20; ++i) {
    const Grid<T> g = random_grid<T>(rng);
    save_vol(g, dir.file("rt"));
    const Volume back = load_vol(dir.file("rt"));
    ASSERT_EQ(dtype_of(back), dtype_of<T>());
    const auto& h = std::get<Grid<T>>(back);
    EXPECT_EQ(h.shape(), g.shape());
    EXPECT_EQ(h.spacing(), g.spacing());
    EXPECT_EQ(std::memcmp(h.data().data(), g.data().data(), g.size() * sizeof(T)), 0);
  }
}

TEST(VolIo, RoundTripIsBitExactForEveryDtype) {
  TempDir dir;
  std::mt19937_64 rng(11);
  expect_round_trip<std::uint8_t>(rng, dir);
  expect_round_trip<std::int16_t>(rng, dir);
  expect_round_trip<float>(rng, dir);
  expect_round_trip<double>(rng, dir);
}

TEST(VolIo, AcceptsStemOrEitherExtension) {
  EXPECT_EQ(vol_paths("a/b").header, "a/b.volhdr");
  EXPECT_EQ(vol_paths("a/b.volhdr").raw, "a/b.volraw");
  EXPECT_EQ(vol_paths("a/b.volraw").header, "a/b.volhdr");
  EXPECT_EQ(vol_paths("a/b.vol").header, "a/b.volhdr");
}

TEST(Volume, ConstructionValidatesShapeAndSpacing) {
  EXPECT_THROW(Grid<float>(Shape{0, 1, 1}), ValidationError);
  EXPECT_THROW(Grid<float>(Shape{1, 1, 1}, Spacing{1, 0, 1}), ValidationError);
  EXPECT_THROW(Grid<float>(Shape{2, 1, 1}, Spacing{}, std::vector<float>(3)), ValidationError);
}

TEST(Volume, ToMaskRejectsNonBinaryValues) {
  Grid<float> g(Shape{1, 1, 2});
  g[1] = 1.0f;
  EXPECT_EQ(to_mask(g)[1], 1);
  g[0] = 0.5f;
  EXPECT_THROW(to_mask(g), ValidationError);
}

}  // namespace
}  // namespace iwseg
