#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "psd/data_io.hpp"
#include "psd/error.hpp"
#include "psd/random.hpp"

using namespace psd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "psd_test_data_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  os << bytes;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// Hand-assembled 2x2 PNG files (zlib + CRC computed offline).
const unsigned char kGrayPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x00, 0x00, 0x00, 0x00, 0x57, 0xdd, 0x52, 0xf8, 0x00, 0x00, 0x00,
    0x0e, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60, 0x68, 0x60, 0xf8, 0xef, 0x00, 0x00, 0x04, 0x44, 0x01,
    0xc0, 0xea, 0x6a, 0xe1, 0xdf, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
const unsigned char kRgbPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00,
    0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x02, 0x00, 0x00, 0x00, 0xfd, 0xd4, 0x9a, 0x73, 0x00,
    0x00, 0x00, 0x13, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x38, 0x91, 0x62, 0x04, 0x44, 0x0c, 0x5c,
    0x22, 0x72, 0x40, 0x04, 0x00, 0x1f, 0x6c, 0x03, 0x35, 0xe8, 0x0f, 0xa7, 0x08, 0x00, 0x00, 0x00, 0x00,
    0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

std::vector<float> values(const Image& img) { return {img.pixels().begin(), img.pixels().end()}; }

Image random_image(int w, int h, std::uint64_t seed) {
  Philox rng(seed);
  std::vector<float> px(static_cast<std::size_t>(w) * h);
  for (float& v : px) v = static_cast<float>(rng.uniform());
  return Image(w, h, px);
}

}  // namespace

TEST(LoadImage, EightBitBinaryPgm) {
  const fs::path p = scratch("c128.pgm");
  write_bytes(p, "P5\n3 2\n255\n" + std::string(6, static_cast<char>(128)));
  const auto loaded = load_image_with_info(p);
  EXPECT_EQ(loaded.bit_depth, 8);
  EXPECT_EQ(loaded.image.width(), 3);
  for (float v : loaded.image.pixels()) EXPECT_NEAR(v, 128.0 / 255.0, 1e-7);
}

TEST(LoadImage, SixteenBitPgmBigEndian) {
  const fs::path p = scratch("c65535.pgm");
  write_bytes(p, "P5 2 2 65535\n" + std::string(8, static_cast<char>(0xff)));
  const Image full = load_image(p);
  for (float v : full.pixels()) EXPECT_EQ(v, 1.0f);
  write_bytes(p, std::string("P5\n1 1\n65535\n") + '\x01' + '\x00');
  EXPECT_NEAR(load_image(p).pixels()[0], 256.0 / 65535.0, 1e-9);
}

TEST(LoadImage, AsciiPgmWithComment) {
  const fs::path p = scratch("ascii.pgm");
  write_bytes(p, "P2\n# a comment\n2 1\n15\n0 15\n");
  const Image img = load_image(p);
  EXPECT_EQ(img.pixels()[0], 0.0f);
  EXPECT_EQ(img.pixels()[1], 1.0f);
}

TEST(LoadImage, GrayPng) {
  const fs::path p = scratch("gray.png");
  write_bytes(p, std::string(reinterpret_cast<const char*>(kGrayPng), sizeof(kGrayPng)));
  const Image img = load_image(p);
  EXPECT_EQ(img.at(0, 0), 0.0f);
  EXPECT_NEAR(img.at(1, 0), 128.0 / 255.0, 1e-7);
  EXPECT_EQ(img.at(0, 1), 1.0f);
  EXPECT_NEAR(img.at(1, 1), 64.0 / 255.0, 1e-7);
}

TEST(LoadImage, MultiChannelRejected) {
  const fs::path ppm = scratch("rgb.ppm");
  write_bytes(ppm, "P6\n1 1\n255\nabc");
  EXPECT_THROW(load_image(ppm), ShapeError);
  const fs::path png = scratch("rgb.png");
  write_bytes(png, std::string(reinterpret_cast<const char*>(kRgbPng), sizeof(kRgbPng)));
  EXPECT_THROW(load_image(png), ShapeError);
  const fs::path pfm = scratch("rgb.pfm");
  write_bytes(pfm, "PF\n1 1\n-1.0\n" + std::string(12, '\0'));
  EXPECT_THROW(load_image(pfm), ShapeError);
}

TEST(LoadImage, CorruptAndMissingFiles) {
  const fs::path p = scratch("short.pgm");
  write_bytes(p, "P5\n4 4\n255\nab");
  EXPECT_THROW(load_image(p), CorruptFile);
  const fs::path junk = scratch("junk.png");
  write_bytes(junk, "\x89PNG\r\n\x1a\nnot really");
  EXPECT_THROW(load_image(junk), CorruptFile);
  EXPECT_THROW(load_image(scratch("absent.pgm")), IoError);
}

TEST(LoadImage, FloatOutsideUnitRangeIsMinMaxNormalized) {
  const Image raw(2, 1, std::vector<float>{2.0f, 6.0f});
  const fs::path p = scratch("wide.pfm");
  export_image(raw, p, ExportDepth::kRawFloat);
  const auto loaded = load_image_with_info(p);
  EXPECT_EQ(loaded.image.pixels()[0], 0.0f);
  EXPECT_EQ(loaded.image.pixels()[1], 1.0f);
  EXPECT_EQ(loaded.normalization.offset, 2.0);
  EXPECT_EQ(loaded.normalization.scale, 4.0);
  EXPECT_EQ(values(load_raw_float(p)), values(raw));
}

TEST(ExportImage, FloatRoundTripIsBitIdentical) {
  const Image img = random_image(17, 9, 3);
  const fs::path p = scratch("roundtrip.pfm");
  export_image(img, p, ExportDepth::kFloat);
  const Image back = load_image(p);
  ASSERT_TRUE(back.same_shape(img));
  EXPECT_EQ(0, std::memcmp(back.pixels().data(), img.pixels().data(), img.size() * sizeof(float)));
}

TEST(ExportImage, EightBitRoundHalfUpAndClamp) {
  const fs::path p = scratch("q.pgm");
  export_image(Image(3, 1, std::vector<float>{0.5f, 1.2f, -0.3f}), p, ExportDepth::k8);
  const std::string bytes = read_bytes(p);
  ASSERT_GE(bytes.size(), 3u);
  const std::string px = bytes.substr(bytes.size() - 3);
  EXPECT_EQ(static_cast<unsigned char>(px[0]), 128);
  EXPECT_EQ(static_cast<unsigned char>(px[1]), 255);
  EXPECT_EQ(static_cast<unsigned char>(px[2]), 0);
}

TEST(ExportImage, PngEightAndSixteenBitRoundTrip) {
  const Image img = random_image(13, 7, 4);
  const fs::path p8 = scratch("r8.png"), p16 = scratch("r16.png");
  export_image(img, p8, ExportDepth::k8);
  export_image(img, p16, ExportDepth::k16);
  const auto l8 = load_image_with_info(p8), l16 = load_image_with_info(p16);
  EXPECT_EQ(l8.bit_depth, 8);
  EXPECT_EQ(l16.bit_depth, 16);
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_NEAR(l8.image.pixels()[i], img.pixels()[i], 0.5 / 255 + 1e-7);
    EXPECT_NEAR(l16.image.pixels()[i], img.pixels()[i], 0.5 / 65535 + 1e-7);
  }
}

TEST(ExportImage, SixteenBitPgmQuantisation) {
  const fs::path p = scratch("q16.pgm");
  export_image(Image(1, 1, 0.5f), p, ExportDepth::k16);
  const std::string bytes = read_bytes(p);
  // 0.5 * 65535 = 32767.5 -> 32768 = 0x8000, big endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 2]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 1]), 0x00);
}

TEST(ExportImage, BadDepthAndExtension) {
  EXPECT_THROW(parse_export_depth("12"), InvalidArgument);
  EXPECT_EQ(parse_export_depth("16"), ExportDepth::k16);
  EXPECT_THROW(export_image(Image(2, 2), scratch("x.pgm"), ExportDepth::kFloat), InvalidArgument);
  EXPECT_THROW(export_image(Image(2, 2), scratch("x.tif"), ExportDepth::k8), InvalidArgument);
  EXPECT_THROW(export_image(Image(2, 2), "/nonexistent/dir/x.pgm", ExportDepth::k8), IoError);
}

TEST(CropPatches, GridCounts) {
  EXPECT_EQ(crop_patches(Image(192, 192), 96, 96).size(), 4u);
  EXPECT_EQ(crop_patches(Image(96, 96), 96, 96).size(), 1u);
  EXPECT_EQ(crop_patches(Image(200, 96), 96, 96).size(), 2u);
  EXPECT_EQ(crop_patches(Image(96, 96), 32, 16).size(), 25u);
  EXPECT_THROW(crop_patches(Image(95, 96), 96, 96), InvalidArgument);
  EXPECT_THROW(crop_patches(Image(96, 96), 32, 0), InvalidArgument);
}

TEST(CropPatches, NonOverlappingTilingCoversImage) {
  const Image img = random_image(64, 32, 5);
  const auto patches = crop_patches(img, 16, 16);
  ASSERT_EQ(patches.size(), 8u);
  for (std::size_t k = 0; k < patches.size(); ++k) {
    const int ox = static_cast<int>(k % 4) * 16, oy = static_cast<int>(k / 4) * 16;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) ASSERT_EQ(patches[k].at(x, y), img.at(ox + x, oy + y));
  }
}

TEST(Synthesis, DeterministicPerSeed) {
  for (Recipe r : {Recipe::kPiecewiseConstant, Recipe::kGradient, Recipe::kShapes}) {
    const auto a = synthesize_corpus(r, 2, 96, 3);
    const auto b = synthesize_corpus(r, 2, 96, 3);
    const auto c = synthesize_corpus(r, 2, 96, 4);
    EXPECT_EQ(values(a.items[0].image), values(b.items[0].image));
    EXPECT_EQ(a.items[1].regions, b.items[1].regions);
    EXPECT_NE(values(a.items[0].image), values(c.items[0].image));
    EXPECT_NE(values(a.items[0].image), values(a.items[1].image));
  }
}

TEST(Synthesis, EveryImageHasAFlatThirtyTwoSquare) {
  for (Recipe r : {Recipe::kPiecewiseConstant, Recipe::kGradient, Recipe::kShapes}) {
    for (int size : {64, 96, 130}) {
      for (const DatasetItem& item : synthesize_corpus(r, 6, size, 17).items) {
        bool found = false;
        for (const Region& region : item.regions) {
          if (region.kind != RegionKind::kHomogeneous || region.width < 32 || region.height < 32) continue;
          ASSERT_TRUE(region.fits(item.image));
          const float v = item.image.at(region.x, region.y);
          bool flat = true;
          for (int y = region.y; y < region.y + region.height; ++y)
            for (int x = region.x; x < region.x + region.width; ++x) flat = flat && item.image.at(x, y) == v;
          found = found || flat;
        }
        EXPECT_TRUE(found) << recipe_name(r) << " " << item.id;
        for (float v : item.image.pixels()) {
          ASSERT_GE(v, 0.0f);
          ASSERT_LE(v, 1.0f);
        }
      }
    }
  }
}

TEST(Synthesis, EdgeRegionsStraddleAStep) {
  for (Recipe r : {Recipe::kPiecewiseConstant, Recipe::kGradient, Recipe::kShapes}) {
    for (const DatasetItem& item : synthesize_corpus(r, 4, 96, 23).items) {
      const auto edge = std::find_if(item.regions.begin(), item.regions.end(),
                                     [](const Region& g) { return g.kind == RegionKind::kEdge; });
      ASSERT_NE(edge, item.regions.end());
      ASSERT_TRUE(edge->fits(item.image));
      float lo = 2.0f, hi = -1.0f;
      for (int y = edge->y; y < edge->y + edge->height; ++y)
        for (int x = edge->x; x < edge->x + edge->width; ++x) {
          lo = std::min(lo, item.image.at(x, y));
          hi = std::max(hi, item.image.at(x, y));
        }
      EXPECT_GT(hi - lo, 0.05f) << recipe_name(r) << " " << item.id;
    }
  }
}

TEST(Synthesis, ShapesPointTargetsHoldOneBrightPixel) {
  for (const DatasetItem& item : synthesize_corpus(Recipe::kShapes, 8, 96, 29).items) {
    int point_regions = 0;
    for (const Region& region : item.regions) {
      if (region.kind != RegionKind::kPointTarget) continue;
      ++point_regions;
      ASSERT_TRUE(region.fits(item.image));
      int bright = 0;
      float max_other = 0.0f;
      for (int y = region.y; y < region.y + region.height; ++y)
        for (int x = region.x; x < region.x + region.width; ++x) {
          if (item.image.at(x, y) == 1.0f)
            ++bright;
          else
            max_other = std::max(max_other, item.image.at(x, y));
        }
      EXPECT_EQ(bright, 1) << item.id << " " << region.name;
      EXPECT_LT(max_other, 0.8f);
    }
    EXPECT_GE(point_regions, 1);
  }
}

TEST(Synthesis, Errors) {
  EXPECT_THROW(parse_recipe("clouds"), InvalidArgument);
  EXPECT_EQ(parse_recipe("piecewise-constant"), Recipe::kPiecewiseConstant);
  EXPECT_THROW(synthesize_corpus(Recipe::kShapes, 0, 96, 1), InvalidArgument);
  EXPECT_THROW(synthesize_corpus(Recipe::kShapes, 1, kMinSynthSize - 1, 1), InvalidArgument);
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto corpus = synthesize_corpus(Recipe::kShapes, 3, 64, 31);
  const fs::path dir = scratch("dataset");
  fs::remove_all(dir);
  write_dataset(corpus, dir, ExportDepth::kFloat, "synthetic");
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.items.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.items[i].id, corpus.items[i].id);
    EXPECT_EQ(back.items[i].seed, corpus.items[i].seed);
    EXPECT_EQ(back.items[i].regions, corpus.items[i].regions);
    EXPECT_EQ(values(back.items[i].image), values(corpus.items[i].image));
  }
}

TEST(Dataset, DirectoryWithoutManifestIsSortedByName) {
  const fs::path dir = scratch("loose");
  fs::remove_all(dir);
  fs::create_directories(dir);
  export_image(Image(4, 4, 0.25f), dir / "b.pgm", ExportDepth::k8);
  export_image(Image(4, 4, 0.75f), dir / "a.png", ExportDepth::k16);
  write_bytes(dir / "notes.txt", "ignored");
  const auto ds = read_dataset(dir);
  ASSERT_EQ(ds.items.size(), 2u);
  EXPECT_EQ(ds.items[0].id, "a");
  EXPECT_EQ(ds.items[1].id, "b");
  EXPECT_THROW(read_dataset(scratch("no_such_dir")), IoError);
}
