#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psd/image.hpp"
#include "psd/metrics.hpp"

namespace psd {

/// How raw samples were mapped into [0, 1]: normalized = (raw - offset) / scale.
struct Normalization {
  double offset = 0.0;
  double scale = 1.0;
};

struct LoadedImage {
  Image image;
  Normalization normalization;
  int bit_depth = 8;  // 8, 16, or 32 (float)
};

// PGM (P2/P5, 8 or 16 bit), PNG (8 or 16 bit grayscale) and PFM ("Pf",
// single-band float). Integer formats divide by the format maximum. Float
// rasters already inside [0, 1] load unchanged; otherwise they are min-max
// normalized and the mapping is recorded.
LoadedImage load_image_with_info(const std::filesystem::path& path);
Image load_image(const std::filesystem::path& path);
// PFM read without any normalization (inverse of a kRawFloat export).
Image load_raw_float(const std::filesystem::path& path);

// kRawFloat writes an unclamped PFM, used for intermediate products (speckled
// corpora, pair sets) whose values legitimately exceed 1.
enum class ExportDepth { k8, k16, kFloat, kRawFloat };
ExportDepth parse_export_depth(const std::string& text);

// Clamps to [0, 1]. Integer depths quantise with round-half-up
// (code = floor(v * max + 0.5)). Extension picks the container: .pgm, .png
// or .pfm (float only).
void export_image(const Image& image, const std::filesystem::path& path, ExportDepth depth);

// Regular grid of size x size patches; partial edge patches are dropped.
std::vector<Image> crop_patches(const Image& image, int size, int stride);

struct DatasetItem {
  std::string id;
  Image image;
  std::string source;  // path or synthesis recipe
  std::uint64_t seed = 0;
  std::vector<Region> regions;
};

struct Dataset {
  std::vector<DatasetItem> items;
  std::vector<Image> images() const;
};

enum class Recipe { kPiecewiseConstant, kGradient, kShapes };
Recipe parse_recipe(const std::string& name);
std::string_view recipe_name(Recipe recipe);

inline constexpr int kMinSynthSize = 64;

// Deterministic clean images in [0, 1] with at least one 32x32 flat region,
// straight edges, and (shapes) single-pixel bright point targets. Each item
// carries its region list.
Dataset synthesize_corpus(Recipe recipe, int count, int size, std::uint64_t seed);
DatasetItem synthesize_image(Recipe recipe, int size, std::uint64_t seed, std::string id);

// Directory layout: <dir>/manifest.json plus one file per item.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir, ExportDepth depth,
                   const std::string& normalization_note);
// Reads manifest.json when present, else every supported image file sorted by name.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace psd
