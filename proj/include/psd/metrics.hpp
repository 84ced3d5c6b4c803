#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "psd/image.hpp"

namespace psd {

enum class RegionKind { kHomogeneous, kEdge, kPointTarget };
enum class Direction { kHorizontal, kVertical };

struct Region {
  std::string name;
  RegionKind kind = RegionKind::kHomogeneous;
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  std::optional<Direction> direction;

  bool fits(const Image& image) const noexcept;
  bool overlaps(const Region& other) const noexcept;
  friend bool operator==(const Region&, const Region&) = default;
};

/// A metric value; `saturated` marks values that hit a documented cap or a
/// degenerate denominator. `skipped_fraction` is the share of ratio terms
/// dropped for a zero denominator (EPD-ROA, MoR).
struct MetricValue {
  double value = 0.0;
  bool saturated = false;
  double skipped_fraction = 0.0;
};

inline constexpr double kPsnrCapDb = 99.0;

MetricValue psnr(const Image& reference, const Image& test, double peak = 1.0);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5, K1 0.01, K2 0.03).
double ssim(const Image& reference, const Image& test, double peak = 1.0);

// mean^2 / variance over the region; saturated if the variance is zero.
MetricValue enl(const Image& image, const Region& region);

// Sum |D(i)/D(i+1)| over adjacent pairs along `direction` in the despeckled
// region, divided by the same sum over the original.
MetricValue epd_roa(const Image& original, const Image& despeckled, const Region& region,
                    Direction direction);

// |TCR(despeckled) - TCR(original)| with TCR = 20 log10(max(target) / mean(clutter)).
MetricValue tcr_deviation(const Image& original, const Image& despeckled, const Region& target,
                          const Region& clutter);

// Mean of original / despeckled over the region, skipping despeckled <= 0.
MetricValue mor(const Image& original, const Image& despeckled, const Region& region);

std::string_view region_kind_name(RegionKind kind);

// Plain text, one region per line: `name kind x y w h [direction]`. '#' starts a comment.
std::vector<Region> read_regions(const std::filesystem::path& path);
std::vector<Region> parse_regions(const std::string& text);
void write_regions(const std::filesystem::path& path, const std::vector<Region>& regions);

struct MetricEntry {
  std::string metric;
  std::vector<std::string> regions;
  MetricValue result;
};

struct MetricReport {
  std::string reference_id;  // clean or original image
  std::string test_id;       // despeckled image
  std::vector<MetricEntry> entries;

  const MetricEntry* find(const std::string& metric, const std::string& region = {}) const;
  std::string to_json() const;
};

// PSNR + SSIM block.
MetricReport full_reference_report(const Image& clean, const Image& despeckled, std::string clean_id,
                                   std::string despeckled_id, double peak = 1.0);

// ENL (homogeneous regions, on the despeckled image; original ENL is also
// reported), MoR (homogeneous), EPD-ROA (edge regions, per direction tag or
// both directions), TCR deviation (each point target against the first
// homogeneous region that does not overlap it).
MetricReport no_reference_report(const Image& original, const Image& despeckled,
                                 const std::vector<Region>& regions, std::string original_id,
                                 std::string despeckled_id);

}  // namespace psd
