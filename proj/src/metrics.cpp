#include "psd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "psd/error.hpp"

namespace psd {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("image shapes differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                     std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

void require_region(const Region& region, const Image& image) {
  if (region.width < 2 || region.height < 2) {
    throw InvalidArgument("region '" + region.name + "' must be at least 2x2");
  }
  if (!region.fits(image)) throw InvalidArgument("region '" + region.name + "' does not fit inside the image");
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kSsimWindow);
  const int r = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - r;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable weighted sum over every valid window; output (w - 10) x (h - 10).
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

RegionKind parse_kind(const std::string& s) {
  if (s == "homogeneous") return RegionKind::kHomogeneous;
  if (s == "edge") return RegionKind::kEdge;
  if (s == "point-target" || s == "point_target") return RegionKind::kPointTarget;
  throw InvalidArgument("unknown region kind '" + s + "'");
}

Direction parse_direction(const std::string& s) {
  if (s == "horizontal") return Direction::kHorizontal;
  if (s == "vertical") return Direction::kVertical;
  throw InvalidArgument("unknown edge direction '" + s + "'");
}

std::string_view direction_name(Direction d) { return d == Direction::kHorizontal ? "horizontal" : "vertical"; }

}  // namespace

bool Region::fits(const Image& image) const noexcept {
  return x >= 0 && y >= 0 && width >= 1 && height >= 1 && x + width <= image.width() && y + height <= image.height();
}

bool Region::overlaps(const Region& o) const noexcept {
  return x < o.x + o.width && o.x < x + width && y < o.y + o.height && o.y < y + height;
}

MetricValue psnr(const Image& reference, const Image& test, double peak) {
  require_same_shape(reference, test);
  if (!(peak > 0.0)) throw InvalidArgument("psnr peak must be positive");
  double sum = 0.0;
  auto a = reference.pixels();
  auto b = test.pixels();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.size());
  if (mse == 0.0) return {kPsnrCapDb, true, 0.0};
  const double db = 10.0 * std::log10(peak * peak / mse);
  if (db >= kPsnrCapDb) return {kPsnrCapDb, true, 0.0};
  return {db, false, 0.0};
}

double ssim(const Image& reference, const Image& test, double peak) {
  require_same_shape(reference, test);
  if (reference.width() < kSsimWindow || reference.height() < kSsimWindow) {
    throw InvalidArgument("ssim needs images of at least " + std::to_string(kSsimWindow) + "x" +
                          std::to_string(kSsimWindow));
  }
  if (!(peak > 0.0)) throw InvalidArgument("ssim peak must be positive");
  const int w = reference.width(), h = reference.height();
  const std::size_t n = reference.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = reference.pixels()[i];
    y[i] = test.pixels()[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = gaussian_kernel();
  const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
  const auto mxx = filter_valid(xx, w, h, k), myy = filter_valid(yy, w, h, k), mxy = filter_valid(xy, w, h, k);
  const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cxy = mxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

MetricValue enl(const Image& image, const Region& region) {
  require_region(region, image);
  double sum = 0.0;
  for (int y = region.y; y < region.y + region.height; ++y)
    for (int x = region.x; x < region.x + region.width; ++x) sum += image.at(x, y);
  const double count = static_cast<double>(region.width) * region.height;
  const double mean = sum / count;
  double var = 0.0;
  for (int y = region.y; y < region.y + region.height; ++y)
    for (int x = region.x; x < region.x + region.width; ++x) {
      const double d = image.at(x, y) - mean;
      var += d * d;
    }
  var /= count;
  if (var == 0.0) return {0.0, true, 0.0};
  return {mean * mean / var, false, 0.0};
}

MetricValue epd_roa(const Image& original, const Image& despeckled, const Region& region, Direction direction) {
  require_same_shape(original, despeckled);
  require_region(region, original);
  const int dx = direction == Direction::kHorizontal ? 1 : 0;
  const int dy = 1 - dx;
  double num = 0.0, den = 0.0;
  std::size_t pairs = 0, skipped = 0;
  for (int y = region.y; y + dy < region.y + region.height; ++y) {
    for (int x = region.x; x + dx < region.x + region.width; ++x) {
      ++pairs;
      const double d0 = despeckled.at(x, y), d1 = despeckled.at(x + dx, y + dy);
      const double o0 = original.at(x, y), o1 = original.at(x + dx, y + dy);
      if (d1 == 0.0 || o1 == 0.0) {
        ++skipped;
        continue;
      }
      num += std::fabs(d0 / d1);
      den += std::fabs(o0 / o1);
    }
  }
  const double skipped_fraction = static_cast<double>(skipped) / static_cast<double>(pairs);
  if (den == 0.0) return {0.0, true, skipped_fraction};
  return {num / den, false, skipped_fraction};
}

MetricValue tcr_deviation(const Image& original, const Image& despeckled, const Region& target,
                          const Region& clutter) {
  require_same_shape(original, despeckled);
  if (!target.fits(original) || !clutter.fits(original)) throw InvalidArgument("TCR regions must fit inside the image");
  if (target.overlaps(clutter)) throw InvalidArgument("TCR target and clutter regions must be disjoint");
  auto tcr = [&](const Image& img, const char* which) {
    float peak = img.at(target.x, target.y);
    for (int y = target.y; y < target.y + target.height; ++y)
      for (int x = target.x; x < target.x + target.width; ++x) peak = std::max(peak, img.at(x, y));
    double sum = 0.0;
    for (int y = clutter.y; y < clutter.y + clutter.height; ++y)
      for (int x = clutter.x; x < clutter.x + clutter.width; ++x) sum += img.at(x, y);
    const double mean = sum / (static_cast<double>(clutter.width) * clutter.height);
    if (!(mean > 0.0)) throw InvalidArgument(std::string("clutter mean of the ") + which + " image is not positive");
    if (!(peak > 0.0f)) throw InvalidArgument(std::string("target maximum of the ") + which + " image is not positive");
    return 20.0 * std::log10(peak / mean);
  };
  return {std::fabs(tcr(despeckled, "despeckled") - tcr(original, "original")), false, 0.0};
}

MetricValue mor(const Image& original, const Image& despeckled, const Region& region) {
  require_same_shape(original, despeckled);
  require_region(region, original);
  double sum = 0.0;
  std::size_t used = 0, skipped = 0;
  for (int y = region.y; y < region.y + region.height; ++y)
    for (int x = region.x; x < region.x + region.width; ++x) {
      const double d = despeckled.at(x, y);
      if (!(d > 0.0)) {
        ++skipped;
        continue;
      }
      sum += original.at(x, y) / d;
      ++used;
    }
  if (used == 0) throw InvalidArgument("MoR: every despeckled pixel in region '" + region.name + "' is non-positive");
  return {sum / static_cast<double>(used), false, static_cast<double>(skipped) / static_cast<double>(used + skipped)};
}

std::string_view region_kind_name(RegionKind kind) {
  switch (kind) {
    case RegionKind::kHomogeneous: return "homogeneous";
    case RegionKind::kEdge: return "edge";
    case RegionKind::kPointTarget: return "point-target";
  }
  return "unknown";
}

std::vector<Region> parse_regions(const std::string& text) {
  std::vector<Region> out;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string name, kind;
    if (!(ls >> name)) continue;
    Region r;
    r.name = name;
    if (!(ls >> kind >> r.x >> r.y >> r.width >> r.height)) {
      throw InvalidArgument("region line " + std::to_string(line_no) + ": expected `name kind x y w h [direction]`");
    }
    r.kind = parse_kind(kind);
    std::string dir;
    if (ls >> dir) r.direction = parse_direction(dir);
    std::string extra;
    if (ls >> extra) throw InvalidArgument("region line " + std::to_string(line_no) + ": unexpected '" + extra + "'");
    if (r.width < 2 || r.height < 2) {
      throw InvalidArgument("region line " + std::to_string(line_no) + ": width and height must be >= 2");
    }
    if (r.x < 0 || r.y < 0) throw InvalidArgument("region line " + std::to_string(line_no) + ": negative offset");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Region> read_regions(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open region file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_regions(ss.str());
}

void write_regions(const std::filesystem::path& path, const std::vector<Region>& regions) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << "# name kind x y width height [direction]\n";
  for (const Region& r : regions) {
    os << r.name << ' ' << region_kind_name(r.kind) << ' ' << r.x << ' ' << r.y << ' ' << r.width << ' ' << r.height;
    if (r.direction) os << ' ' << direction_name(*r.direction);
    os << '\n';
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

const MetricEntry* MetricReport::find(const std::string& metric, const std::string& region) const {
  for (const MetricEntry& e : entries) {
    if (e.metric != metric) continue;
    if (region.empty() || (!e.regions.empty() && e.regions.front() == region)) return &e;
  }
  return nullptr;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["reference"] = reference_id;
  j["test"] = test_id;
  j["metrics"] = nlohmann::ordered_json::array();
  for (const MetricEntry& e : entries) {
    nlohmann::ordered_json m;
    m["metric"] = e.metric;
    m["regions"] = e.regions;
    m["value"] = e.result.value;
    m["saturated"] = e.result.saturated;
    m["skipped_fraction"] = e.result.skipped_fraction;
    j["metrics"].push_back(std::move(m));
  }
  return j.dump(2);
}

MetricReport full_reference_report(const Image& clean, const Image& despeckled, std::string clean_id,
                                   std::string despeckled_id, double peak) {
  MetricReport report{std::move(clean_id), std::move(despeckled_id), {}};
  report.entries.push_back({"psnr", {}, psnr(clean, despeckled, peak)});
  report.entries.push_back({"ssim", {}, {ssim(clean, despeckled, peak), false, 0.0}});
  return report;
}

MetricReport no_reference_report(const Image& original, const Image& despeckled, const std::vector<Region>& regions,
                                 std::string original_id, std::string despeckled_id) {
  require_same_shape(original, despeckled);
  MetricReport report{std::move(original_id), std::move(despeckled_id), {}};
  for (const Region& r : regions) {
    if (r.kind != RegionKind::kHomogeneous) continue;
    report.entries.push_back({"enl_original", {r.name}, enl(original, r)});
    report.entries.push_back({"enl", {r.name}, enl(despeckled, r)});
    report.entries.push_back({"mor", {r.name}, mor(original, despeckled, r)});
  }
  for (const Region& r : regions) {
    if (r.kind != RegionKind::kEdge) continue;
    for (Direction d : {Direction::kHorizontal, Direction::kVertical}) {
      if (r.direction && *r.direction != d) continue;
      report.entries.push_back(
          {"epd_roa_" + std::string(direction_name(d)), {r.name}, epd_roa(original, despeckled, r, d)});
    }
  }
  for (const Region& t : regions) {
    if (t.kind != RegionKind::kPointTarget) continue;
    auto clutter = std::find_if(regions.begin(), regions.end(), [&](const Region& c) {
      return c.kind == RegionKind::kHomogeneous && !c.overlaps(t);
    });
    if (clutter == regions.end()) {
      throw InvalidArgument("point target '" + t.name + "' has no disjoint homogeneous region to use as clutter");
    }
    report.entries.push_back(
        {"tcr_deviation", {t.name, clutter->name}, tcr_deviation(original, despeckled, t, *clutter)});
  }
  return report;
}

}  // namespace psd
