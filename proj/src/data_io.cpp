#include "psd/data_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "psd/error.hpp"
#include "psd/random.hpp"

namespace psd {

namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// --- PNM / PFM ---------------------------------------------------------------

class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  std::string token() {
    skip_space_and_comments();
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) t.push_back(static_cast<char>(bytes_[pos_++]));
    if (t.empty()) throw CorruptFile("'" + path_.string() + "': truncated header");
    return t;
  }

  long integer() {
    const std::string t = token();
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (*end != '\0' || v < 0) throw CorruptFile("'" + path_.string() + "': bad header field '" + t + "'");
    return v;
  }

  // Binary payloads start after exactly one whitespace byte.
  std::size_t payload_start() {
    if (pos_ >= bytes_.size()) throw CorruptFile("'" + path_.string() + "': missing payload");
    return pos_ + 1;
  }

  std::size_t position() const { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

void check_dims(long w, long h, const fs::path& path) {
  if (w < 1 || h < 1 || w > (1 << 16) || h > (1 << 16)) {
    throw CorruptFile("'" + path.string() + "': implausible dimensions " + std::to_string(w) + "x" + std::to_string(h));
  }
}

LoadedImage load_pnm(const fs::path& path, const std::vector<unsigned char>& bytes) {
  HeaderReader header(bytes, path);
  const std::string magic = header.token();
  if (magic == "P3" || magic == "P6") throw ShapeError("'" + path.string() + "' has 3 channels; expected single-channel");
  if (magic != "P2" && magic != "P5") throw CorruptFile("'" + path.string() + "': unsupported PNM type " + magic);
  const long w = header.integer(), h = header.integer(), maxval = header.integer();
  check_dims(w, h, path);
  if (maxval < 1 || maxval > 65535) throw CorruptFile("'" + path.string() + "': bad maxval");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<float> px(n);
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      const long v = header.integer();
      if (v > maxval) throw CorruptFile("'" + path.string() + "': sample exceeds maxval");
      px[i] = static_cast<float>(static_cast<double>(v) / maxval);
    }
  } else {
    const std::size_t start = header.payload_start();
    const std::size_t bps = maxval > 255 ? 2 : 1;
    if (bytes.size() < start + n * bps) throw CorruptFile("'" + path.string() + "': truncated payload");
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = bps == 1 ? bytes[start + i] : (bytes[start + 2 * i] << 8) | bytes[start + 2 * i + 1];
      if (v > static_cast<unsigned>(maxval)) throw CorruptFile("'" + path.string() + "': sample exceeds maxval");
      px[i] = static_cast<float>(static_cast<double>(v) / maxval);
    }
  }
  return {Image(static_cast<int>(w), static_cast<int>(h), std::move(px)), {0.0, 1.0}, maxval > 255 ? 16 : 8};
}

LoadedImage load_pfm(const fs::path& path, const std::vector<unsigned char>& bytes, bool normalize = true) {
  HeaderReader header(bytes, path);
  const std::string magic = header.token();
  if (magic == "PF") throw ShapeError("'" + path.string() + "' has 3 channels; expected single-channel");
  if (magic != "Pf") throw CorruptFile("'" + path.string() + "': not a PFM file");
  const long w = header.integer(), h = header.integer();
  check_dims(w, h, path);
  const std::string scale_text = header.token();
  const double scale = std::strtod(scale_text.c_str(), nullptr);
  if (scale == 0.0) throw CorruptFile("'" + path.string() + "': bad PFM scale");
  const bool little = scale < 0;
  const std::size_t start = header.payload_start();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < start + 4 * n) throw CorruptFile("'" + path.string() + "': truncated payload");
  std::vector<float> px(n);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const unsigned char* b = bytes.data() + start + 4 * ((h - 1 - y) * w + x);
      std::uint32_t u = little ? (b[0] | b[1] << 8 | b[2] << 16 | static_cast<std::uint32_t>(b[3]) << 24)
                               : (b[3] | b[2] << 8 | b[1] << 16 | static_cast<std::uint32_t>(b[0]) << 24);
      float f;
      std::memcpy(&f, &u, 4);
      if (!std::isfinite(f)) throw CorruptFile("'" + path.string() + "': non-finite sample");
      px[static_cast<std::size_t>(y) * w + x] = f;
    }
  }
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  Normalization norm{0.0, 1.0};
  if (normalize && (*lo < 0.0f || *hi > 1.0f)) {
    norm.offset = *lo;
    norm.scale = *hi > *lo ? static_cast<double>(*hi) - *lo : 1.0;
    for (float& v : px) v = static_cast<float>((v - norm.offset) / norm.scale);
  }
  return {Image(static_cast<int>(w), static_cast<int>(h), std::move(px)), norm, 32};
}

// --- PNG ---------------------------------------------------------------------
// libpng reports errors through longjmp, so the functions holding a setjmp
// keep every object they touch inside the caller-owned state.

struct PngState {
  std::string error;
  std::vector<unsigned char> data;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
};

void png_error_fn(png_structp png, png_const_charp message) {
  auto* state = static_cast<PngState*>(png_get_error_ptr(png));
  state->error = message;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

bool png_read_raw(std::FILE* fp, PngState& s) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &s, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  s.width = png_get_image_width(png, info);
  s.height = png_get_image_height(png, info);
  s.bit_depth = png_get_bit_depth(png, info);
  s.color_type = png_get_color_type(png, info);
  if (s.color_type != PNG_COLOR_TYPE_GRAY) {
    s.error = "multi-channel";
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (s.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  s.data.resize(row_bytes * s.height);
  s.rows.resize(s.height);
  for (png_uint_32 y = 0; y < s.height; ++y) s.rows[y] = s.data.data() + y * row_bytes;
  png_read_image(png, s.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool png_write_raw(std::FILE* fp, PngState& s) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &s, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, s.width, s.height, s.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, s.rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

LoadedImage load_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open '" + path.string() + "'");
  PngState s;
  if (!png_read_raw(fp.get(), s)) {
    if (s.error == "multi-channel") {
      throw ShapeError("'" + path.string() + "' is not single-channel grayscale (PNG color type " +
                       std::to_string(s.color_type) + ")");
    }
    throw CorruptFile("'" + path.string() + "': " + (s.error.empty() ? "unreadable PNG" : s.error));
  }
  const int depth = s.bit_depth == 16 ? 16 : 8;
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  std::vector<float> px(static_cast<std::size_t>(s.width) * s.height);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const unsigned v = depth == 16 ? (s.data[2 * i] << 8) | s.data[2 * i + 1] : s.data[i];
    px[i] = static_cast<float>(v / maxval);
  }
  return {Image(static_cast<int>(s.width), static_cast<int>(s.height), std::move(px)), {0.0, 1.0}, depth};
}

std::vector<unsigned> quantize(const Image& image, unsigned maxval) {
  std::vector<unsigned> codes(image.size());
  auto px = image.pixels();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const double v = std::clamp(static_cast<double>(px[i]), 0.0, 1.0);
    codes[i] = static_cast<unsigned>(std::floor(v * maxval + 0.5));
  }
  return codes;
}

void write_file(const fs::path& path, const std::string& header, const std::vector<unsigned char>& payload) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << header;
  os.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

bool is_image_file(const fs::path& p) {
  const std::string ext = lower_extension(p);
  return ext == ".pgm" || ext == ".png" || ext == ".pfm";
}

std::string_view depth_name(ExportDepth d) {
  switch (d) {
    case ExportDepth::k8: return "8";
    case ExportDepth::k16: return "16";
    case ExportDepth::kFloat: return "float";
    case ExportDepth::kRawFloat: return "raw";
  }
  return "?";
}

// --- synthesis ---------------------------------------------------------------

double uniform_in(Philox& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

int int_in(Philox& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

void fill_rect(Image& img, int x0, int y0, int x1, int y1, float v) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.at(x, y) = v;
}

DatasetItem piecewise_constant(int size, Philox& rng) {
  const int sx = int_in(rng, 32, size - 32), sy = int_in(rng, 32, size - 32);
  // Quadrant levels alternate between a dark and a bright band so every
  // boundary is a real edge.
  const float dark1 = static_cast<float>(uniform_in(rng, 0.1, 0.35));
  const float dark2 = static_cast<float>(uniform_in(rng, 0.1, 0.35));
  const float bright1 = static_cast<float>(uniform_in(rng, 0.55, 0.9));
  const float bright2 = static_cast<float>(uniform_in(rng, 0.55, 0.9));
  Image img(size, size);
  fill_rect(img, 0, 0, sx, sy, dark1);
  fill_rect(img, sx, 0, size, sy, bright1);
  fill_rect(img, 0, sy, sx, size, bright2);
  fill_rect(img, sx, sy, size, size, dark2);
  DatasetItem item;
  item.image = std::move(img);
  item.regions = {
      {"flat", RegionKind::kHomogeneous, sx - 32, sy - 32, 32, 32, std::nullopt},
      {"edge", RegionKind::kEdge, sx - 4, sy - 24, 8, 16, Direction::kHorizontal},
  };
  return item;
}

DatasetItem gradient(int size, Philox& rng) {
  const float a = static_cast<float>(uniform_in(rng, 0.45, 0.6));
  const float b = static_cast<float>(uniform_in(rng, 0.7, 0.85));
  const float band = static_cast<float>(uniform_in(rng, 0.1, 0.3));
  const int y0 = int_in(rng, 8, size - 40);
  Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) img.at(x, y) = a + (b - a) * static_cast<float>(x) / static_cast<float>(size - 1);
  fill_rect(img, 0, y0, size, y0 + 32, band);
  const int fx = int_in(rng, 0, size - 32);
  DatasetItem item;
  item.image = std::move(img);
  item.regions = {
      {"flat", RegionKind::kHomogeneous, fx, y0, 32, 32, std::nullopt},
      {"edge", RegionKind::kEdge, fx, y0 - 4, 32, 8, Direction::kVertical},
  };
  return item;
}

DatasetItem shapes(int size, Philox& rng) {
  const int half = size / 2;
  const float background = static_cast<float>(uniform_in(rng, 0.15, 0.35));
  const float rect = static_cast<float>(uniform_in(rng, 0.55, 0.75));
  const float disk = static_cast<float>(uniform_in(rng, 0.35, 0.5));
  Image img(size, size, std::vector<float>(static_cast<std::size_t>(size) * size, background));
  fill_rect(img, half, 8, size - 8, size - 8, rect);

  // Disk inside the rectangle, clear of the edge region on its left border.
  const int rect_w = size - 8 - half;
  const int max_r = std::max(3, std::min(14, rect_w / 2 - 6));
  const int r = int_in(rng, 3, max_r);
  const int cx = half + rect_w / 2 + 2, cy = size / 2;
  for (int y = cy - r; y <= cy + r; ++y)
    for (int x = cx - r; x <= cx + r; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.at(x, y) = disk;

  DatasetItem item;
  item.regions = {
      {"flat", RegionKind::kHomogeneous, 0, 0, 32, 32, std::nullopt},
      {"edge", RegionKind::kEdge, half - 4, 16, 8, std::min(32, size - 24), Direction::kHorizontal},
  };
  // Two isolated unit-valued points below the flat region, each in its own 3x3 window.
  const int px0 = int_in(rng, 4, half / 2 - 2);
  const int px1 = int_in(rng, half / 2 + 2, half - 6);
  const int py0 = int_in(rng, 37, size - 5);
  const int py1 = int_in(rng, 37, size - 5);
  int k = 0;
  for (auto [x, y] : {std::pair{px0, py0}, std::pair{px1, py1}}) {
    img.at(x, y) = 1.0f;
    item.regions.push_back({"point" + std::to_string(k++), RegionKind::kPointTarget, x - 1, y - 1, 3, 3, std::nullopt});
  }
  item.image = std::move(img);
  return item;
}

}  // namespace

LoadedImage load_image_with_info(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file '" + path.string() + "'");
  const std::string ext = lower_extension(path);
  if (ext == ".png") return load_png(path);
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'f' || bytes[1] == 'F')) return load_pfm(path, bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return load_pnm(path, bytes);
  if (bytes.size() >= 8 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') return load_png(path);
  throw CorruptFile("'" + path.string() + "': unrecognised image format");
}

Image load_image(const fs::path& path) { return load_image_with_info(path).image; }

Image load_raw_float(const fs::path& path) { return load_pfm(path, read_bytes(path), false).image; }

ExportDepth parse_export_depth(const std::string& text) {
  if (text == "8") return ExportDepth::k8;
  if (text == "16") return ExportDepth::k16;
  if (text == "float" || text == "32") return ExportDepth::kFloat;
  if (text == "raw") return ExportDepth::kRawFloat;
  throw InvalidArgument("export depth must be 8, 16, float or raw, got '" + text + "'");
}

void export_image(const Image& image, const fs::path& path, ExportDepth depth) {
  const std::string ext = lower_extension(path);
  const int w = image.width(), h = image.height();
  if (ext == ".pfm") {
    if (depth != ExportDepth::kFloat && depth != ExportDepth::kRawFloat) {
      throw InvalidArgument("PFM output requires float depth");
    }
    const bool raw = depth == ExportDepth::kRawFloat;
    std::vector<unsigned char> payload(image.size() * 4);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float v = raw ? image.at(x, y) : std::clamp(image.at(x, y), 0.0f, 1.0f);
        std::memcpy(payload.data() + 4 * (static_cast<std::size_t>(h - 1 - y) * w + x), &v, 4);
      }
    write_file(path, "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n", payload);
    return;
  }
  if (depth == ExportDepth::kFloat || depth == ExportDepth::kRawFloat) {
    throw InvalidArgument("float depth requires a .pfm path");
  }
  const unsigned maxval = depth == ExportDepth::k8 ? 255 : 65535;
  const auto codes = quantize(image, maxval);
  const std::size_t bps = depth == ExportDepth::k8 ? 1 : 2;
  std::vector<unsigned char> payload(codes.size() * bps);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (bps == 1) {
      payload[i] = static_cast<unsigned char>(codes[i]);
    } else {
      payload[2 * i] = static_cast<unsigned char>(codes[i] >> 8);
      payload[2 * i + 1] = static_cast<unsigned char>(codes[i] & 0xff);
    }
  }
  if (ext == ".pgm") {
    write_file(path, "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n",
               payload);
  } else if (ext == ".png") {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");
    PngState s;
    s.width = static_cast<png_uint_32>(w);
    s.height = static_cast<png_uint_32>(h);
    s.bit_depth = static_cast<int>(8 * bps);
    s.data = std::move(payload);
    s.rows.resize(h);
    for (int y = 0; y < h; ++y) s.rows[y] = s.data.data() + static_cast<std::size_t>(y) * w * bps;
    if (!png_write_raw(fp.get(), s)) throw IoError("PNG write to '" + path.string() + "' failed: " + s.error);
  } else {
    throw InvalidArgument("unsupported output extension '" + ext + "' (use .pgm, .png or .pfm)");
  }
}

std::vector<Image> crop_patches(const Image& image, int size, int stride) {
  if (size < 1 || stride < 1) throw InvalidArgument("patch size and stride must be positive");
  if (image.width() < size || image.height() < size) {
    throw InvalidArgument("image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                          " is smaller than the " + std::to_string(size) + " pixel patch");
  }
  std::vector<Image> out;
  for (int y = 0; y + size <= image.height(); y += stride)
    for (int x = 0; x + size <= image.width(); x += stride) out.push_back(crop(image, x, y, size, size));
  return out;
}

std::vector<Image> Dataset::images() const {
  std::vector<Image> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.image);
  return out;
}

Recipe parse_recipe(const std::string& name) {
  if (name == "piecewise-constant" || name == "piecewise_constant") return Recipe::kPiecewiseConstant;
  if (name == "gradient") return Recipe::kGradient;
  if (name == "shapes") return Recipe::kShapes;
  throw InvalidArgument("unknown recipe '" + name + "' (expected piecewise-constant, gradient or shapes)");
}

std::string_view recipe_name(Recipe recipe) {
  switch (recipe) {
    case Recipe::kPiecewiseConstant: return "piecewise-constant";
    case Recipe::kGradient: return "gradient";
    case Recipe::kShapes: return "shapes";
  }
  return "unknown";
}

DatasetItem synthesize_image(Recipe recipe, int size, std::uint64_t seed, std::string id) {
  if (size < kMinSynthSize) {
    throw InvalidArgument("synthetic images need size >= " + std::to_string(kMinSynthSize) + ", got " +
                          std::to_string(size));
  }
  Philox rng(seed);
  DatasetItem item;
  switch (recipe) {
    case Recipe::kPiecewiseConstant: item = piecewise_constant(size, rng); break;
    case Recipe::kGradient: item = gradient(size, rng); break;
    case Recipe::kShapes: item = shapes(size, rng); break;
  }
  item.id = std::move(id);
  item.source = "synth:" + std::string(recipe_name(recipe));
  item.seed = seed;
  return item;
}

Dataset synthesize_corpus(Recipe recipe, int count, int size, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("corpus count must be >= 1");
  Dataset ds;
  ds.items.reserve(count);
  char id[32];
  for (int i = 0; i < count; ++i) {
    std::snprintf(id, sizeof(id), "img_%05d", i);
    ds.items.push_back(synthesize_image(recipe, size, derive_seed(seed, 0x53594e5448ULL, i), id));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const fs::path& dir, ExportDepth depth,
                   const std::string& normalization_note) {
  fs::create_directories(dir);
  const bool is_float = depth == ExportDepth::kFloat || depth == ExportDepth::kRawFloat;
  const std::string ext = is_float ? ".pfm" : ".pgm";
  nlohmann::ordered_json manifest;
  manifest["normalization"] = normalization_note;
  manifest["depth"] = depth_name(depth);
  manifest["items"] = nlohmann::ordered_json::array();
  std::set<std::string> seen;
  for (const DatasetItem& item : dataset.items) {
    if (!seen.insert(item.id).second) throw InvalidArgument("duplicate dataset id '" + item.id + "'");
    const std::string file = item.id + ext;
    export_image(item.image, dir / file, depth);
    nlohmann::ordered_json entry;
    entry["id"] = item.id;
    entry["file"] = file;
    entry["source"] = item.source;
    entry["seed"] = item.seed;
    if (!item.regions.empty()) {
      const std::string regions = item.id + ".regions.txt";
      write_regions(dir / regions, item.regions);
      entry["regions"] = regions;
    }
    manifest["items"].push_back(std::move(entry));
  }
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw IoError("cannot write manifest in '" + dir.string() + "'");
  os << manifest.dump(2) << '\n';
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  Dataset ds;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    nlohmann::json manifest;
    try {
      std::ifstream is(manifest_path);
      manifest = nlohmann::json::parse(is);
      const bool raw = manifest.value("depth", std::string()) == "raw";
      for (const auto& entry : manifest.at("items")) {
        DatasetItem item;
        item.id = entry.at("id").get<std::string>();
        const fs::path file = dir / entry.at("file").get<std::string>();
        item.image = raw ? load_raw_float(file) : load_image(file);
        item.source = entry.value("source", std::string());
        item.seed = entry.value("seed", std::uint64_t{0});
        if (entry.contains("regions")) item.regions = read_regions(dir / entry.at("regions").get<std::string>());
        ds.items.push_back(std::move(item));
      }
    } catch (const nlohmann::json::exception& e) {
      throw CorruptFile("'" + manifest_path.string() + "': " + e.what());
    }
    return ds;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    DatasetItem item;
    item.id = f.stem().string();
    item.image = load_image(f);
    item.source = f.string();
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace psd
