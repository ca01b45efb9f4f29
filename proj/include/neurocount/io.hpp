#pragma once

// Lossless raster I/O. PNG is the only container: 8-bit RGB slides,
// 16-bit grayscale label masks, 8-bit (or 1/2/4/16-bit) grayscale binary masks.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include "neurocount/color.hpp"
#include "neurocount/image.hpp"

namespace neurocount::io {

namespace fs = std::filesystem;

inline constexpr const char* kResolutionKey = "neurocount:resolution_um";

namespace detail {

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int color_type = 0;  // as stored in the file
  int bit_depth = 0;   // as stored in the file
  int channels = 0;    // after expansion
  int sample_bits = 0; // 8 or 16, after expansion
  std::size_t rowbytes = 0;
  double resolution_um = 0.0;  // 0 when the file carries none
};

using AllocateFn = unsigned char* (*)(void* user, const PngHeader& header);

struct ReadContext {
  char message[256] = {};
  void* user = nullptr;
  AllocateFn allocate = nullptr;
  bool rejected = false;
};

extern "C" inline void png_error_to_context(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<char*>(png_get_error_ptr(png));
  std::snprintf(ctx, 256, "%s", msg);
  png_longjmp(png, 1);
}

extern "C" inline void png_ignore_warning(png_structp, png_const_charp) {}

// Only trivially destructible locals live in this frame: libpng reports
// errors by longjmp back to the setjmp below.
inline bool read_png_file(std::FILE* fp, ReadContext* ctx) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, ctx->message,
                                           png_error_to_context, png_ignore_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_set_user_limits(png, 0x7fffffff, 0x7fffffff);
  png_read_info(png, info);

  PngHeader header;
  header.width = png_get_image_width(png, info);
  header.height = png_get_image_height(png, info);
  header.color_type = png_get_color_type(png, info);
  header.bit_depth = png_get_bit_depth(png, info);

  png_textp text = nullptr;
  int n_text = 0;
  if (png_get_text(png, info, &text, &n_text) > 0) {
    for (int i = 0; i < n_text; ++i) {
      if (std::strcmp(text[i].key, kResolutionKey) == 0) {
        header.resolution_um = std::strtod(text[i].text, nullptr);
      }
    }
  }
  if (header.resolution_um <= 0.0) {
    png_uint_32 res_x = 0, res_y = 0;
    int unit = 0;
    if (png_get_pHYs(png, info, &res_x, &res_y, &unit) != 0 && unit == PNG_RESOLUTION_METER &&
        res_x > 0) {
      header.resolution_um = 1e6 / static_cast<double>(res_x);
    }
  }

  if (header.color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (header.color_type == PNG_COLOR_TYPE_GRAY && header.bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (header.bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  const int passes = png_set_interlace_handling(png);
  png_read_update_info(png, info);
  header.channels = png_get_channels(png, info);
  header.sample_bits = png_get_bit_depth(png, info);
  header.rowbytes = png_get_rowbytes(png, info);

  unsigned char* buffer = ctx->allocate(ctx->user, header);
  if (buffer == nullptr) {
    ctx->rejected = true;
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  for (int pass = 0; pass < passes; ++pass) {
    for (png_uint_32 y = 0; y < header.height; ++y) {
      png_read_row(png, buffer + static_cast<std::size_t>(y) * header.rowbytes, nullptr);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct WriteSpec {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int color_type = 0;
  int bit_depth = 0;
  std::size_t rowbytes = 0;
  const unsigned char* data = nullptr;
  double resolution_um = 0.0;  // 0 skips the resolution chunks
  char resolution_text[64] = {};
  char message[256] = {};
};

inline bool write_png_file(std::FILE* fp, WriteSpec* spec) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, spec->message,
                                            png_error_to_context, png_ignore_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_compression_level(png, 3);
  png_set_IHDR(png, info, spec->width, spec->height, spec->bit_depth, spec->color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (spec->resolution_um > 0.0) {
    const auto ppm = static_cast<png_uint_32>(1e6 / spec->resolution_um + 0.5);
    png_set_pHYs(png, info, ppm, ppm, PNG_RESOLUTION_METER);
    png_text text{};
    text.compression = PNG_TEXT_COMPRESSION_NONE;
    text.key = const_cast<char*>(kResolutionKey);
    text.text = spec->resolution_text;
    png_set_text(png, info, &text, 1);
  }
  png_write_info(png, info);
  if (spec->bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  for (png_uint_32 y = 0; y < spec->height; ++y) {
    png_write_row(png, spec->data + static_cast<std::size_t>(y) * spec->rowbytes);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct FileCloser {
  void operator()(std::FILE* fp) const noexcept { std::fclose(fp); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

inline void check_container(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".jpg" || ext == ".jpeg" || ext == ".webp" || ext == ".jfif") {
    throw Error(ErrorCode::UnsupportedFormat, "lossy format rejected: " + path.string());
  }
  if (ext != ".png") {
    throw Error(ErrorCode::UnsupportedFormat, "expected a .png raster: " + path.string());
  }
}

/// Reads any accepted PNG and lets `accept` validate the header and hand back
/// the destination buffer (or nullptr with a reason to reject).
template <typename Accept>
void read_png(const fs::path& path, Accept&& accept) {
  check_container(path);
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw Error(ErrorCode::MissingFile, path.string());

  unsigned char signature[8] = {};
  if (std::fread(signature, 1, 8, fp.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, "not a PNG file: " + path.string());
  }
  std::rewind(fp.get());

  struct State {
    std::remove_reference_t<Accept>* accept;
    std::string reason;
    ErrorCode code;
  } state{&accept, {}, ErrorCode::BitDepthError};

  ReadContext ctx;
  ctx.user = &state;
  ctx.allocate = [](void* user, const PngHeader& header) -> unsigned char* {
    auto* s = static_cast<State*>(user);
    try {
      return (*s->accept)(header);
    } catch (const Error& e) {
      s->reason = e.what();
      s->code = e.code();
      return nullptr;
    } catch (const std::exception& e) {
      s->reason = e.what();
      s->code = ErrorCode::IoError;
      return nullptr;
    }
  };
  if (!read_png_file(fp.get(), &ctx)) {
    if (ctx.rejected) {
      throw Error(state.code, path.string() + ": " + state.reason);
    }
    throw Error(ErrorCode::IoError, path.string() + ": " + ctx.message);
  }
}

inline void write_png(const fs::path& path, WriteSpec& spec) {
  check_container(path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  if (spec.resolution_um > 0.0) {
    std::snprintf(spec.resolution_text, sizeof spec.resolution_text, "%.17g", spec.resolution_um);
  }
  if (!write_png_file(fp.get(), &spec)) {
    throw Error(ErrorCode::IoError, path.string() + ": " + spec.message);
  }
}

}  // namespace detail

inline RgbSlide read_rgb(const fs::path& path) {
  RgbSlide slide;
  double resolution = 0.0;
  detail::read_png(path, [&](const detail::PngHeader& h) -> unsigned char* {
    const bool rgb = h.color_type == PNG_COLOR_TYPE_RGB || h.color_type == PNG_COLOR_TYPE_PALETTE;
    if (!rgb || h.bit_depth != 8 || h.channels != 3) {
      throw Error(ErrorCode::BitDepthError, "slide must be 8-bit 3-channel RGB");
    }
    slide = RgbSlide(static_cast<int>(h.width), static_cast<int>(h.height));
    resolution = h.resolution_um;
    return slide.data().data();
  });
  if (resolution > 0.0) slide.resolution_um = resolution;
  return slide;
}

/// Reads a 16-bit single-channel label raster. Labels are compacted to
/// {1..n} unless `canonical` is false, in which case n_labels is the
/// number of distinct nonzero values.
inline LabelMask read_labels(const fs::path& path, bool canonical = true,
                             LabelMapping* mapping = nullptr) {
  LabelMask mask;
  detail::read_png(path, [&](const detail::PngHeader& h) -> unsigned char* {
    if (h.color_type != PNG_COLOR_TYPE_GRAY || h.bit_depth != 16) {
      throw Error(ErrorCode::BitDepthError, "label mask must be 16-bit single-channel");
    }
    mask = LabelMask(static_cast<int>(h.width), static_cast<int>(h.height));
    return reinterpret_cast<unsigned char*>(mask.data().data());
  });
  if (canonical) {
    auto m = canonicalize(mask);
    if (mapping != nullptr) *mapping = std::move(m);
  } else {
    std::vector<bool> seen(65536, false);
    std::uint32_t n = 0;
    for (auto v : mask.data()) {
      if (v != 0 && !seen[v]) {
        seen[v] = true;
        ++n;
      }
    }
    mask.n_labels = n;
  }
  return mask;
}

/// Reads a grayscale raster of any bit depth as foreground flags (nonzero = 1).
inline BinaryMask read_binary(const fs::path& path) {
  BinaryMask mask;
  std::vector<std::uint16_t> wide;
  int sample_bits = 8;
  detail::read_png(path, [&](const detail::PngHeader& h) -> unsigned char* {
    if (h.color_type != PNG_COLOR_TYPE_GRAY) {
      throw Error(ErrorCode::BitDepthError, "binary mask must be single-channel grayscale");
    }
    sample_bits = h.sample_bits;
    mask = BinaryMask(static_cast<int>(h.width), static_cast<int>(h.height));
    if (sample_bits == 16) {
      wide.assign(mask.pixel_count(), 0);
      return reinterpret_cast<unsigned char*>(wide.data());
    }
    return mask.data().data();
  });
  auto dst = mask.data();
  if (sample_bits == 16) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = wide[i] != 0 ? 1 : 0;
  } else {
    for (auto& v : dst) v = v != 0 ? 1 : 0;
  }
  return mask;
}

/// True when the PNG at `path` stores 16-bit grayscale samples (an instance
/// label raster rather than a binary mask).
inline bool is_label_raster(const fs::path& path) {
  bool sixteen = false;
  try {
    detail::read_png(path, [&](const detail::PngHeader& h) -> unsigned char* {
      sixteen = h.color_type == PNG_COLOR_TYPE_GRAY && h.bit_depth == 16;
      throw Error(ErrorCode::InvalidArgument, "header probe");
    });
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InvalidArgument) throw;
  }
  return sixteen;
}

inline void write_rgb(const fs::path& path, const RgbSlide& slide) {
  detail::WriteSpec spec;
  spec.width = static_cast<png_uint_32>(slide.width());
  spec.height = static_cast<png_uint_32>(slide.height());
  spec.color_type = PNG_COLOR_TYPE_RGB;
  spec.bit_depth = 8;
  spec.rowbytes = static_cast<std::size_t>(slide.width()) * 3;
  spec.data = slide.data().data();
  spec.resolution_um = slide.resolution_um;
  detail::write_png(path, spec);
}

inline void write_labels(const fs::path& path, const LabelMask& mask) {
  detail::WriteSpec spec;
  spec.width = static_cast<png_uint_32>(mask.width());
  spec.height = static_cast<png_uint_32>(mask.height());
  spec.color_type = PNG_COLOR_TYPE_GRAY;
  spec.bit_depth = 16;
  spec.rowbytes = static_cast<std::size_t>(mask.width()) * 2;
  spec.data = reinterpret_cast<const unsigned char*>(mask.data().data());
  detail::write_png(path, spec);
}

/// Binary masks are written as 8-bit 0/255.
inline void write_binary(const fs::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> scaled(mask.data().begin(), mask.data().end());
  for (auto& v : scaled) v = v != 0 ? 255 : 0;
  detail::WriteSpec spec;
  spec.width = static_cast<png_uint_32>(mask.width());
  spec.height = static_cast<png_uint_32>(mask.height());
  spec.color_type = PNG_COLOR_TYPE_GRAY;
  spec.bit_depth = 8;
  spec.rowbytes = static_cast<std::size_t>(mask.width());
  spec.data = scaled.data();
  detail::write_png(path, spec);
}

inline void write_gray(const fs::path& path, const GrayImage& image) {
  detail::WriteSpec spec;
  spec.width = static_cast<png_uint_32>(image.width());
  spec.height = static_cast<png_uint_32>(image.height());
  spec.color_type = PNG_COLOR_TYPE_GRAY;
  spec.bit_depth = 8;
  spec.rowbytes = static_cast<std::size_t>(image.width());
  spec.data = image.data().data();
  detail::write_png(path, spec);
}

struct LoadedPair {
  RgbSlide image;
  LabelMask labels;
  LabelMapping mapping;  // original label -> canonical label
};

inline LoadedPair load_pair(const fs::path& image_path, const fs::path& label_path) {
  for (const auto& p : {image_path, label_path}) {
    if (!fs::exists(p)) throw Error(ErrorCode::MissingFile, p.string());
  }
  LoadedPair pair;
  pair.image = read_rgb(image_path);
  pair.labels = read_labels(label_path, true, &pair.mapping);
  require_same_extent(pair.image, pair.labels, "slide and label raster differ in size");
  return pair;
}

/// File stem up to the first dot: "slide01.image.png" -> "slide01".
inline std::string stem_of(const fs::path& path) {
  const std::string name = path.filename().string();
  return name.substr(0, name.find('.'));
}

/// PNG files in `dir` whose name contains `.<role>.` (or every PNG when
/// role is empty), keyed by stem in lexicographic order.
inline std::map<std::string, fs::path> files_by_stem(const fs::path& dir, const std::string& role = {}) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, "not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (detail::lower_extension(p) != ".png") continue;
    const std::string name = p.filename().string();
    if (!role.empty() && name.find("." + role + ".") == std::string::npos) continue;
    out.emplace(stem_of(p), p);
  }
  return out;
}

}  // namespace neurocount::io
