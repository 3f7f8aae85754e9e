#include "lymebench/image.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

extern "C" {
#include <jpeglib.h>
}

namespace lymebench {

namespace {

struct FileCloser {
  void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// ---- PNG ----

Image load_png_file(FILE* f, const fs::path& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("PNG decode failed: " + path.string());
  }
  png_init_io(png, f);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image out{int(w), int(h)};
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.px.data() + size_t(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void save_png_file(const fs::path& path, const Image& img) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) fail("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) fail("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("PNG encode failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.px.data() + size_t(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---- JPEG ----

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

Image load_jpeg_file(FILE* f, const fs::path& path) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail("JPEG decode failed: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  Image out{int(cinfo.output_width), int(cinfo.output_height)};
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.px.data() + size_t(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

// ---- PPM / PGM (binary) ----

int pnm_next_int(FILE* f) {
  int c;
  // skip whitespace and comments
  while ((c = std::fgetc(f)) != EOF) {
    if (c == '#') {
      while ((c = std::fgetc(f)) != EOF && c != '\n') {}
    } else if (!std::isspace(c)) {
      break;
    }
  }
  if (c == EOF) fail("truncated PNM header");
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = std::fgetc(f);
  }
  return v;
}

Image load_pnm_file(FILE* f, const fs::path& path, bool gray) {
  int w = pnm_next_int(f);
  int h = pnm_next_int(f);
  int maxval = pnm_next_int(f);
  if (w <= 0 || h <= 0 || maxval != 255) fail("unsupported PNM: " + path.string());
  Image out(w, h);
  const size_t n = size_t(w) * h;
  if (gray) {
    std::vector<uint8_t> buf(n);
    if (std::fread(buf.data(), 1, n, f) != n) fail("truncated PGM: " + path.string());
    for (size_t i = 0; i < n; ++i) {
      out.px[3 * i] = out.px[3 * i + 1] = out.px[3 * i + 2] = buf[i];
    }
  } else {
    if (std::fread(out.px.data(), 1, n * 3, f) != n * 3) fail("truncated PPM: " + path.string());
  }
  return out;
}

}  // namespace

bool looks_like_image(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" || ext == ".pgm";
}

Image load_image(const fs::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) fail("cannot open image: " + path.string());
  unsigned char magic[8] = {0};
  size_t got = std::fread(magic, 1, sizeof(magic), f.get());
  std::rewind(f.get());
  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return load_png_file(f.get(), path);
  if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return load_jpeg_file(f.get(), path);
  if (got >= 2 && magic[0] == 'P' && magic[1] == '6') {
    std::fseek(f.get(), 2, SEEK_SET);
    return load_pnm_file(f.get(), path, false);
  }
  if (got >= 2 && magic[0] == 'P' && magic[1] == '5') {
    std::fseek(f.get(), 2, SEEK_SET);
    return load_pnm_file(f.get(), path, true);
  }
  fail("unrecognized image format: " + path.string());
}

void save_png(const fs::path& path, const Image& img) {
  if (img.empty()) fail("refusing to write empty image: " + path.string());
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_png_file(path, img);
}

void save_ppm(const fs::path& path, const Image& img) {
  if (img.empty()) fail("refusing to write empty image: " + path.string());
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) fail("cannot open for writing: " + path.string());
  std::fprintf(f.get(), "P6\n%d %d\n255\n", img.width, img.height);
  std::fwrite(img.px.data(), 1, img.px.size(), f.get());
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (img.empty() || out_w <= 0 || out_h <= 0) fail("resize_bilinear: bad arguments");
  Image out(out_w, out_h);
  const double sx = double(img.width) / out_w;
  const double sy = double(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = int(std::floor(fy));
    double wy = fy - y0;
    int y1 = std::min(y0 + 1, img.height - 1);
    y0 = std::clamp(y0, 0, img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = int(std::floor(fx));
      double wx = fx - x0;
      int x1 = std::min(x0 + 1, img.width - 1);
      x0 = std::clamp(x0, 0, img.width - 1);
      for (int c = 0; c < 3; ++c) {
        double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
                   wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
        out.at(y, x, c) = uint8_t(std::clamp(v + 0.5, 0.0, 255.0));
      }
    }
  }
  return out;
}

std::vector<double> box_downsample_gray(const Image& img, int out_w, int out_h) {
  if (img.empty()) fail("box_downsample_gray: empty image");
  std::vector<double> out(size_t(out_w) * out_h, 0.0);
  // Box average over the exact (fractional) source footprint of each cell.
  for (int oy = 0; oy < out_h; ++oy) {
    double y0 = double(oy) * img.height / out_h;
    double y1 = double(oy + 1) * img.height / out_h;
    for (int ox = 0; ox < out_w; ++ox) {
      double x0 = double(ox) * img.width / out_w;
      double x1 = double(ox + 1) * img.width / out_w;
      double acc = 0.0, area = 0.0;
      for (int y = int(std::floor(y0)); y < int(std::ceil(y1)); ++y) {
        double hy = std::min(y1, double(y + 1)) - std::max(y0, double(y));
        if (hy <= 0) continue;
        for (int x = int(std::floor(x0)); x < int(std::ceil(x1)); ++x) {
          double wx = std::min(x1, double(x + 1)) - std::max(x0, double(x));
          if (wx <= 0) continue;
          int yy = std::min(y, img.height - 1), xx = std::min(x, img.width - 1);
          double luma = 0.299 * img.at(yy, xx, 0) + 0.587 * img.at(yy, xx, 1) +
                        0.114 * img.at(yy, xx, 2);
          acc += luma * hy * wx;
          area += hy * wx;
        }
      }
      out[size_t(oy) * out_w + ox] = area > 0 ? acc / area : 0.0;
    }
  }
  return out;
}

uint64_t dhash64(const Image& img) {
  const auto g = box_downsample_gray(img, 9, 8);
  uint64_t h = 0;
  int bit = 0;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      if (g[size_t(r) * 9 + c] > g[size_t(r) * 9 + c + 1]) h |= (uint64_t{1} << bit);
      ++bit;
    }
  }
  return h;
}

int hamming64(uint64_t a, uint64_t b) { return __builtin_popcountll(a ^ b); }

std::string phash_to_hex(uint64_t h) {
  static const char* hex = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 0; i < 16; ++i) s[15 - i] = hex[(h >> (4 * i)) & 0xf];
  return s;
}

uint64_t phash_from_hex(const std::string& s) {
  if (s.size() != 16) fail("phash hex must be 16 digits: " + s);
  uint64_t h = 0;
  for (char c : s) {
    h <<= 4;
    if (c >= '0' && c <= '9') h |= uint64_t(c - '0');
    else if (c >= 'a' && c <= 'f') h |= uint64_t(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') h |= uint64_t(c - 'A' + 10);
    else fail("bad phash hex digit: " + s);
  }
  return h;
}

}  // namespace lymebench
