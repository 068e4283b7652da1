#include "rdist/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "rdist/errors.hpp"
#include "rdist/parallel.hpp"

namespace rdist {

Image::Image(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw DomainError("image dimensions must be positive");
  data_.assign(static_cast<size_t>(width) * height * kChannels, fill);
}

Image::Image(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) throw DomainError("image dimensions must be positive");
  if (data_.size() != static_cast<size_t>(width) * height * kChannels) {
    throw DomainError("image data length does not match dimensions");
  }
}

void Image::set(int x, int y, const Rgb& rgb) {
  for (int c = 0; c < kChannels; ++c) at(x, y, c) = quantize(rgb[c]);
}

std::vector<float> Image::to_float() const { return {data_.begin(), data_.end()}; }

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// --- PPM -------------------------------------------------------------------

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(const std::vector<std::uint8_t>& b, size_t& pos) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') tok.push_back(static_cast<char>(b[pos++]));
  return tok;
}

int ppm_int(const std::vector<std::uint8_t>& b, size_t& pos, const char* what) {
  const std::string tok = ppm_token(b, pos);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); }) ||
      tok.size() > 9) {
    throw FormatError(std::string("malformed PPM header: bad ") + what);
  }
  return std::stoi(tok);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<std::uint8_t>& b) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

struct PngReadBuffer {
  const std::vector<std::uint8_t>* bytes;
  size_t pos;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->pos + n > buf->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, buf->bytes->data() + buf->pos, n);
  buf->pos += n;
}

void png_error_cb(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  *text = msg;
  longjmp(png_jmpbuf(png), 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) throw FormatError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  PngReadBuffer buf{&bytes, 0};
  std::vector<std::uint8_t> data;
  png_uint_32 w = 0, h = 0;
  // No C++ objects with non-trivial destructors may be created between
  // setjmp and the end of the decode.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("malformed PNG: " + err);
  }
  png_set_read_fn(png, &buf, png_read_cb);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  data.resize(static_cast<size_t>(w) * h * 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, data.data() + static_cast<size_t>(y) * w * 3, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return Image(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

void write_png(const std::filesystem::path& path, const Image& img) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write " + path.string());
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + err);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(img.data().data() + static_cast<size_t>(y) * img.width() * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  size_t pos = 0;
  if (ppm_token(bytes, pos) != "P6") throw FormatError("not a binary PPM (P6) file");
  const int w = ppm_int(bytes, pos, "width");
  const int h = ppm_int(bytes, pos, "height");
  const int maxval = ppm_int(bytes, pos, "maxval");
  if (w < 1 || h < 1) throw FormatError("malformed PPM header: zero dimension");
  if (maxval != 255) throw FormatError("unsupported PPM maxval (only 255 is supported)");
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed PPM header");
  ++pos;
  const size_t n = static_cast<size_t>(w) * h * 3;
  if (bytes.size() - pos < n) throw FormatError("truncated PPM payload");
  return Image(w, h, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                               bytes.begin() + static_cast<std::ptrdiff_t>(pos + n)));
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

Image read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (is_png(bytes)) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_ppm(bytes);
  throw FormatError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& img) {
  if (img.empty()) throw DomainError("cannot write an empty image");
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_png(path, img);
    return;
  }
  if (ext != ".ppm" && ext != ".pnm") throw FormatError("unsupported output extension: " + ext);
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// --- sampling ----------------------------------------------------------------

Rgb sample_bilinear(const Image& img, double x, double y) {
  const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(img.width() - 1));
  const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = fx - x0;
  const double ay = fy - y0;
  Rgb out{};
  for (int c = 0; c < Image::kChannels; ++c) {
    const double top = (1.0 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c);
    const double bottom = (1.0 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c);
    out[c] = (1.0 - ay) * top + ay * bottom;
  }
  return out;
}

RemapField RemapField::identity(int width, int height) {
  RemapField f{width, height, width, height, {}, {}};
  f.x_src.resize(static_cast<size_t>(width) * height);
  f.y_src.resize(f.x_src.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      f.x_src[static_cast<size_t>(y) * width + x] = x + 0.5;
      f.y_src[static_cast<size_t>(y) * width + x] = y + 0.5;
    }
  }
  return f;
}

RemapField build_undistort_remap(const RadialDistortion& d, int out_w, int out_h, int src_w,
                                 int src_h) {
  if (out_w < 1 || out_h < 1) throw DomainError("remap dimensions must be positive");
  if (src_w <= 0) src_w = out_w;
  if (src_h <= 0) src_h = out_h;
  require_monotonic(d, corner_radius(out_w, out_h));

  RemapField f{out_w, out_h, src_w, src_h, {}, {}};
  f.x_src.resize(static_cast<size_t>(out_w) * out_h);
  f.y_src.resize(f.x_src.size());
  const double w = out_w;
  parallel_for(0, static_cast<size_t>(out_h), [&](size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < out_w; ++x) {
      const Point2 p{(x + 0.5 - out_w / 2.0) / w, (y + 0.5 - out_h / 2.0) / w};
      const Point2 q = distort_point(p, d);
      const size_t i = row * out_w + x;
      f.x_src[i] = q.x * src_w + src_w / 2.0;
      f.y_src[i] = q.y * src_w + src_h / 2.0;
    }
  });
  return f;
}

Image remap(const Image& img, const RemapField& field) {
  if (field.x_src.size() != static_cast<size_t>(field.width) * field.height ||
      field.y_src.size() != field.x_src.size()) {
    throw DomainError("remap field size does not match its dimensions");
  }
  Image out(field.width, field.height);
  const double w = img.width(), h = img.height();
  parallel_for(0, static_cast<size_t>(field.height), [&](size_t row) {
    for (int x = 0; x < field.width; ++x) {
      const size_t i = row * field.width + x;
      const double sx = field.x_src[i], sy = field.y_src[i];
      if (!(sx >= 0.0 && sx <= w && sy >= 0.0 && sy <= h)) continue;  // stays black
      out.set(x, static_cast<int>(row), sample_bilinear(img, sx, sy));
    }
  });
  return out;
}

Image resize_bilinear(const Image& img, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1) throw DomainError("resize dimensions must be positive");
  if (new_w == img.width() && new_h == img.height()) return img;
  Image out(new_w, new_h);
  const double sx = static_cast<double>(img.width()) / new_w;
  const double sy = static_cast<double>(img.height()) / new_h;
  parallel_for(0, static_cast<size_t>(new_h), [&](size_t row) {
    const double y = (row + 0.5) * sy;
    for (int x = 0; x < new_w; ++x) {
      out.set(x, static_cast<int>(row), sample_bilinear(img, (x + 0.5) * sx, y));
    }
  });
  return out;
}

Image rectify(const Image& img, const RadialDistortion& d) {
  return remap(img, build_undistort_remap(d, img.width(), img.height()));
}

}  // namespace rdist
