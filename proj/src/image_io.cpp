#include "hlic/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "hlic/error.hpp"

namespace hlic {

namespace {

struct PnmParser {
  std::ifstream in;
  std::string path;
  int64_t offset = 0;

  explicit PnmParser(const std::string& p)
      : in(p, std::ios::binary), path(p) {
    if (!in) throw InvalidInput("image: cannot open '" + p + "'");
  }

  [[noreturn]] void fail(const std::string& what) {
    throw InvalidInput("image '" + path + "': " + what + " at byte " +
                       std::to_string(offset));
  }

  int get() {
    const int c = in.get();
    if (c != EOF) ++offset;
    return c;
  }

  // Skips whitespace and '#' comment lines between header tokens.
  void skip_separators() {
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        while (c != EOF && c != '\n') c = get();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
      } else {
        return;
      }
    }
  }

  int read_header_int() {
    skip_separators();
    int c = in.peek();
    if (c < '0' || c > '9') fail("expected integer header field");
    int64_t value = 0;
    while (c >= '0' && c <= '9') {
      value = value * 10 + (get() - '0');
      if (value > 1 << 30) fail("header field out of range");
      c = in.peek();
    }
    return static_cast<int>(value);
  }
};

}  // namespace

Image read_image(const std::string& path) {
  PnmParser p(path);
  const int m0 = p.get(), m1 = p.get();
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
    p.fail("not a binary PGM (P5) or PPM (P6) file");
  }
  const bool color = m1 == '6';
  const int width = p.read_header_int();
  const int height = p.read_header_int();
  const int maxval = p.read_header_int();
  if (width < 1 || height < 1) p.fail("invalid dimensions");
  if (maxval != 255) {
    p.fail("maxval " + std::to_string(maxval) + " unsupported (8-bit only)");
  }
  // Exactly one whitespace byte separates the header from the payload.
  const int sep = p.get();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
    p.fail("missing whitespace before payload");
  }

  const size_t n = static_cast<size_t>(width) * height;
  std::vector<unsigned char> buf(color ? 3 * n : n);
  p.in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  const size_t got = static_cast<size_t>(p.in.gcount());
  p.offset += static_cast<int64_t>(got);
  if (got != buf.size()) p.fail("truncated payload");

  Image img = Image::zeros(width, height);
  if (color) {
    for (size_t i = 0; i < n; ++i) {
      img.data[i] = 0.299 * buf[3 * i] + 0.587 * buf[3 * i + 1] +
                    0.114 * buf[3 * i + 2];
    }
  } else {
    for (size_t i = 0; i < n; ++i) img.data[i] = buf[i];
  }
  return img;
}

void write_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("image: cannot write '" + path + "'");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    double v = std::round(img.data[i] * 255.0 / img.peak);
    if (v < 0.0) v = 0.0;
    if (v > 255.0) v = 255.0;
    buf[i] = static_cast<unsigned char>(v);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw InvalidInput("image: write failed for '" + path + "'");
}

}  // namespace hlic
