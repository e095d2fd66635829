#include "vcloc/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vcloc/error.hpp"

namespace vcloc {

Image::Image(int width, int height, float fill)
    : width_(std::max(0, width)),
      height_(std::max(0, height)),
      data_(static_cast<std::size_t>(width_) * height_, fill) {}

float Image::at_clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return (*this)(x, y);
}

Image Image::crop(int x, int y, int w, int h) const {
  Image out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out(c, r) = (*this)(x + c, y + r);
  }
  return out;
}

Image downsample2(const Image& img) {
  Image out(img.width() / 2, img.height() / 2);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out(x, y) = 0.25f * (img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) + img(2 * x, 2 * y + 1) +
                           img(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  throw Error(ErrorCode::ParseError, "truncated PGM header");
}

int parse_int(const std::string& s) {
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad PGM header field '" + s + "'");
  }
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2") throw Error(ErrorCode::ParseError, "not a PGM file");
  const int w = parse_int(next_token(in));
  const int h = parse_int(next_token(in));
  const int maxval = parse_int(next_token(in));
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(ErrorCode::ParseError, "bad PGM dimensions");
  }
  Image img(w, h);
  const float scale = 1.0f / static_cast<float>(maxval);
  if (magic == "P2") {
    for (int i = 0; i < w * h; ++i) {
      int v = 0;
      if (!(in >> v)) throw Error(ErrorCode::ParseError, "truncated PGM data");
      img(i % w, i / w) = static_cast<float>(v) * scale;
    }
    return img;
  }
  in.get();  // single whitespace after maxval
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw Error(ErrorCode::ParseError, "truncated PGM data");
  }
  for (int i = 0; i < w * h; ++i) {
    const int v = bytes == 1 ? buf[i] : (buf[2 * i] << 8) | buf[2 * i + 1];
    img(i % w, i / w) = static_cast<float>(v) * scale;
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (float v : img.data()) {
    const long q = std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f);
    out.put(static_cast<char>(q));
  }
}

}  // namespace vcloc
