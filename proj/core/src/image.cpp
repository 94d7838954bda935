#include "focuslab/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "focuslab/error.hpp"

namespace focuslab {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw InvalidArgument("image dimensions must be non-negative");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0 || pixels_.size() != static_cast<std::size_t>(width) * height)
    throw InvalidArgument("pixel buffer does not match image dimensions");
}

double Image::clamped(int x, int y) const noexcept {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return pixels_[static_cast<std::size_t>(y) * width_ + x];
}

Image translate(const Image& image, int dx, int dy) {
  if (dx == 0 && dy == 0) return image;
  Image out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) out.at(x, y) = image.clamped(x - dx, y - dy);
  return out;
}

Image quantize8(const Image& image) {
  Image out = image;
  for (double& v : out.pixels()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

int parse_header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string token = next_token(in);
  try {
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size() || value <= 0) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad PGM header field '" + token + "'");
  }
}

} // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image " + path.string());
  if (next_token(in) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5) file");
  const int width = parse_header_int(in, path);
  const int height = parse_header_int(in, path);
  const int maxval = parse_header_int(in, path);
  if (maxval > 255) throw FormatError(path.string() + ": only 8-bit PGM is supported");

  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw FormatError(path.string() + ": truncated pixel data");

  std::vector<double> pixels(raw.size());
  std::transform(raw.begin(), raw.end(), pixels.begin(),
                 [maxval](unsigned char v) { return static_cast<double>(v) / maxval; });
  return Image(width, height, std::move(pixels));
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) throw InvalidArgument("cannot write an empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> raw(image.size());
  std::transform(image.pixels().begin(), image.pixels().end(), raw.begin(), [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

} // namespace focuslab
