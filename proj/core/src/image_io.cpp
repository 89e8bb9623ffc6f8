#include "dsva/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "dsva/errors.hpp"
#include "dsva/ioutil.hpp"

namespace dsva {
namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(in.get()));
      return tok;
    }
  }
  return tok;
}

}  // namespace

ImageTensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  if (next_token(in) != "P6") throw IoError("not a binary PPM (P6): " + path.string());
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token(in));
    height = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw IoError("malformed PPM header: " + path.string());
  }
  if (width <= 0 || height <= 0 || maxval != 255)
    throw IoError("unsupported PPM geometry (need maxval 255): " + path.string());
  in.get();  // single whitespace after maxval

  const std::size_t count = static_cast<std::size_t>(width) * height * 3;
  std::vector<std::uint8_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count)
    throw IoError("truncated PPM payload: " + path.string());

  ImageTensor img = ImageTensor::zeros(height, width, 3);
  for (std::size_t i = 0; i < count; ++i) img.values[i] = raw[i] / 255.0;
  return img;
}

void write_ppm(const ImageTensor& image, const std::filesystem::path& path) {
  if (image.channels != 3) throw ShapeError("write_ppm requires a 3-channel image");
  std::ostringstream out;
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (double v : image.values) {
    const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(clamped * 255.0))));
  }
  write_file_atomic(path, out.str());
}

ImageTensor resize_bilinear(const ImageTensor& image, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0)
    throw ShapeError("resize target must be positive");
  ImageTensor out = ImageTensor::zeros(out_height, out_width, image.channels);
  const double scale_y = static_cast<double>(image.height) / out_height;
  const double scale_x = static_cast<double>(image.width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    double sy = (y + 0.5) * scale_y - 0.5;
    if (sy < 0) sy = 0;
    if (sy > image.height - 1) sy = image.height - 1;
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = y0 + 1 < image.height ? y0 + 1 : y0;
    const double wy = sy - y0;
    for (int x = 0; x < out_width; ++x) {
      double sx = (x + 0.5) * scale_x - 0.5;
      if (sx < 0) sx = 0;
      if (sx > image.width - 1) sx = image.width - 1;
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = x0 + 1 < image.width ? x0 + 1 : x0;
      const double wx = sx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
        const double bot = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

}  // namespace dsva
