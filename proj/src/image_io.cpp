#include "stochreg/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "json.hpp"
#include "stochreg/errors.hpp"
#include "stochreg/io.hpp"

namespace stochreg::io {

namespace {

constexpr unsigned kMaxVal = 65535;

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void write_pgm(const std::filesystem::path& path, std::span<const double> pixels,
               std::size_t width, PgmFormat format) {
  if (width == 0 || pixels.size() % width != 0) {
    throw DimensionError("write_pgm: size is not a multiple of width");
  }
  if (!all_finite(pixels)) throw ConfigError("write_pgm: image has non-finite values");
  const std::size_t height = pixels.size() / width;
  const auto [lo_it, hi_it] = std::minmax_element(pixels.begin(), pixels.end());
  const double lo = pixels.empty() ? 0.0 : *lo_it;
  const double hi = pixels.empty() ? 0.0 : *hi_it;
  const double span = hi - lo;

  std::vector<unsigned> levels(pixels.size());
  for (std::size_t j = 0; j < pixels.size(); ++j) {
    const double t = span > 0.0 ? (pixels[j] - lo) / span : 0.0;
    levels[j] = static_cast<unsigned>(std::lround(t * kMaxVal));
  }

  std::string out = (format == PgmFormat::Ascii ? "P2\n" : "P5\n") + std::to_string(width) +
                    ' ' + std::to_string(height) + '\n' + std::to_string(kMaxVal) + '\n';
  if (format == PgmFormat::Ascii) {
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        if (c) out += ' ';
        out += std::to_string(levels[r * width + c]);
      }
      out += '\n';
    }
  } else {
    for (unsigned v : levels) {
      out += static_cast<char>((v >> 8) & 0xFF);
      out += static_cast<char>(v & 0xFF);
    }
  }
  write_file(path, out);

  nlohmann::ordered_json meta;
  meta["width"] = width;
  meta["height"] = height;
  meta["maxval"] = kMaxVal;
  meta["min"] = lo;
  meta["max"] = hi;
  write_file(sidecar(path), meta.dump(2) + "\n");
}

PgmImage read_pgm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::istringstream in(data);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5") throw ConfigError(path.string() + ": not a P2/P5 PGM");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    long v = -1;
    in >> v;
    if (!in || v < 0) throw ConfigError(path.string() + ": malformed PGM header");
    return static_cast<std::size_t>(v);
  };
  PgmImage img;
  img.width = next_int();
  img.height = next_int();
  const std::size_t maxval = next_int();
  if (maxval == 0 || maxval > kMaxVal) throw ConfigError(path.string() + ": bad maxval");
  const std::size_t count = img.width * img.height;
  std::vector<unsigned> levels(count);
  if (magic == "P2") {
    for (auto& v : levels) v = static_cast<unsigned>(next_int());
  } else {
    in.get();
    const bool wide = maxval > 255;
    for (auto& v : levels) {
      const int hi = in.get();
      const int lo = wide ? in.get() : 0;
      if (!in) throw ConfigError(path.string() + ": truncated PGM data");
      v = wide ? static_cast<unsigned>((hi << 8) | lo) : static_cast<unsigned>(hi);
    }
  }
  img.min = 0.0;
  img.max = 1.0;
  if (std::filesystem::exists(sidecar(path))) {
    const auto meta = nlohmann::json::parse(read_file(sidecar(path)));
    img.min = meta.at("min").get<double>();
    img.max = meta.at("max").get<double>();
  }
  img.pixels.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    img.pixels[j] = img.min + (img.max - img.min) * static_cast<double>(levels[j]) /
                                  static_cast<double>(maxval);
  }
  return img;
}

void write_sinogram_csv(const std::filesystem::path& path, std::span<const RealVector> rows) {
  std::string out = "direction,detector,value\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t m = 0; m < rows[i].size(); ++m) {
      out += std::to_string(i) + ',' + std::to_string(m) + ',' + format_double(rows[i][m]) + '\n';
    }
  }
  write_file(path, out);
}

std::vector<RealVector> read_sinogram_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "direction,detector,value") {
    throw ConfigError(path.string() + ": expected header 'direction,detector,value'");
  }
  std::vector<RealVector> rows;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = split(lines[n], ',');
    if (f.size() != 3) throw ConfigError(path.string() + ": malformed line " + std::to_string(n + 1));
    const auto i = static_cast<std::size_t>(parse_double(f[0]));
    const auto m = static_cast<std::size_t>(parse_double(f[1]));
    if (i >= rows.size()) rows.resize(i + 1);
    if (m != rows[i].size()) throw ConfigError(path.string() + ": detectors out of order");
    rows[i].push_back(parse_double(f[2]));
  }
  return rows;
}

void write_vector_csv(const std::filesystem::path& path, std::span<const double> values) {
  std::string out = "index,value\n";
  for (std::size_t j = 0; j < values.size(); ++j) {
    out += std::to_string(j) + ',' + format_double(values[j]) + '\n';
  }
  write_file(path, out);
}

RealVector read_vector_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "index,value") {
    throw ConfigError(path.string() + ": expected header 'index,value'");
  }
  RealVector out;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = split(lines[n], ',');
    if (f.size() != 2) throw ConfigError(path.string() + ": malformed line " + std::to_string(n + 1));
    out.push_back(parse_double(f[1]));
  }
  return out;
}

}  // namespace stochreg::io
