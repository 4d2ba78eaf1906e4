#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "stochreg/vector_ops.hpp"

namespace stochreg::io {

enum class PgmFormat { Ascii, Binary };

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  /// Values mapped back to [min, max].
  RealVector pixels;
  double min = 0.0;
  double max = 0.0;
};

/// 16-bit PGM (P2 or P5). Values are mapped linearly from [min, max] to
/// [0, 65535]; min and max go into `<path>.json`.
void write_pgm(const std::filesystem::path& path, std::span<const double> pixels,
               std::size_t width, PgmFormat format = PgmFormat::Binary);

/// Reads a PGM written by write_pgm; uses the sidecar for the value range
/// when present, otherwise returns raw gray levels scaled to [0, 1].
PgmImage read_pgm(const std::filesystem::path& path);

/// CSV with header `direction,detector,value`.
void write_sinogram_csv(const std::filesystem::path& path, std::span<const RealVector> rows);
std::vector<RealVector> read_sinogram_csv(const std::filesystem::path& path);

/// One value per line under the header `index,value`.
void write_vector_csv(const std::filesystem::path& path, std::span<const double> values);
RealVector read_vector_csv(const std::filesystem::path& path);

}  // namespace stochreg::io
