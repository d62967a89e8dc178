#pragma once

#include <string>
#include <vector>

#include "evalign/warp.hpp"

namespace evalign {

/// 16-bit binary PGM, affinely normalized to [0, 65535]; the recorded
/// min/max land in a sidecar JSON next to the image.
void write_pgm16(const Image& image, const std::string& path,
                 const std::string& sidecar_path);

/// ".f32": one JSON header line {"format":"f32","dtype":"f32","shape":[...]}
/// followed by row-major little-endian f32 payload.
void write_f32(const std::vector<std::size_t>& shape,
               const std::vector<double>& data, const std::string& path);
void write_f32(const Image& image, const std::string& path);

struct F32File {
  std::vector<std::size_t> shape;
  std::vector<double> data;
};
F32File read_f32(const std::string& path);

/// 8-bit PPM rendering: positive values in red, negative in blue, scaled by
/// the absolute maximum.
void write_ppm_redblue(const Image& image, const std::string& path);

}  // namespace evalign
