#include "evalign/image_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace evalign {

namespace {

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path);
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void write_pgm16(const Image& image, const std::string& path,
                 const std::string& sidecar_path) {
  const double lo = image.min();
  const double hi = image.max();
  const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;

  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n65535\n";
  out.reserve(out.size() + image.data.size() * 2);
  for (double v : image.data) {
    const auto q = static_cast<std::uint16_t>(
        std::lround((v - lo) * scale));
    out.push_back(static_cast<char>(q >> 8));  // PGM samples are big-endian
    out.push_back(static_cast<char>(q & 0xff));
  }
  write_bytes(path, out);

  nlohmann::json side;
  side["schema"] = "evalign/1";
  side["min"] = lo;
  side["max"] = hi;
  side["width"] = image.width;
  side["height"] = image.height;
  write_bytes(sidecar_path, side.dump(2) + "\n");
}

void write_f32(const std::vector<std::size_t>& shape,
               const std::vector<double>& data, const std::string& path) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data.size()) throw ShapeMismatch("write_f32: shape/data mismatch");
  nlohmann::json header;
  header["format"] = "f32";
  header["dtype"] = "f32";
  header["shape"] = shape;
  std::string out = header.dump();
  out.push_back('\n');
  for (double v : data) put_f32(out, static_cast<float>(v));
  write_bytes(path, out);
}

void write_f32(const Image& image, const std::string& path) {
  write_f32({static_cast<std::size_t>(image.height),
             static_cast<std::size_t>(image.width)},
            image.data, path);
}

F32File read_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": missing header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad header: " + e.what());
  }
  if (j.value("format", "") != "f32" || j.value("dtype", "") != "f32") {
    throw ParseError(path + ": unsupported format");
  }
  F32File out;
  out.shape = j.at("shape").get<std::vector<std::size_t>>();
  std::size_t n = 1;
  for (std::size_t d : out.shape) n *= d;
  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (payload.size() != n * 4) {
    throw ParseError(path + ": payload size mismatch");
  }
  out.data.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < n; ++i) out.data[i] = get_f32(p + i * 4);
  return out;
}

void write_ppm_redblue(const Image& image, const std::string& path) {
  double peak = 0.0;
  for (double v : image.data) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? 255.0 / peak : 0.0;

  std::string out = "P6\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.data.size() * 3);
  for (double v : image.data) {
    const auto q =
        static_cast<unsigned char>(std::lround(std::abs(v) * scale));
    if (v >= 0.0) {
      out.push_back(static_cast<char>(q));
      out.push_back('\0');
      out.push_back('\0');
    } else {
      out.push_back('\0');
      out.push_back('\0');
      out.push_back(static_cast<char>(q));
    }
  }
  write_bytes(path, out);
}

}  // namespace evalign
