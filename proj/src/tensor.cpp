#include "evalign/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace evalign {

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  std::size_t n = 1;
  for (std::size_t d : t.shape) n *= d;
  t.data.assign(n, 0.0);
  return t;
}

std::size_t Tensor::size() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void FeatureMap::require_finite(const char* what) const {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw ValidationError(std::string(what) + ": non-finite value");
    }
  }
}

namespace {

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

void write_tsr(const TensorMap& tensors, const std::string& path) {
  nlohmann::json manifest;
  manifest["format"] = "tsr1";
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : tensors) {
    if (tensor.size() != tensor.data.size()) {
      throw ShapeMismatch("write_tsr: shape/data mismatch for '" + name + "'");
    }
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = tensor.shape;
    entry["dtype"] = "f32";
    entry["offset"] = offset;
    manifest["tensors"].push_back(entry);
    offset += tensor.size() * 4;
  }
  std::string out = manifest.dump();
  out.push_back('\n');
  for (const auto& [name, tensor] : tensors) {
    (void)name;
    for (double v : tensor.data) put_f32(out, static_cast<float>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path);
}

TensorMap read_tsr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": missing manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad manifest: " + e.what());
  }
  if (manifest.value("format", "") != "tsr1") {
    throw ParseError(path + ": unsupported format");
  }
  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());

  TensorMap out;
  try {
    for (const auto& entry : manifest.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      if (entry.at("dtype").get<std::string>() != "f32") {
        throw ParseError(path + ": tensor '" + name + "': unsupported dtype");
      }
      Tensor t;
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = t.size();
      if (offset + n * 4 > payload.size()) {
        throw ParseError(path + ": tensor '" + name + "' overruns payload");
      }
      t.data.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        t.data[i] = get_f32(bytes + offset + i * 4);
      }
      out.emplace(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad manifest entry: " + e.what());
  }
  return out;
}

}  // namespace evalign
