#include "evalign/event_io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

namespace evalign {

namespace {

constexpr char kBinaryMagic[4] = {'E', 'V', 'B', '1'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(v & 0xff));
    v >>= 8;
  }
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

template <typename T>
bool parse_int(std::string_view tok, T& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

[[noreturn]] void fail_parse(const std::string& path, std::size_t line,
                             const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

EventStream read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  EventStream stream;
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) fail_parse(path, 1, "missing header");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::istringstream hs(line);
    std::string magic;
    unsigned w = 0, h = 0;
    if (!(hs >> magic >> w >> h) || magic != "evt1" || w == 0 || h == 0 ||
        w > 0xffff || h > 0xffff) {
      fail_parse(path, lineno, "bad header, expected 'evt1 <width> <height>'");
    }
    std::string rest;
    if (hs >> rest) fail_parse(path, lineno, "trailing tokens in header");
    stream.width = static_cast<std::uint16_t>(w);
    stream.height = static_cast<std::uint16_t>(h);
  }

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) fail_parse(path, lineno, "empty line");
    std::string_view sv(line);
    std::size_t c1 = sv.find(',');
    std::size_t c2 = sv.find(',', c1 == std::string_view::npos ? c1 : c1 + 1);
    std::size_t c3 = sv.find(',', c2 == std::string_view::npos ? c2 : c2 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
        c3 == std::string_view::npos ||
        sv.find(',', c3 + 1) != std::string_view::npos) {
      fail_parse(path, lineno, "expected 't,x,y,p'");
    }
    Event e;
    std::uint64_t t = 0;
    std::uint32_t x = 0, y = 0;
    int p = 0;
    if (!parse_int(sv.substr(0, c1), t))
      fail_parse(path, lineno, "bad timestamp");
    if (!parse_int(sv.substr(c1 + 1, c2 - c1 - 1), x))
      fail_parse(path, lineno, "bad x");
    if (!parse_int(sv.substr(c2 + 1, c3 - c2 - 1), y))
      fail_parse(path, lineno, "bad y");
    if (!parse_int(sv.substr(c3 + 1), p))
      fail_parse(path, lineno, "bad polarity");
    if (p != 1 && p != -1 && p != 0)
      fail_parse(path, lineno, "polarity must be 1, -1 or 0");
    if (x >= stream.width || y >= stream.height) {
      throw OutOfBounds(path + ":" + std::to_string(lineno) + ": pixel (" +
                        std::to_string(x) + "," + std::to_string(y) +
                        ") outside declared " + std::to_string(stream.width) +
                        "x" + std::to_string(stream.height));
    }
    e.t = t;
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.p = static_cast<std::int8_t>(p == 0 ? -1 : p);  // 0 aliases -1 on disk
    stream.events.push_back(e);
  }
  return stream;
}

EventStream read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw ParseError(path + ": truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, kBinaryMagic, 4) != 0)
    throw ParseError(path + ": bad magic, expected EVB1");

  EventStream stream;
  stream.width = get_u16(p + 4);
  stream.height = get_u16(p + 6);
  const std::uint64_t count = get_u64(p + 8);
  if (stream.width == 0 || stream.height == 0)
    throw ParseError(path + ": zero sensor dimension");
  if (bytes.size() != 16 + count * 16)
    throw ParseError(path + ": size mismatch, expected " +
                     std::to_string(16 + count * 16) + " bytes, got " +
                     std::to_string(bytes.size()));

  stream.events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const unsigned char* r = p + 16 + i * 16;
    Event e;
    e.t = get_u64(r);
    e.x = get_u16(r + 8);
    e.y = get_u16(r + 10);
    const auto pol = static_cast<std::int8_t>(r[12]);
    if (pol != 1 && pol != -1)
      throw ParseError(path + ": record " + std::to_string(i) +
                       ": polarity must be -1 or +1");
    if (r[13] != 0 || r[14] != 0 || r[15] != 0)
      throw ParseError(path + ": record " + std::to_string(i) +
                       ": nonzero padding");
    if (e.x >= stream.width || e.y >= stream.height)
      throw OutOfBounds(path + ": record " + std::to_string(i) +
                        ": pixel outside declared sensor size");
    e.p = pol;
    stream.events.push_back(e);
  }
  return stream;
}

void write_text(const EventStream& stream, const std::string& path) {
  std::string out;
  out.reserve(32 + stream.size() * 16);
  out += "evt1 " + std::to_string(stream.width) + " " +
         std::to_string(stream.height) + "\n";
  for (const Event& e : stream.events) {
    out += std::to_string(e.t);
    out.push_back(',');
    out += std::to_string(e.x);
    out.push_back(',');
    out += std::to_string(e.y);
    out.push_back(',');
    out += (e.p > 0 ? "1" : "-1");
    out.push_back('\n');
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path);
}

void write_binary(const EventStream& stream, const std::string& path) {
  std::string out;
  out.reserve(16 + stream.size() * 16);
  out.append(kBinaryMagic, 4);
  put_u16(out, stream.width);
  put_u16(out, stream.height);
  put_u64(out, stream.size());
  for (const Event& e : stream.events) {
    put_u64(out, e.t);
    put_u16(out, e.x);
    put_u16(out, e.y);
    out.push_back(static_cast<char>(e.p));
    out.append(3, '\0');
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace

EventFormat event_format_from_path(const std::string& path) {
  if (path.size() >= 4) {
    const std::string ext = path.substr(path.size() - 4);
    if (ext == ".evt") return EventFormat::Text;
    if (ext == ".evb") return EventFormat::Binary;
  }
  throw ValidationError("unrecognized event file extension: " + path +
                        " (expected .evt or .evb)");
}

EventStream read_events(const std::string& path, EventFormat format) {
  EventStream stream = format == EventFormat::Text ? read_text(path)
                                                   : read_binary(path);
  if (!stream.empty()) {
    stream.window_start = stream.events.front().t;
    stream.window_end = stream.events.back().t;
    if (stream.window_end == stream.window_start) ++stream.window_end;
  }
  validate(stream);
  return stream;
}

EventStream read_events(const std::string& path) {
  return read_events(path, event_format_from_path(path));
}

void write_events(const EventStream& stream, const std::string& path,
                  EventFormat format) {
  validate(stream);
  if (format == EventFormat::Text) {
    write_text(stream, path);
  } else {
    write_binary(stream, path);
  }
}

void write_events(const EventStream& stream, const std::string& path) {
  write_events(stream, path, event_format_from_path(path));
}

}  // namespace evalign
