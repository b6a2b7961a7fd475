#include "mvol.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace hepato {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

struct Header {
  VoxelGrid grid;
  bool is_int16;
};

std::string header_text(const VoxelGrid& g, bool int16) {
  std::ostringstream os;
  os << "MVOL 1\n";
  os << "dims " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
  os << "spacing " << format_double(g.spacing_mm[0]) << ' ' << format_double(g.spacing_mm[1])
     << ' ' << format_double(g.spacing_mm[2]) << '\n';
  os << "origin " << format_double(g.origin_mm[0]) << ' ' << format_double(g.origin_mm[1]) << ' '
     << format_double(g.origin_mm[2]) << '\n';
  os << "dtype " << (int16 ? "int16le" : "uint8") << '\n';
  os << "END\n";
  return os.str();
}

// Reads one \n-terminated line from s at pos; throws naming `field` if
// the stream runs out.
std::string take_line(const std::string& s, std::size_t& pos, const char* field) {
  std::size_t nl = s.find('\n', pos);
  if (nl == std::string::npos) throw FormatError(std::string("MVOL: truncated header at ") + field);
  std::string line = s.substr(pos, nl - pos);
  pos = nl + 1;
  return line;
}

double parse_num(const std::string& tok, const char* field) {
  double v;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw FormatError(std::string("MVOL: bad number in ") + field);
  return v;
}

std::array<double, 3> parse_triplet(const std::string& line, const char* key) {
  std::istringstream is(line);
  std::string word;
  is >> word;
  if (word != key) throw FormatError(std::string("MVOL: expected ") + key);
  std::array<double, 3> v{};
  for (int i = 0; i < 3; ++i) {
    std::string tok;
    if (!(is >> tok)) throw FormatError(std::string("MVOL: ") + key + " needs 3 values");
    v[i] = parse_num(tok, key);
  }
  std::string rest;
  if (is >> rest) throw FormatError(std::string("MVOL: trailing data after ") + key);
  return v;
}

Header parse_header(const std::string& bytes, std::size_t& pos) {
  if (take_line(bytes, pos, "magic") != "MVOL 1") throw FormatError("MVOL: bad magic");
  Header h{};
  auto d = parse_triplet(take_line(bytes, pos, "dims"), "dims");
  for (int a = 0; a < 3; ++a) {
    if (d[a] < 1 || d[a] != std::nearbyint(d[a])) throw FormatError("MVOL: bad dims");
    h.grid.dims[a] = int(d[a]);
  }
  auto s = parse_triplet(take_line(bytes, pos, "spacing"), "spacing");
  for (int a = 0; a < 3; ++a) {
    if (!(s[a] > 0)) throw FormatError("MVOL: bad spacing");
    h.grid.spacing_mm[a] = s[a];
  }
  h.grid.origin_mm = parse_triplet(take_line(bytes, pos, "origin"), "origin");
  std::string dt = take_line(bytes, pos, "dtype");
  if (dt == "dtype int16le")
    h.is_int16 = true;
  else if (dt == "dtype uint8")
    h.is_int16 = false;
  else
    throw FormatError("MVOL: bad dtype");
  if (take_line(bytes, pos, "END") != "END") throw FormatError("MVOL: missing END");
  h.grid.validate();
  return h;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  if (!f.good() && !f.eof()) throw IoError("read failure: " + path);
  return os.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f.good()) throw IoError("write failure: " + path);
}

}  // namespace

CtVolume parse_volume(const std::string& bytes, const std::string& context) {
  std::size_t pos = 0;
  Header h = parse_header(bytes, pos);
  if (!h.is_int16) throw FormatError("MVOL: dtype uint8 is a mask, not a volume (" + context + ")");
  std::size_t n = h.grid.voxel_count();
  if (bytes.size() - pos != n * 2) throw FormatError("MVOL: payload length mismatch (" + context + ")");
  CtVolume vol{h.grid, std::vector<int16_t>(n)};
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < n; ++i) {
    uint16_t u = uint16_t(p[2 * i]) | (uint16_t(p[2 * i + 1]) << 8);
    vol.values[i] = int16_t(u);
  }
  for (int16_t v : vol.values)
    if (v < kHuMin || v > kHuMax) throw FormatError("MVOL: HU value out of range (" + context + ")");
  return vol;
}

std::string serialize_volume(const CtVolume& vol) {
  std::string out = header_text(vol.grid, true);
  std::size_t base = out.size();
  out.resize(base + vol.values.size() * 2);
  unsigned char* p = reinterpret_cast<unsigned char*>(out.data() + base);
  for (std::size_t i = 0; i < vol.values.size(); ++i) {
    uint16_t u = uint16_t(vol.values[i]);
    p[2 * i] = (unsigned char)(u & 0xff);
    p[2 * i + 1] = (unsigned char)(u >> 8);
  }
  return out;
}

std::string serialize_mask(const BinaryMask& mask) {
  std::string out = header_text(mask.grid, false);
  out.append(reinterpret_cast<const char*>(mask.bits.data()), mask.bits.size());
  return out;
}

CtVolume read_volume(const std::string& path) { return parse_volume(slurp(path), path); }

void write_volume(const CtVolume& vol, const std::string& path) {
  if (vol.values.size() != vol.grid.voxel_count())
    throw std::invalid_argument("write_volume: value count does not match grid");
  spit(path, serialize_volume(vol));
}

BinaryMask read_mask(const std::string& path) {
  std::string bytes = slurp(path);
  std::size_t pos = 0;
  Header h = parse_header(bytes, pos);
  if (h.is_int16) throw FormatError("MVOL: dtype int16le is a volume, not a mask (" + path + ")");
  std::size_t n = h.grid.voxel_count();
  if (bytes.size() - pos != n) throw FormatError("MVOL: payload length mismatch (" + path + ")");
  BinaryMask mask{h.grid, std::vector<uint8_t>(n)};
  std::memcpy(mask.bits.data(), bytes.data() + pos, n);
  for (uint8_t b : mask.bits)
    if (b > 1) throw FormatError("MVOL: mask payload byte > 1 (" + path + ")");
  return mask;
}

void write_mask(const BinaryMask& mask, const std::string& path) {
  if (mask.bits.size() != mask.grid.voxel_count())
    throw std::invalid_argument("write_mask: bit count does not match grid");
  for (uint8_t b : mask.bits)
    if (b > 1) throw std::invalid_argument("write_mask: mask bytes must be 0 or 1");
  spit(path, serialize_mask(mask));
}

}  // namespace hepato
