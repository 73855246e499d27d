#include "slatelab/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace slatelab {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'A', 'T', 'E', 'C', 'K', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(os, bits);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  std::uint64_t bits = read_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  std::uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw DataError("checkpoint: truncated string");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const ParamStore& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("checkpoint: cannot write " + path);
  os.write(kMagic, 8);
  write_u32(os, kFormatVersion);
  write_string(os, kind);
  write_u64(os, params.version());
  write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params.entries()) {
    write_string(os, name);
    write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) write_u64(os, d);
    for (double x : t.data) write_f64(os, x);
  }
  if (!os) throw DataError("checkpoint: write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint32_t version = read_u32(is);
  if (version != kFormatVersion)
    throw DataError("checkpoint: unsupported format version " +
                    std::to_string(version));
  Checkpoint ck;
  ck.kind = read_string(is);
  std::uint64_t pversion = read_u64(is);
  std::uint32_t count = read_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(is);
    std::uint32_t ndim = read_u32(is);
    std::vector<std::size_t> shape(ndim);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<std::size_t>(read_u64(is));
      numel *= shape[d];
    }
    std::vector<double> data(numel);
    for (std::size_t j = 0; j < numel; ++j) data[j] = read_f64(is);
    ck.params.create(name, Tensor(std::move(shape), std::move(data)));
  }
  ck.params.set_version(pversion);
  return ck;
}

}  // namespace slatelab
