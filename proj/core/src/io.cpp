#include "pdgan/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pdgan {

namespace {

static_assert(sizeof(double) == 8, "PDT1 requires 64-bit doubles");

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("PDT1: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("PDT1: truncated data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void write_pdt1(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write("PDT1", 4);
  put_u32(os, static_cast<std::uint32_t>(tensor.rank()));
  for (int i = 0; i < tensor.rank(); ++i)
    put_u32(os, static_cast<std::uint32_t>(tensor.dim(i)));
  for (double v : tensor.data()) put_f64(os, v);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Tensor read_pdt1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PDT1", 4) != 0)
    throw std::runtime_error("not a PDT1 file: " + path.string());
  std::uint32_t rank = get_u32(is);
  if (rank == 0 || rank > 8) throw std::runtime_error("PDT1: bad rank");
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    std::uint32_t dim = get_u32(is);
    if (dim == 0) throw std::runtime_error("PDT1: zero dimension");
    d = static_cast<int>(dim);
    count *= dim;
  }
  std::vector<double> values(count);
  for (auto& v : values) v = get_f64(is);
  return Tensor(std::move(shape), std::move(values));
}

void write_pgm(const std::filesystem::path& path, const std::vector<double>& values,
               int height, int width) {
  if (static_cast<std::size_t>(height) * width != values.size())
    throw std::invalid_argument("pgm: size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "P5\n" << width << " " << height << "\n255\n";
  for (double v : values) {
    double c = std::clamp(v, 0.0, 1.0);
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * c))));
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace pdgan
