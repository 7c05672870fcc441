#include "radar/io_util.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace radar {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(content.data(), std::streamsize(content.size()));
  if (!out) throw std::runtime_error("failed to write file: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::string out = "RDT1";
  out.push_back(char(t.rank()));
  auto put_u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
  };
  for (int d : t.shape()) put_u32(uint32_t(d));
  for (double v : t.values()) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
  }
  write_text_file(path, out);
}

Tensor read_tensor_file(const std::string& path) {
  const std::string data = read_text_file(path);
  size_t pos = 0;
  auto need = [&](size_t n) {
    if (pos + n > data.size()) throw std::runtime_error("truncated tensor file: " + path);
  };
  need(5);
  if (data.compare(0, 4, "RDT1") != 0)
    throw std::runtime_error("not a tensor file (bad magic): " + path);
  pos = 4;
  const int rank = int(uint8_t(data[pos++]));
  Shape shape(rank);
  int64_t numel = 1;
  for (int d = 0; d < rank; ++d) {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(data[pos + i])) << (8 * i);
    pos += 4;
    shape[size_t(d)] = int(v);
    numel *= v;
  }
  std::vector<double> vals(static_cast<size_t>(numel));
  for (int64_t k = 0; k < numel; ++k) {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= uint64_t(uint8_t(data[pos + i])) << (8 * i);
    pos += 8;
    vals[size_t(k)] = std::bit_cast<double>(bits);
  }
  if (pos != data.size()) throw std::runtime_error("trailing bytes in tensor file: " + path);
  return Tensor(shape, std::move(vals));
}

}  // namespace radar
