#include "flicker/common/binary_io.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace flicker::io {

namespace {

constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 34;

void put(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("binary read: unexpected end of stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t get_length(std::istream& is) {
  const std::uint64_t n = get(is);
  if (n > kMaxLength) throw std::runtime_error("binary read: implausible length " + std::to_string(n));
  return n;
}

}  // namespace

void write_u64(std::ostream& os, std::uint64_t v) { put(os, v); }
void write_i64(std::ostream& os, std::int64_t v) { put(os, static_cast<std::uint64_t>(v)); }
void write_f64(std::ostream& os, double v) { put(os, std::bit_cast<std::uint64_t>(v)); }

void write_string(std::ostream& os, const std::string& s) {
  put(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_tensor(std::ostream& os, const Tensor& t) {
  put(os, t.shape().size());
  for (auto d : t.shape()) put(os, d);
  for (double v : t.data()) write_f64(os, v);
}

void write_f64s(std::ostream& os, const std::vector<double>& v) {
  put(os, v.size());
  for (double x : v) write_f64(os, x);
}

void write_i64s(std::ostream& os, const std::vector<std::int64_t>& v) {
  put(os, v.size());
  for (auto x : v) write_i64(os, x);
}

std::uint64_t read_u64(std::istream& is) { return get(is); }
std::int64_t read_i64(std::istream& is) { return static_cast<std::int64_t>(get(is)); }
double read_f64(std::istream& is) { return std::bit_cast<double>(get(is)); }

std::string read_string(std::istream& is) {
  const auto n = get_length(is);
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw std::runtime_error("binary read: unexpected end of stream");
  }
  return s;
}

Tensor read_tensor(std::istream& is) {
  const auto rank = get_length(is);
  if (rank > 8) throw std::runtime_error("binary read: tensor rank " + std::to_string(rank) + " unsupported");
  std::vector<std::size_t> shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    d = get_length(is);
    count *= d;
    if (count > kMaxLength) throw std::runtime_error("binary read: tensor too large");
  }
  std::vector<double> data(count);
  for (auto& v : data) v = read_f64(is);
  return Tensor(std::move(shape), std::move(data));
}

std::vector<double> read_f64s(std::istream& is) {
  std::vector<double> v(get_length(is));
  for (auto& x : v) x = read_f64(is);
  return v;
}

std::vector<std::int64_t> read_i64s(std::istream& is) {
  std::vector<std::int64_t> v(get_length(is));
  for (auto& x : v) x = read_i64(is);
  return v;
}

}  // namespace flicker::io
