#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "flicker/tensor/tensor.hpp"

namespace flicker::io {

// Little-endian fixed-width encoding; every reader throws std::runtime_error
// on a short read so a truncated file never yields partial state.
void write_u64(std::ostream& os, std::uint64_t v);
void write_i64(std::ostream& os, std::int64_t v);
void write_f64(std::ostream& os, double v);
void write_string(std::ostream& os, const std::string& s);
void write_tensor(std::ostream& os, const Tensor& t);
void write_f64s(std::ostream& os, const std::vector<double>& v);
void write_i64s(std::ostream& os, const std::vector<std::int64_t>& v);

std::uint64_t read_u64(std::istream& is);
std::int64_t read_i64(std::istream& is);
double read_f64(std::istream& is);
std::string read_string(std::istream& is);
Tensor read_tensor(std::istream& is);
std::vector<double> read_f64s(std::istream& is);
std::vector<std::int64_t> read_i64s(std::istream& is);

}  // namespace flicker::io
