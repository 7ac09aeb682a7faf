// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>

// Little-endian primitives shared by the task fixture and checkpoint formats.
namespace metalearn::binary {

void write_u32(std::ostream& out, std::uint32_t v);
void write_i32(std::ostream& out, std::int32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_f64s(std::ostream& out, std::span<const double> values);

std::uint32_t read_u32(std::istream& in);
std::int32_t read_i32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

}  // namespace metalearn::binary
