// SPDX-License-Identifier: Apache-2.0
#include "metalearn/binary_io.hpp"

#include <array>
#include <bit>
#include <istream>
#include <ostream>

#include "metalearn/errors.hpp"

namespace metalearn::binary {
namespace {

template <std::size_t N>
void put(std::ostream& out, std::uint64_t v) {
    std::array<char, N> bytes{};
    for (std::size_t i = 0; i < N; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    out.write(bytes.data(), N);
}

template <std::size_t N>
std::uint64_t get(std::istream& in) {
    std::array<unsigned char, N> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), N);
    if (in.gcount() != static_cast<std::streamsize>(N)) {
        throw DataError("binary record truncated");
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < N; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { put<4>(out, v); }
void write_i32(std::ostream& out, std::int32_t v) { put<4>(out, static_cast<std::uint32_t>(v)); }
void write_u64(std::ostream& out, std::uint64_t v) { put<8>(out, v); }
void write_f64(std::ostream& out, double v) { put<8>(out, std::bit_cast<std::uint64_t>(v)); }

void write_f64s(std::ostream& out, std::span<const double> values) {
    for (double v : values) write_f64(out, v);
}

std::uint32_t read_u32(std::istream& in) { return static_cast<std::uint32_t>(get<4>(in)); }
std::int32_t read_i32(std::istream& in) {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(get<4>(in)));
}
std::uint64_t read_u64(std::istream& in) { return get<8>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(get<8>(in)); }

}  // namespace metalearn::binary
