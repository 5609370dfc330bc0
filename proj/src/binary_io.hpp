// SPDX-License-Identifier: Apache-2.0
//
// wbhb - wideband mm-Wave hybrid beamforming toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Explicit little-endian encoding for the binary file formats.

#ifndef WBHB_SRC_BINARY_IO_HPP
#define WBHB_SRC_BINARY_IO_HPP

#include "wbhb/errors.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace wbhb::io {

template <typename U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> b;
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), b.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> b;
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size()))
    throw FormatError("unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

inline void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_le(os, v); }
inline void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
inline std::uint64_t get_u64(std::istream& is) { return get_le<std::uint64_t>(is); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_le<std::uint32_t>(is)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

inline void put_magic(std::ostream& os, const char (&m)[5]) { os.write(m, 4); }

inline void expect_magic(std::istream& is, const char (&m)[5], const std::string& what) {
  char b[4];
  if (!is.read(b, 4) || std::string(b, 4) != std::string(m, 4))
    throw FormatError(what + ": bad magic, expected \"" + std::string(m, 4) + "\"");
}

}  // namespace wbhb::io

#endif  // WBHB_SRC_BINARY_IO_HPP
