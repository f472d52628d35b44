// Copyright 2026 The sndobj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sndobj/wire.hpp"

#include <bit>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace sndobj::wire {

Reader::Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

void Reader::fail(const std::string& what) const {
    throw std::runtime_error(source_ + ": " + what + " (at byte " + std::to_string(offset_) + ")");
}

void Reader::bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
    offset_ += n;
}

std::uint32_t Reader::u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double Reader::f64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | b[i];
    return std::bit_cast<double>(u);
}

std::string Reader::fixed(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
}

void Reader::expect_magic(const std::string& magic) {
    const std::string got = fixed(magic.size());
    if (got != magic) fail("bad magic, expected \"" + magic + "\"");
}

void Writer::bytes(const void* src, std::size_t n) {
    out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
}

void Writer::u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(b, 4);
}

void Writer::f64(double v) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    bytes(b, 8);
}

void Writer::str(const std::string& s) { bytes(s.data(), s.size()); }

}  // namespace sndobj::wire
