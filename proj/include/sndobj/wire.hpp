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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace sndobj::wire {

// Little-endian primitives with byte-offset tracking so a malformed file can
// be reported with the exact position that failed to parse.
class Reader {
public:
    Reader(std::istream& in, std::string source);

    std::uint32_t u32();
    double f64();
    void bytes(void* dst, std::size_t n);
    std::string fixed(std::size_t n);
    void expect_magic(const std::string& magic);

    std::uint64_t offset() const { return offset_; }
    [[noreturn]] void fail(const std::string& what) const;

private:
    std::istream& in_;
    std::string source_;
    std::uint64_t offset_ = 0;
};

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v);
    void f64(double v);
    void bytes(const void* src, std::size_t n);
    void str(const std::string& s);  // raw bytes, no length prefix

private:
    std::ostream& out_;
};

}  // namespace sndobj::wire
