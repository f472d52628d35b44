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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sndobj {

// Flat `key = value` config file. '#' starts a comment; blank lines are
// skipped. Keys must be consumed by the command so typos surface as errors.
class KvConfig {
public:
    static KvConfig parse_file(const std::filesystem::path& path);
    static KvConfig parse_string(const std::string& text, const std::string& source = "<string>");

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key, double fallback);
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);

    /// Keys present in the file but never consumed by a getter.
    std::vector<std::string> unconsumed() const;
    void require_fully_consumed() const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::map<std::string, bool> consumed_;
    std::string source_;
};

}  // namespace sndobj
