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

#include "sndobj/kvconfig.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sndobj {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text, const std::string& source) {
    KvConfig cfg;
    cfg.source_ = source;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(source + ":" + std::to_string(lineno) +
                                     ": expected `key = value`");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error(source + ":" + std::to_string(lineno) + ": empty key");
        }
        if (cfg.entries_.count(key)) {
            throw std::runtime_error(source + ":" + std::to_string(lineno) + ": duplicate key `" +
                                     key + "`");
        }
        cfg.entries_[key] = value;
        cfg.consumed_[key] = false;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path.string());
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_[key] = true;
    return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_[key] = true;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(source_ + ": key `" + key + "` is not a number: " + it->second);
    }
}

std::uint64_t KvConfig::get_uint(const std::string& key, std::uint64_t fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_[key] = true;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(source_ + ": key `" + key +
                                 "` is not a non-negative integer: " + it->second);
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_[key] = true;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error(source_ + ": key `" + key + "` is not a boolean: " + v);
}

std::vector<std::string> KvConfig::unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [key, value] : entries_) {
        if (!consumed_.at(key)) out.push_back(key);
    }
    return out;
}

void KvConfig::require_fully_consumed() const {
    const auto leftover = unconsumed();
    if (!leftover.empty()) {
        std::string msg = source_ + ": unknown key(s):";
        for (const auto& k : leftover) msg += " " + k;
        throw std::runtime_error(msg);
    }
}

}  // namespace sndobj
