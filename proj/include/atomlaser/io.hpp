#pragma once

// File plumbing: key=value config files, CSV writers with fixed formatting
// (artifacts must be byte-reproducible), FNV-1a checksums and the run
// manifest.  Timing fields live only in the manifest and are excluded from
// checksumming.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "atomlaser/core.hpp"

namespace atomlaser {

namespace fs = std::filesystem;

// Parses "key = value" lines; '#' starts a comment; blank lines ignored.
inline std::map<std::string, std::string> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + " is not key = value: '" +
                               t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty() || val.empty())
            throw config_error("config line " + std::to_string(lineno) + " has empty key or value");
        if (kv.count(key)) throw config_error("duplicate config key: " + key);
        kv[key] = val;
    }
    return kv;
}

inline RunConfig load_config(const fs::path& path) { return validate_config(read_config_file(path)); }

// Fixed shortest-roundtrip formatting so reruns are byte-identical.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvColumn {
    std::string name;
    const std::vector<double>* data;
};

inline void write_csv(const fs::path& path, const std::vector<CsvColumn>& cols) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write " + path.string());
    for (std::size_t c = 0; c < cols.size(); ++c)
        out << cols[c].name << (c + 1 < cols.size() ? "," : "\n");
    std::size_t n = cols.empty() ? 0 : cols[0].data->size();
    for (const auto& c : cols)
        if (c.data->size() != n) throw config_error("write_csv: ragged columns");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out << format_double((*cols[c].data)[i]) << (c + 1 < cols.size() ? "," : "\n");
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot checksum " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    std::array<char, 65536> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        std::streamsize got = in.gcount();
        if (got > 0) h = fnv1a64(buf.data(), static_cast<std::size_t>(got), h);
    }
    return h;
}

inline std::string checksum_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Canonical serialization of a config map; its checksum guards checkpoint
// resume against config drift.
inline std::uint64_t config_checksum(const std::map<std::string, std::string>& kv) {
    std::string canon;
    for (const auto& [k, v] : kv) {
        canon += k;
        canon += '=';
        canon += v;
        canon += '\n';
    }
    return fnv1a64(canon.data(), canon.size());
}

struct ManifestEntry {
    std::string file;       // relative to the output directory
    std::string checksum;   // hex fnv1a64 of file bytes
};

struct Manifest {
    std::string subcommand;
    std::string config_path;
    std::string config_checksum_hex;
    fs::path base; // artifact paths are stored relative to this directory
    std::vector<ManifestEntry> artifacts;
    std::vector<std::string> status; // per-run status lines (started/finished/failed)
    double wall_seconds = 0.0;       // excluded from artifact checksums by construction

    void add_file(const fs::path& file) {
        artifacts.push_back({fs::relative(file, base).string(),
                             checksum_hex(file_checksum(file))});
    }

    void write(const fs::path& path) const {
        nlohmann::ordered_json j;
        j["subcommand"] = subcommand;
        j["config"] = config_path;
        j["config_checksum"] = config_checksum_hex;
        nlohmann::ordered_json arts = nlohmann::ordered_json::array();
        for (const auto& a : artifacts) {
            nlohmann::ordered_json e;
            e["file"] = a.file;
            e["fnv1a64"] = a.checksum;
            arts.push_back(e);
        }
        j["artifacts"] = arts;
        j["status"] = status;
        j["wall_seconds"] = wall_seconds;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw config_error("cannot write " + path.string());
        out << j.dump(2) << "\n";
    }
};

} // namespace atomlaser
