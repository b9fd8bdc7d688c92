#pragma once

// Output plumbing: EULB binary snapshots, CSV tables, key=value blocks,
// SHA-256 checksums and write-then-rename file commits.
//
// EULB frame layout (little endian):
//   0  "EULB"
//   4  u32 version (1)
//   8  u32 nx
//  12  u32 ny
//  16  u32 count (number of field blocks)
//  20  4 zero bytes (keeps the time 8-byte aligned)
//  24  f64 time
//  32  count blocks of nx * ny f64 samples, row-major (index i * ny + j)
// A file is a sequence of frames.

#include "eulerlab/errors.hpp"
#include "eulerlab/fft.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <unistd.h>
#include <utility>
#include <vector>

namespace eulerlab {

inline constexpr std::uint32_t kEulbVersion = 1;
inline constexpr std::size_t kEulbHeaderBytes = 32;

struct EulbFrame {
    std::uint32_t nx = 0, ny = 0;
    double time = 0.0;
    std::vector<RealVec> blocks;  // each of size nx * ny
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

inline std::uint32_t get_u32(std::string_view s, std::size_t at) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + b])) << (8 * b);
    return v;
}

inline double get_f64(std::string_view s, std::size_t at) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + b])) << (8 * b);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

inline void append_eulb(std::string& out, const EulbFrame& f) {
    const std::size_t n = static_cast<std::size_t>(f.nx) * f.ny;
    for (const auto& b : f.blocks) require(b.size() == n, "EULB block size does not match nx * ny");
    out.append("EULB", 4);
    detail::put_u32(out, kEulbVersion);
    detail::put_u32(out, f.nx);
    detail::put_u32(out, f.ny);
    detail::put_u32(out, static_cast<std::uint32_t>(f.blocks.size()));
    detail::put_u32(out, 0);
    detail::put_f64(out, f.time);
    for (const auto& b : f.blocks)
        for (double v : b) detail::put_f64(out, v);
}

inline std::vector<EulbFrame> decode_eulb(std::string_view s) {
    std::vector<EulbFrame> frames;
    std::size_t at = 0;
    while (at < s.size()) {
        if (s.size() - at < kEulbHeaderBytes) throw LabError("EULB: truncated header");
        if (s.substr(at, 4) != "EULB") throw LabError("EULB: bad magic");
        if (detail::get_u32(s, at + 4) != kEulbVersion) throw LabError("EULB: unsupported version");
        EulbFrame f;
        f.nx = detail::get_u32(s, at + 8);
        f.ny = detail::get_u32(s, at + 12);
        const std::uint32_t count = detail::get_u32(s, at + 16);
        f.time = detail::get_f64(s, at + 24);
        at += kEulbHeaderBytes;
        const std::size_t n = static_cast<std::size_t>(f.nx) * f.ny;
        if ((s.size() - at) / 8 < n * count) throw LabError("EULB: truncated data");
        for (std::uint32_t c = 0; c < count; ++c) {
            RealVec b(n);
            for (std::size_t i = 0; i < n; ++i) b[i] = detail::get_f64(s, at + 8 * i);
            at += 8 * n;
            f.blocks.push_back(std::move(b));
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

/// Fixed 17-significant-digit decimal, so values round-trip exactly.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvTable {
public:
    CsvTable() = default;
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(std::vector<double> row) {
        require(row.size() == columns_.size(), "CSV row width does not match the header");
        rows_.push_back(std::move(row));
    }

    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }

    std::vector<double> column(std::string_view name) const {
        for (std::size_t c = 0; c < columns_.size(); ++c)
            if (columns_[c] == name) {
                std::vector<double> out;
                out.reserve(rows_.size());
                for (const auto& r : rows_) out.push_back(r[c]);
                return out;
            }
        throw LabError("no CSV column named " + std::string(name));
    }

    std::string str() const {
        std::string out;
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            if (c) out += ',';
            out += columns_[c];
        }
        out += '\n';
        for (const auto& r : rows_) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                if (c) out += ',';
                out += format_double(r[c]);
            }
            out += '\n';
        }
        return out;
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

/// Ordered key=value block, one pair per line.
class KeyValues {
public:
    void set(const std::string& key, const std::string& value) {
        for (auto& kv : items_)
            if (kv.first == key) {
                kv.second = value;
                return;
            }
        items_.emplace_back(key, value);
    }
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void set(const std::string& key, double value) { set(key, format_double(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

    const std::string* find(const std::string& key) const {
        for (const auto& kv : items_)
            if (kv.first == key) return &kv.second;
        return nullptr;
    }
    const std::string& at(const std::string& key) const {
        if (const auto* v = find(key)) return *v;
        throw LabError("missing key " + key);
    }
    double number(const std::string& key) const { return std::stod(at(key)); }

    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

    std::string str() const {
        std::string out;
        for (const auto& [k, v] : items_) out += k + " = " + v + "\n";
        return out;
    }

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

inline std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
        throw LabError("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw LabError("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a temporary sibling and renames it over `p`, so readers never see
/// a partial file.
inline void atomic_write(const std::filesystem::path& p, std::string_view data) {
    const auto tmp = p.parent_path() / ("." + p.filename().string() + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw LabError("cannot create " + tmp.string());
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) throw LabError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, p, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw LabError("cannot rename into " + p.string());
    }
}

}  // namespace eulerlab
