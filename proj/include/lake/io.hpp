#pragma once

// CSV output at 17 significant digits, git-style content hashes and the JSON
// run manifest.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lake/error.hpp"

namespace lake::io {

using json = nlohmann::json;

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size())
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    template <class... T>
    void row(const T&... values)
    {
        require(sizeof...(T) == columns_, ErrorKind::precondition, "CSV row width does not match header");
        std::size_t i = 0;
        ((out_ << (i++ ? "," : "") << cell(values)), ...);
        out_ << '\n';
    }

    void row(const std::vector<double>& values)
    {
        require(values.size() == columns_, ErrorKind::precondition, "CSV row width does not match header");
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << format_double(values[i]);
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::size_t columns_;
    std::ostringstream out_;
};

/// SHA-1 of "blob <size>\0<content>", as git hash-object prints it.
inline std::string git_blob_hash(const std::string& content)
{
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1
        && EVP_DigestUpdate(ctx, header.data(), header.size()) == 1
        && EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 && EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok)
        fail(ErrorKind::io, "SHA-1 digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::error_code ec;
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorKind::io, "cannot write " + path.string());
    out << content;
    if (!out)
        fail(ErrorKind::io, "write failed for " + path.string());
}

/// Output directory plus the list of files written to it, each with its hash.
class ArtifactSet {
public:
    explicit ArtifactSet(std::filesystem::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec)
            fail(ErrorKind::io, "cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    const std::filesystem::path& dir() const { return dir_; }

    void add(const std::string& name, const std::string& role, const std::string& content, json extra = {})
    {
        write_file(dir_ / name, content);
        json entry{{"name", name}, {"role", role}, {"bytes", content.size()}, {"sha1", git_blob_hash(content)}};
        if (extra.is_object())
            entry.update(extra);
        files_.push_back(std::move(entry));
    }

    const json& files() const { return files_; }

private:
    std::filesystem::path dir_;
    json files_ = json::array();
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        fail(ErrorKind::io, "CSV column '" + name + "' not found");
    }

    std::vector<double> values(const std::string& name) const
    {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows)
            out.push_back(r[c]);
        return out;
    }
};

/// Reads an all-numeric CSV with a header line.
inline CsvTable read_csv(const std::filesystem::path& path)
{
    std::istringstream in(read_file(path));
    CsvTable t;
    std::string line;
    if (!std::getline(in, line))
        fail(ErrorKind::io, "empty CSV " + path.string());
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ','))
            t.header.push_back(cell);
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::vector<double> row;
        std::istringstream rs(line);
        std::string cell;
        while (std::getline(rs, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str())
                fail(ErrorKind::io, path.string() + ":" + std::to_string(lineno) + ": non-numeric cell");
            row.push_back(v);
        }
        if (row.size() != t.header.size())
            fail(ErrorKind::io, path.string() + ":" + std::to_string(lineno) + ": row width mismatch");
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace lake::io
