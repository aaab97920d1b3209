#include "demads/io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "demads/error.hpp"

namespace demads::io {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrKind::IoError, "cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrKind::IoError, "cannot write file: " + path.string());
    out << content;
    if (!out)
        throw Error(ErrKind::IoError, "write failed: " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw Error(ErrKind::ParseError, "invalid JSON in " + path.string());
    return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::string out;
    for (size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += ',';
        out += table.header[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw Error(ErrKind::LengthMismatch, "csv row width differs from header");
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

CsvTable read_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        if (first) {
            while (std::getline(ls, cell, ',')) table.header.push_back(cell);
            first = false;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc())
                throw Error(ErrKind::ParseError, "non-numeric csv cell '" + cell + "' in " + path.string());
            row.push_back(v);
        }
        if (row.size() != table.header.size())
            throw Error(ErrKind::ParseError, "ragged csv row in " + path.string());
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty())
        throw Error(ErrKind::ParseError, "empty csv: " + path.string());
    return table;
}

std::string fnv1a_hex(const std::string& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace log {

Level level() {
    static Level lv = [] {
        const char* env = std::getenv("DEMADS_LOG");
        if (!env) return Level::Error;
        const std::string v(env);
        if (v == "debug") return Level::Debug;
        if (v == "info") return Level::Info;
        return Level::Error;
    }();
    return lv;
}

void error(const std::string& msg) {
    std::cerr << "[demads:error] " << msg << "\n";
}

void info(const std::string& msg) {
    if (level() >= Level::Info) std::cerr << "[demads:info] " << msg << "\n";
}

void debug(const std::string& msg) {
    if (level() >= Level::Debug) std::cerr << "[demads:debug] " << msg << "\n";
}

} // namespace log

} // namespace demads::io
