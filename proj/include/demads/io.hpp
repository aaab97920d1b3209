#ifndef DEMADS_IO_HPP
#define DEMADS_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace demads::io {

using json = nlohmann::json;

// Shortest decimal representation that round-trips the exact double.
// All file output goes through this so reruns are byte-identical.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

// Minimal CSV: first row header, numeric cells everywhere else.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// FNV-1a over a canonical string, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& canonical);

namespace log {
enum class Level { Error = 0, Info = 1, Debug = 2 };
Level level(); // from DEMADS_LOG, default error
void error(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);
} // namespace log

} // namespace demads::io

#endif
