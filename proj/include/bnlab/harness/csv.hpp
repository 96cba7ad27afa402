#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace bnlab::harness {

// Shortest round-trippable text for a double: printf %.17g.
std::string format_number(double value);
std::string format_number(std::size_t value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
};

// RFC 4180: fields holding a comma, quote, CR or LF are quoted and inner
// quotes doubled; records end in CRLF.
std::string to_csv(const CsvTable& table);
CsvTable parse_csv(std::string_view text);

// Collects every file of one artifact directory and is the only thing that
// writes into it.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    const std::vector<std::filesystem::path>& files() const noexcept { return files_; }

    void text(const std::filesystem::path& name, std::string_view content);
    void csv(const std::filesystem::path& name, const CsvTable& table);
    void json(const std::filesystem::path& name, const nlohmann::ordered_json& value);

private:
    std::filesystem::path root_;
    std::vector<std::filesystem::path> files_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace bnlab::harness
