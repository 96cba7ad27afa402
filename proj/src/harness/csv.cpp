#include "bnlab/harness/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bnlab/error.hpp"

namespace bnlab::harness {

std::string format_number(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string format_number(std::size_t value) { return std::to_string(value); }

void CsvTable::add(std::vector<std::string> row) {
    if (row.size() != header.size())
        throw DimensionError("csv row has " + std::to_string(row.size()) + " fields, header has " +
                             std::to_string(header.size()));
    rows.push_back(std::move(row));
}

namespace {

void put_field(std::string& out, const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        out += field;
        return;
    }
    out += '"';
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

void put_record(std::string& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        put_field(out, fields[i]);
    }
    out += "\r\n";
}

}  // namespace

std::string to_csv(const CsvTable& table) {
    std::string out;
    put_record(out, table.header);
    for (const auto& row : table.rows) put_record(out, row);
    return out;
}

CsvTable parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false, pending = false;
    std::size_t i = 0;
    auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(record));
        record.clear();
        pending = false;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            ++i;
            continue;
        }
        if (c == '"') {
            if (!field.empty()) throw FormatError("stray quote inside a csv field");
            quoted = pending = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            pending = true;
        } else if (c == '\r' || c == '\n') {
            end_record();
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else {
            field += c;
            pending = true;
        }
        ++i;
    }
    if (quoted) throw FormatError("unterminated quoted csv field");
    if (pending || !record.empty()) end_record();

    CsvTable table;
    if (records.empty()) return table;
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) table.add(std::move(records[r]));
    return table;
}

ArtifactWriter::ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw RunError("cannot create " + root_.string() + ": " + ec.message());
}

void ArtifactWriter::text(const std::filesystem::path& name, std::string_view content) {
    const auto path = root_ / name;
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw RunError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw RunError("cannot write " + path.string());
    files_.push_back(name);
}

void ArtifactWriter::csv(const std::filesystem::path& name, const CsvTable& table) { text(name, to_csv(table)); }

void ArtifactWriter::json(const std::filesystem::path& name, const nlohmann::ordered_json& value) {
    text(name, value.dump(2) + "\n");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RunError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw RunError("cannot read " + path.string());
    return ss.str();
}

}  // namespace bnlab::harness
