#include <cstdio>
#include <sstream>

#include "nhsim/cli.hpp"

namespace nhsim {

std::string format_double(double v) {
    if (v == 0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const OutputMeta& meta,
                     const std::vector<std::string>& header)
    : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# nhsim " << kVersion << " command=" << meta.command << " config_hash=" << meta.config_hash
         << " seed=" << meta.seed << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
}

CsvWriter& CsvWriter::operator<<(double v) { return *this << format_double(v); }

CsvWriter& CsvWriter::operator<<(long long v) { return *this << std::to_string(v); }

CsvWriter& CsvWriter::operator<<(std::uint64_t v) { return *this << std::to_string(v); }

CsvWriter& CsvWriter::operator<<(const std::string& v) {
    if (!first_) out_ << ",";
    out_ << v;
    first_ = false;
    return *this;
}

void CsvWriter::end_row() {
    out_ << "\n";
    first_ = true;
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv: no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) t.header = split(line);
        else t.rows.push_back(split(line));
    }
    return t;
}

void write_json(const std::filesystem::path& path, const OutputMeta& meta, nlohmann::json body) {
    body["nhsim_version"] = kVersion;
    body["config_hash"] = meta.config_hash;
    body["seed"] = meta.seed;
    body["command"] = meta.command;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body.dump(2) << "\n";
}

}  // namespace nhsim
