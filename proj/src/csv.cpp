#include "qpump/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace qpump {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trace_to_csv(const DecayTrace& trace) {
    std::string out = "delay_us,population,stderr,n_trials\n";
    for (std::size_t i = 0; i < trace.delays_us.size(); ++i) {
        out += format_double(trace.delays_us[i]);
        out += ',';
        out += format_double(trace.populations[i]);
        out += ',';
        out += format_double(trace.stderrs.empty() ? 0.0 : trace.stderrs[i]);
        out += ',';
        out += std::to_string(trace.n_trials);
        out += '\n';
    }
    return out;
}

void write_trace_csv(const std::string& path, const DecayTrace& trace) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << trace_to_csv(trace);
}

namespace {

double parse_field(const std::string& field, const std::string& path, long line) {
    double v = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw std::runtime_error(path + ":" + std::to_string(line) + ": malformed number \"" +
                                 field + "\"");
    return v;
}

}  // namespace

DecayTrace read_trace_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    DecayTrace t;
    std::string line;
    long line_no = 0;
    bool have_header = false;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!have_header) {
            have_header = true;
            if (line.rfind("delay_us", 0) == 0) continue;  // header row optional
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 2 || fields.size() > 4)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected 2-4 comma-separated fields");
        t.delays_us.push_back(parse_field(fields[0], path, line_no));
        t.populations.push_back(parse_field(fields[1], path, line_no));
        if (fields.size() >= 3) t.stderrs.push_back(parse_field(fields[2], path, line_no));
        if (fields.size() >= 4)
            t.n_trials = static_cast<long>(parse_field(fields[3], path, line_no));
    }
    if (t.delays_us.empty()) throw std::runtime_error(path + ": empty trace file");
    if (!t.stderrs.empty() && t.stderrs.size() != t.delays_us.size())
        throw std::runtime_error(path + ": inconsistent stderr column");
    return t;
}

std::string table_to_csv(const std::vector<std::string>& columns,
                         const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out += columns[c];
        out += c + 1 < columns.size() ? ',' : '\n';
    }
    for (const auto& row : rows) {
        if (row.size() != columns.size())
            throw std::invalid_argument("table_to_csv: row width mismatch");
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += format_double(row[c]);
            out += c + 1 < row.size() ? ',' : '\n';
        }
    }
    return out;
}

void write_table_csv(const std::string& path, const std::vector<std::string>& columns,
                     const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << table_to_csv(columns, rows);
}

}  // namespace qpump
