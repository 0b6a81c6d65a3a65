#pragma once

#include <string>
#include <vector>

#include "qpump/types.hpp"

namespace qpump {

// Shortest decimal representation that round-trips to the same double, so
// CSV diffs are meaningful and re-runs compare byte-for-byte.
std::string format_double(double v);

// Columns: delay_us,population,stderr,n_trials.
std::string trace_to_csv(const DecayTrace& trace);
void write_trace_csv(const std::string& path, const DecayTrace& trace);

// Parse errors name the offending line number.
DecayTrace read_trace_csv(const std::string& path);

// Generic numeric table with a header row.
std::string table_to_csv(const std::vector<std::string>& columns,
                         const std::vector<std::vector<double>>& rows);
void write_table_csv(const std::string& path, const std::vector<std::string>& columns,
                     const std::vector<std::vector<double>>& rows);

}  // namespace qpump
