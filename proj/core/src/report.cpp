// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace dropref {

namespace {

constexpr const char* kColumns =
    "iter,robust_minibatch_loss,uniform_minibatch_loss,grad_norm,mass_moved,"
    "potential,min_eig_above_cutoff,compat_loss,wallclock_ms";

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& field) {
    if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) throw ConfigError("report csv: malformed number '" + field + "'");
    return v;
}

} // namespace

void TrainReport::validate() const {
    int expected = 1;
    for (const TrainRow& row : rows) {
        if (row.iter != expected)
            throw ConfigError("report: iteration column must increase strictly from 1");
        ++expected;
    }
}

std::string build_id() {
#ifdef DROPREF_VERSION
    return std::string("dro-pref/") + DROPREF_VERSION;
#else
    return "dro-pref/dev";
#endif
}

void write_train_report_csv(const std::filesystem::path& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw ConfigError("report csv: cannot open " + path.string() + " for writing");
    out << "# schema: dro-pref/report/v1\n";
    out << "# config_digest: " << report.config_digest << "\n";
    out << "# build_id: " << report.build_id << "\n";
    out << kColumns << "\n";
    for (const TrainRow& r : report.rows) {
        out << r.iter << ',' << format_double(r.robust_minibatch_loss) << ','
            << format_double(r.uniform_minibatch_loss) << ',' << format_double(r.grad_norm)
            << ',' << format_double(r.mass_moved) << ',' << format_double(r.potential) << ','
            << format_double(r.min_eig_above_cutoff) << ',' << format_double(r.compat_loss)
            << ',' << format_double(r.wallclock_ms) << "\n";
    }
    if (!out) throw ConfigError("report csv: write failed for " + path.string());
}

TrainReport read_train_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("report csv: cannot open " + path.string());

    TrainReport report;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ");
            if (colon == std::string::npos) continue;
            const std::string key = line.substr(2, colon - 2);
            const std::string value = line.substr(colon + 2);
            if (key == "config_digest") report.config_digest = value;
            else if (key == "build_id") report.build_id = value;
            else if (key == "schema" && value != "dro-pref/report/v1")
                throw ConfigError("report csv: unsupported schema '" + value + "'");
            continue;
        }
        if (!saw_header) {
            if (line != kColumns)
                throw ConfigError("report csv: unexpected column header '" + line + "'");
            saw_header = true;
            continue;
        }
        std::istringstream row_stream(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row_stream, field, ',')) fields.push_back(field);
        if (fields.size() != 9) throw ConfigError("report csv: row with wrong field count");
        TrainRow row;
        row.iter = static_cast<int>(parse_double(fields[0]));
        row.robust_minibatch_loss = parse_double(fields[1]);
        row.uniform_minibatch_loss = parse_double(fields[2]);
        row.grad_norm = parse_double(fields[3]);
        row.mass_moved = parse_double(fields[4]);
        row.potential = parse_double(fields[5]);
        row.min_eig_above_cutoff = parse_double(fields[6]);
        row.compat_loss = parse_double(fields[7]);
        row.wallclock_ms = parse_double(fields[8]);
        report.rows.push_back(row);
    }
    if (!saw_header) throw ConfigError("report csv: missing column header in " + path.string());
    report.validate();
    return report;
}

} // namespace dropref
