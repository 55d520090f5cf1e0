#pragma once

// CSV traces: header row, then one numeric row per sample. Values are written
// with 17 significant digits so every double survives a write/read cycle.

#include "yflash/array.hpp"
#include "yflash/errors.hpp"
#include "yflash/experiments.hpp"
#include "yflash/transient.hpp"
#include "yflash/variability.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace yflash::io {

[[nodiscard]] inline std::string format_double(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

[[nodiscard]] inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw IoError("not a number: '" + std::string(s) + "'");
    return x;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw IoError("missing column '" + std::string(name) + "'");
    }

    [[nodiscard]] std::vector<double> values(std::string_view name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }

    void add_row(std::vector<double> row) {
        if (row.size() != header.size())
            throw IoError("row has " + std::to_string(row.size()) + " values, header has " +
                          std::to_string(header.size()));
        rows.push_back(std::move(row));
    }
};

inline void write_csv(std::ostream& os, const CsvTable& t) {
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
        os << '\n';
    }
}

[[nodiscard]] inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream ss(s);
        while (std::getline(ss, cur, ',')) out.push_back(cur);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    if (!std::getline(is, line)) throw IoError("empty CSV input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split(line);
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw IoError("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(t.header.size()) + " fields, got " +
                          std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void write_csv_file(const std::filesystem::path& path, const CsvTable& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    write_csv(os, t);
    os.flush();
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

[[nodiscard]] inline CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    return read_csv(is);
}

// ---------------------------------------------------------------------------
// Tables of simulator results
// ---------------------------------------------------------------------------

[[nodiscard]] inline CsvTable trace_table(const TransientTrace& tr) {
    CsvTable t{{"time_s", "v_d_V", "v_sr_V", "v_si_V", "v_fg_V", "i_d_A", "i_sr_A", "i_si_A",
                "i_gate_A", "q_fg_C"},
               {}};
    for (std::size_t k = 0; k < tr.time.size(); ++k)
        t.add_row({tr.time[k], tr.v_d[k], tr.v_sr[k], tr.v_si[k], tr.v_fg[k], tr.i_d[k], tr.i_sr[k],
                   tr.i_si[k], tr.i_gate[k], tr.q_fg[k]});
    return t;
}

[[nodiscard]] inline CsvTable iv_table(const IvTable& iv) {
    CsvTable t{{"v_V", "i_read_A", "i_d_A", "i_si_A", "v_fg_V", "i_gate_A"}, {}};
    for (std::size_t k = 0; k < iv.v.size(); ++k)
        t.add_row({iv.v[k], iv.i_read[k], iv.i_d[k], iv.i_si[k], iv.v_fg[k], iv.i_gate[k]});
    return t;
}

[[nodiscard]] inline CsvTable experiment_table(const ExperimentResult& r) {
    CsvTable t{{"pulse_index", "accumulated_time_s", "read_current_A", "q_fg_C", "pulse_dq_C",
                "read_disturb_q_C"},
               {}};
    for (std::size_t k = 0; k < r.size(); ++k)
        t.add_row({double(r.pulse_index[k]), r.accumulated_time[k], r.read_current_at_v[k],
                   r.q_fg_after_pulse[k], r.pulse_delta_q[k], r.read_disturb_q[k]});
    return t;
}

/// Read I-V curves of an experiment: one row per sweep voltage, one column per pulse.
[[nodiscard]] inline CsvTable read_curves_table(const ExperimentResult& r) {
    CsvTable t;
    t.header.push_back("v_V");
    for (std::size_t k = 0; k < r.read_curves.size(); ++k)
        t.header.push_back("i_after_pulse_" + std::to_string(r.pulse_index[k]) + "_A");
    for (std::size_t j = 0; j < r.read_voltages.size(); ++j) {
        std::vector<double> row{r.read_voltages[j]};
        for (const auto& curve : r.read_curves) row.push_back(curve[j]);
        t.add_row(std::move(row));
    }
    return t;
}

[[nodiscard]] inline CsvTable population_table(const PopulationStats& s) {
    CsvTable t{{"device", "v_alpha_d2d_V", "beta_d2d_V", "pulses", "total_time_s"}, {}};
    for (std::size_t i = 0; i < s.times.size(); ++i)
        t.add_row({double(i), s.devices[i].v_alpha_d2d, s.devices[i].beta_d2d, double(s.pulses[i]),
                   s.times[i]});
    return t;
}

// ---------------------------------------------------------------------------
// Array state files
// ---------------------------------------------------------------------------

[[nodiscard]] inline CsvTable state_table(const CrossbarArray& a) {
    CsvTable t{{"row", "col", "q_fg_C", "v_alpha_d2d_V", "beta_d2d_V"}, {}};
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
            const DeviceState& st = a.cell(r, c);
            t.add_row({double(r), double(c), st.q_fg, st.v_alpha_d2d, st.beta_d2d});
        }
    return t;
}

/// Rebuild an array from a state table. Every cell must appear exactly once.
[[nodiscard]] inline CrossbarArray array_from_state_table(const CsvTable& t,
                                                          const DeviceParams& params,
                                                          bool d_along_rows = true) {
    const std::size_t cr = t.column("row"), cc = t.column("col"), cq = t.column("q_fg_C"),
                      ca = t.column("v_alpha_d2d_V"), cb = t.column("beta_d2d_V");
    std::size_t rows = 0, cols = 0;
    for (const auto& r : t.rows) {
        if (!(r[cr] >= 0.0) || !(r[cc] >= 0.0) || r[cr] != std::floor(r[cr]) ||
            r[cc] != std::floor(r[cc]))
            throw IoError("state file: row/col must be non-negative integers");
        rows = std::max(rows, std::size_t(r[cr]) + 1);
        cols = std::max(cols, std::size_t(r[cc]) + 1);
    }
    if (t.rows.size() != rows * cols)
        throw IoError("state file: expected " + std::to_string(rows * cols) + " cells, got " +
                      std::to_string(t.rows.size()));
    std::vector<DeviceState> cells(rows * cols);
    std::vector<bool> seen(rows * cols, false);
    for (const auto& r : t.rows) {
        const std::size_t i = std::size_t(r[cr]) * cols + std::size_t(r[cc]);
        if (seen[i]) throw IoError("state file: duplicate cell");
        seen[i] = true;
        cells[i] = DeviceState{r[cq], r[ca], r[cb]};
    }
    return CrossbarArray(rows, cols, params, std::move(cells), d_along_rows);
}

}  // namespace yflash::io
