#include "comaguard/trace.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "comaguard/errors.hpp"

namespace comaguard {

bool is_valid(const TraceRecord& r) noexcept {
    if (r.t_ms < 0) return false;
    if (!std::isfinite(r.ax_g) || !std::isfinite(r.ay_g) || !std::isfinite(r.az_g)) return false;
    if (r.hr_bpm && !(std::isfinite(*r.hr_bpm) && *r.hr_bpm > 0.0 && *r.hr_bpm < 300.0)) return false;
    if (r.skin_rh && !(std::isfinite(*r.skin_rh) && *r.skin_rh >= 0.0 && *r.skin_rh <= 100.0)) return false;
    return true;
}

namespace {

void append_number(std::string& out, double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), ptr);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            return fields;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

double parse_double(std::string_view field, std::size_t line, const char* name) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw ParseError(line, std::string("bad number in ") + name + ": '" + std::string(field) + "'");
    }
    return v;
}

std::optional<double> parse_optional(std::string_view field, std::size_t line, const char* name) {
    if (field.empty()) return std::nullopt;
    return parse_double(field, line, name);
}

TraceRecord parse_row(std::string_view row, std::size_t line) {
    const auto f = split_fields(row);
    if (f.size() != 7) throw ParseError(line, "expected 7 fields, got " + std::to_string(f.size()));

    TraceRecord r;
    {
        const auto* end = f[0].data() + f[0].size();
        auto [ptr, ec] = std::from_chars(f[0].data(), end, r.t_ms);
        if (f[0].empty() || ec != std::errc() || ptr != end || r.t_ms < 0) {
            throw ParseError(line, "bad t_ms: '" + std::string(f[0]) + "'");
        }
    }
    r.ax_g = parse_double(f[1], line, "ax_g");
    r.ay_g = parse_double(f[2], line, "ay_g");
    r.az_g = parse_double(f[3], line, "az_g");
    r.hr_bpm = parse_optional(f[4], line, "hr_bpm");
    r.skin_rh = parse_optional(f[5], line, "skin_rh");
    if (f[6] == "ACK") {
        r.action = TraceAction::Ack;
    } else if (!f[6].empty()) {
        throw ParseError(line, "unknown action '" + std::string(f[6]) + "'");
    }
    if (r.hr_bpm && !(*r.hr_bpm > 0.0 && *r.hr_bpm < 300.0)) throw ParseError(line, "hr_bpm out of (0, 300)");
    if (r.skin_rh && !(*r.skin_rh >= 0.0 && *r.skin_rh <= 100.0)) throw ParseError(line, "skin_rh out of [0, 100]");
    return r;
}

}  // namespace

Trace parse_trace(std::string_view text) {
    Trace out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (!header_seen) {
            if (line != kTraceHeader) throw ParseError(line_no, "expected header '" + std::string(kTraceHeader) + "'");
            header_seen = true;
            continue;
        }
        if (line.empty()) {
            if (pos >= text.size()) break;
            throw ParseError(line_no, "empty row");
        }
        auto record = parse_row(line, line_no);
        if (!out.empty() && record.t_ms <= out.back().t_ms) throw NonMonotonicTimestamps(line_no);
        out.push_back(std::move(record));
    }
    if (!header_seen) throw ParseError(1, "missing header");
    return out;
}

Trace parse_trace(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_trace(ss.str());
}

Trace read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open trace file '" + path + "'");
    return parse_trace(in);
}

std::string format_trace_row(const TraceRecord& r) {
    if (!is_valid(r)) throw InvalidRecord("t_ms=" + std::to_string(r.t_ms));
    std::string row = std::to_string(r.t_ms);
    row += ',';
    append_number(row, r.ax_g);
    row += ',';
    append_number(row, r.ay_g);
    row += ',';
    append_number(row, r.az_g);
    row += ',';
    if (r.hr_bpm) append_number(row, *r.hr_bpm);
    row += ',';
    if (r.skin_rh) append_number(row, *r.skin_rh);
    row += ',';
    if (r.is_ack()) row += "ACK";
    return row;
}

std::string write_trace(const Trace& records) {
    std::string out(kTraceHeader);
    out += '\n';
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i > 0 && records[i].t_ms <= records[i - 1].t_ms) {
            throw InvalidRecord("t_ms not strictly increasing at index " + std::to_string(i));
        }
        out += format_trace_row(records[i]);
        out += '\n';
    }
    return out;
}

void write_trace_file(const std::string& path, const Trace& records) {
    const auto text = write_trace(records);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write trace file '" + path + "'");
    out << text;
    if (!out.flush()) throw Error("write failed for '" + path + "'");
}

}  // namespace comaguard
