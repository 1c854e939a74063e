#include "cellcal/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cellcal {

double unit_scale(const std::string& unit) {
    static const std::map<std::string, double> kScales = {
        {"s", 1.0},   {"ms", 1e-3}, {"min", 60.0}, {"h", 3600.0},
        {"A", 1.0},   {"mA", 1e-3}, {"uA", 1e-6},
        {"V", 1.0},   {"mV", 1e-3},
    };
    const auto it = kScales.find(unit);
    if (it == kScales.end()) throw DataError("unknown unit: " + unit);
    return it->second;
}

namespace {

std::string inflate_gzip(const std::string& compressed) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) {
        throw DataError("cannot initialize gzip decoder");
    }
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());
    std::string out;
    char buf[1 << 15];
    int ret = Z_OK;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof buf;
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw DataError("corrupt gzip stream");
        }
        out.append(buf, sizeof buf - zs.avail_out);
    } while (ret != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        // Trim surrounding whitespace and a trailing CR.
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::size_t column_index(const std::vector<std::string>& header,
                         const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column: " + name);
    return static_cast<std::size_t>(it - header.begin());
}

double parse_number(const std::string& field, int line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception&) {
        throw DataError("unparseable value '" + field + "' on line " +
                        std::to_string(line_no));
    }
    if (pos != field.size() || !std::isfinite(v)) {
        throw DataError("unparseable value '" + field + "' on line " +
                        std::to_string(line_no));
    }
    return v;
}

}  // namespace

std::vector<CyclingRecord> parse_cycling_csv(const std::string& csv_text,
                                             const ColumnMap& columns) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file");
    const std::vector<std::string> header = split_csv_line(line);

    const std::size_t it = column_index(header, columns.time.column);
    const std::size_t ic = column_index(header, columns.current.column);
    const std::size_t iv = column_index(header, columns.voltage.column);
    std::optional<std::size_t> icy, isl;
    if (columns.cycle_column) icy = column_index(header, *columns.cycle_column);
    if (columns.step_column) isl = column_index(header, *columns.step_column);

    const double st = unit_scale(columns.time.unit);
    const double sc = unit_scale(columns.current.unit);
    const double sv = unit_scale(columns.voltage.unit);

    std::vector<CyclingRecord> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError("wrong field count on line " + std::to_string(line_no));
        }
        CyclingRecord r;
        r.time_s = parse_number(fields[it], line_no) * st;
        r.current_a = parse_number(fields[ic], line_no) * sc;
        r.voltage_v = parse_number(fields[iv], line_no) * sv;
        if (icy) {
            const double c = parse_number(fields[*icy], line_no);
            r.cycle = static_cast<int>(std::lround(c));
        }
        if (isl) r.step_label = fields[*isl];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CyclingRecord> load_cycling_csv(const std::string& path,
                                            const ColumnMap& columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
        text = inflate_gzip(text);
    }
    return parse_cycling_csv(text, columns);
}

namespace {

std::vector<double> median_filter5(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - 2);
        const std::ptrdiff_t hi = std::min(n - 1, i + 2);
        std::vector<double> window(v.begin() + lo, v.begin() + hi + 1);
        std::sort(window.begin(), window.end());
        out[static_cast<std::size_t>(i)] = window[window.size() / 2];
    }
    return out;
}

// Index ranges [first, last] split where the smoothed current flips from
// charge to discharge. The last charge sample before each flip is shared
// between the neighboring segments, so every consecutive pair of records
// belongs to exactly one segment.
std::vector<std::pair<std::size_t, std::size_t>> sign_segments(
    const std::vector<CyclingRecord>& records) {
    std::vector<double> current(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) current[i] = records[i].current_a;
    const std::vector<double> smooth = median_filter5(current);

    std::vector<std::size_t> boundaries = {0};
    int last_sign = 0;
    for (std::size_t i = 0; i < smooth.size(); ++i) {
        const int sign = smooth[i] > 0.0 ? 1 : (smooth[i] < 0.0 ? -1 : 0);
        if (sign == 0) continue;
        if (last_sign > 0 && sign < 0 && i > 1) boundaries.push_back(i - 1);
        last_sign = sign;
    }
    boundaries.push_back(records.size() - 1);

    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t b = 0; b + 1 < boundaries.size(); ++b) {
        if (boundaries[b + 1] > boundaries[b]) {
            out.emplace_back(boundaries[b], boundaries[b + 1]);
        }
    }
    return out;
}

// True iff the segment's trapezoidal discharge integral is nonzero, so that
// discarded segments never carry discharge capacity.
bool has_discharge(const std::vector<CyclingRecord>& records, std::size_t first,
                   std::size_t last) {
    for (std::size_t i = first + 1; i <= last; ++i) {
        if (records[i].current_a < 0.0 || records[i - 1].current_a < 0.0) return true;
    }
    return false;
}

CycleRecord make_cycle(const std::vector<CyclingRecord>& records, std::size_t first,
                       std::size_t last, int cycle_no) {
    CycleRecord out;
    out.cycle = cycle_no;
    SimulationTrace& tr = out.trace;
    const double t0 = records[first].time_s;
    double capacity = 0.0;
    double discharge = 0.0;
    for (std::size_t i = first; i <= last; ++i) {
        const CyclingRecord& r = records[i];
        if (i > first) {
            if (r.time_s < records[i - 1].time_s) {
                throw DataError("time decreases within cycle " +
                                std::to_string(cycle_no));
            }
            const double dt = r.time_s - records[i - 1].time_s;
            // Internal convention is discharge positive, so the file current
            // flips sign.
            capacity += dt * (-r.current_a - records[i - 1].current_a) / 2.0 / 3600.0;
            discharge += dt *
                         (std::max(0.0, -r.current_a) +
                          std::max(0.0, -records[i - 1].current_a)) /
                         2.0 / 3600.0;
        }
        tr.time_s.push_back(r.time_s - t0);
        tr.current_a.push_back(-r.current_a);
        tr.voltage_v.push_back(r.voltage_v);
        tr.capacity_ah.push_back(capacity);
        tr.step_index.push_back(0);
    }
    if (!tr.time_s.empty()) tr.step_durations_s.push_back(tr.time_s.back());
    out.discharge_capacity_ah = discharge;
    return out;
}

}  // namespace

CycleSeries segment_cycles(const std::vector<CyclingRecord>& records) {
    if (records.empty()) throw DataError("no records");

    std::vector<std::pair<std::size_t, std::size_t>> segments;
    if (records.front().cycle) {
        std::size_t start = 0;
        for (std::size_t i = 1; i <= records.size(); ++i) {
            if (i == records.size() || records[i].cycle != records[start].cycle) {
                segments.emplace_back(start, i - 1);
                start = i;
            }
        }
    } else {
        segments = sign_segments(records);
    }

    CycleSeries out;
    for (const auto& [first, last] : segments) {
        if (!has_discharge(records, first, last)) continue;
        out.cycles.push_back(
            make_cycle(records, first, last, static_cast<int>(out.cycles.size()) + 1));
    }
    if (out.cycles.empty()) throw DataError("no complete cycle detected");
    return out;
}

double total_discharge_ah(const std::vector<CyclingRecord>& records) {
    double total = 0.0;
    const bool grouped = !records.empty() && records.front().cycle.has_value();
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (grouped && records[i].cycle != records[i - 1].cycle) continue;
        const double dt = records[i].time_s - records[i - 1].time_s;
        total += dt *
                 (std::max(0.0, -records[i].current_a) +
                  std::max(0.0, -records[i - 1].current_a)) /
                 2.0 / 3600.0;
    }
    return total;
}

}  // namespace cellcal
