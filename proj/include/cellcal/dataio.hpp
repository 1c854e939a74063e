#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cellcal/trace.hpp"

namespace cellcal {

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// One sample of lab cycling data, in the file convention: current > 0 on
// charge, < 0 on discharge.
struct CyclingRecord {
    double time_s = 0.0;
    double current_a = 0.0;
    double voltage_v = 0.0;
    std::optional<int> cycle;
    std::optional<std::string> step_label;
};

// Explicit mapping from a dataset's header names and units to the record
// fields. Units are declared, never guessed.
struct ColumnSpec {
    std::string column;
    std::string unit;  // one of the entries unit_scale() knows
};

struct ColumnMap {
    ColumnSpec time{"time_s", "s"};
    ColumnSpec current{"current_a", "A"};
    ColumnSpec voltage{"voltage_v", "V"};
    std::optional<std::string> cycle_column;
    std::optional<std::string> step_column;
};

// Conversion factor to the base unit (s, A, V). Throws DataError on an
// unknown unit string.
double unit_scale(const std::string& unit);

// CSV with a header row. A path ending in .gz is inflated first. Throws
// DataError naming the missing column or the unparseable line number.
std::vector<CyclingRecord> load_cycling_csv(const std::string& path,
                                            const ColumnMap& columns = {});
std::vector<CyclingRecord> parse_cycling_csv(const std::string& csv_text,
                                             const ColumnMap& columns = {});

// Groups records into cycles: by the explicit cycle index when present,
// otherwise at charge-to-discharge sign transitions of the 5-sample
// median-filtered current. Traces are rebased to cycle-local time and flipped
// to the internal discharge-positive convention. Throws DataError when no
// cycle containing discharge exists or time decreases within a cycle.
CycleSeries segment_cycles(const std::vector<CyclingRecord>& records);

// Trapezoidal integral of discharge current over the whole file, Ah, in the
// same pairing the segmentation uses.
double total_discharge_ah(const std::vector<CyclingRecord>& records);

}  // namespace cellcal
