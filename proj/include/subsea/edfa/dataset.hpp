#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "subsea/core/errors.hpp"
#include "subsea/core/random.hpp"
#include "subsea/edfa/oracle.hpp"

namespace subsea::edfa {

inline constexpr int kDefaultDatasetRows = 6516;
inline constexpr double kMinTotalInputDbm = 0.0;
inline constexpr double kMaxTotalInputDbm = 11.5;
inline constexpr double kMaxInputRippleDb = 6.0;

struct GainRow {
    EdfaInput input;
    GainSpectrum gain;
};

struct GainDataset {
    std::vector<GainRow> rows;
    std::uint64_t seed = 0;

    std::size_t size() const { return rows.size(); }
};

struct ConstraintSummary {
    std::size_t rows = 0;
    std::size_t total_power_violations = 0;
    std::size_t ripple_violations = 0;
    std::size_t current_violations = 0;
    double min_total_dbm = 0.0;
    double max_total_dbm = 0.0;
    double max_ripple_db = 0.0;

    bool ok() const { return total_power_violations == 0 && ripple_violations == 0 && current_violations == 0; }
};

/// Checks every row against the sampling envelope. `tolerance` absorbs CSV rounding.
inline ConstraintSummary check_constraints(const GainDataset& data, double tolerance = 1e-6) {
    ConstraintSummary s;
    s.rows = data.size();
    s.min_total_dbm = std::numeric_limits<double>::infinity();
    s.max_total_dbm = -std::numeric_limits<double>::infinity();
    for (const auto& row : data.rows) {
        const double total = total_dbm(row.input.power_dbm);
        const double ripple = peak_to_peak(row.input.power_dbm);
        s.min_total_dbm = std::min(s.min_total_dbm, total);
        s.max_total_dbm = std::max(s.max_total_dbm, total);
        s.max_ripple_db = std::max(s.max_ripple_db, ripple);
        if (total < kMinTotalInputDbm - tolerance || total > kMaxTotalInputDbm + tolerance)
            ++s.total_power_violations;
        if (ripple > kMaxInputRippleDb + tolerance) ++s.ripple_violations;
        if (row.input.current_ma < kMinCurrentMa || row.input.current_ma > kMaxCurrentMa) ++s.current_violations;
    }
    return s;
}

/// Random operating conditions labelled by the oracle: total input power uniform in
/// [0, 11.5] dBm, smooth shape with peak-to-peak ripple uniform in [0, 6] dB, drive
/// current uniform in [100, 800] mA.
inline GainDataset generate_dataset(std::size_t n, std::uint64_t seed, const GainOracle& oracle = GainOracle{}) {
    if (n < 1) throw UsageError("generate_dataset: row count must be at least 1");
    Rng rng(seed);
    GainDataset data;
    data.seed = seed;
    data.rows.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double total = rng.uniform(kMinTotalInputDbm, kMaxTotalInputDbm);
        const double ripple = rng.uniform(0.0, kMaxInputRippleDb);
        const ChannelArray shape = smooth_random_shape(rng, ripple);
        const double current = rng.uniform(kMinCurrentMa, kMaxCurrentMa);
        GainRow row;
        row.input.power_dbm = with_total_dbm(shape, total);
        row.input.current_ma = current;
        row.gain = oracle.gain(row.input);
        data.rows.push_back(std::move(row));
    }
    return data;
}

inline std::string dataset_header() {
    std::string h = "current_mA";
    for (int i = 0; i < kChannels; ++i) h += ",pin_" + std::to_string(i);
    for (int i = 0; i < kChannels; ++i) h += ",gain_" + std::to_string(i);
    return h;
}

/// CSV with 9 significant digits. Lines starting with '#' are comments (provenance).
inline void write_dataset_csv(std::ostream& out, const GainDataset& data, const std::string& comment = {}) {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << dataset_header() << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        out << buf;
    };
    for (const auto& row : data.rows) {
        put(row.input.current_ma);
        for (int i = 0; i < kChannels; ++i) {
            out << ',';
            put(row.input.power_dbm(i));
        }
        for (int i = 0; i < kChannels; ++i) {
            out << ',';
            put(row.gain(i));
        }
        out << '\n';
    }
}

inline void write_dataset_csv(const std::filesystem::path& path, const GainDataset& data,
                              const std::string& comment = {}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    write_dataset_csv(out, data, comment);
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline GainDataset read_dataset_csv(std::istream& in) {
    GainDataset data;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != dataset_header()) throw IoError("dataset CSV header mismatch at line " + std::to_string(line_no));
            header_seen = true;
            continue;
        }
        std::vector<double> values;
        values.reserve(1 + 2 * kChannels);
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("dataset CSV: bad number '" + cell + "' at line " + std::to_string(line_no));
            }
        }
        if (values.size() != 1 + 2 * kChannels)
            throw IoError("dataset CSV: line " + std::to_string(line_no) + " has " + std::to_string(values.size()) +
                          " fields");
        GainRow row;
        row.input.current_ma = values[0];
        for (int i = 0; i < kChannels; ++i) {
            row.input.power_dbm(i) = values[1 + static_cast<std::size_t>(i)];
            row.gain(i) = values[1 + kChannels + static_cast<std::size_t>(i)];
        }
        data.rows.push_back(std::move(row));
    }
    if (!header_seen) throw IoError("dataset CSV has no header");
    return data;
}

inline GainDataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
    return read_dataset_csv(in);
}

}  // namespace subsea::edfa
