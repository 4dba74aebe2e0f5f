#pragma once

// Builds the inputs of the factorization from tabular data:
//   * the origin-destination-time tensor from trip records,
//   * the POI context similarity matrix W,
//   * the zone neighbor graph.
//
// Trips are expected already mapped to zone and slice indices; raw GPS
// processing happens upstream.

#include "odt/errors.hpp"
#include "odt/tensor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace odt {

struct TripRecord {
    std::string vehicle_id;
    std::size_t origin_zone = 0;
    std::size_t dest_zone = 0;
    std::size_t start_slice = 0;
    std::optional<std::string> date;  // YYYY-MM-DD, optional column
};

struct DataTensorBuild {
    Tensor3 tensor;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

/// Counts trips per (origin, destination, slice) cell and rescales each count
/// with r = ln(1 + count). Records with out-of-range indices are skipped and counted.
[[nodiscard]] inline DataTensorBuild build_data_tensor(std::span<const TripRecord> trips,
                                                       std::size_t zones, std::size_t slices) {
    if (zones == 0 || slices == 0) throw input_error("tensor dims must be positive");
    DataTensorBuild out{Tensor3(zones, zones, slices), 0, 0};
    std::vector<std::uint64_t> counts(out.tensor.size(), 0);
    for (const auto& trip : trips) {
        if (trip.origin_zone >= zones || trip.dest_zone >= zones || trip.start_slice >= slices) {
            ++out.rejected;
            continue;
        }
        ++counts[out.tensor.offset(trip.origin_zone, trip.dest_zone, trip.start_slice)];
        ++out.accepted;
    }
    auto values = out.tensor.values();
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] = std::log1p(static_cast<double>(counts[i]));
    return out;
}

/// Monday through Friday, and not listed in `holidays`.
[[nodiscard]] inline bool is_workday(const std::string& iso_date,
                                     const std::set<std::string>& holidays = {}) {
    int y = 0;
    unsigned m = 0, d = 0;
    char s1 = 0, s2 = 0;
    std::istringstream ss(iso_date);
    if (!(ss >> y >> s1 >> m >> s2 >> d) || s1 != '-' || s2 != '-')
        throw input_error("bad date '" + iso_date + "', expected YYYY-MM-DD");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw input_error("invalid calendar date '" + iso_date + "'");
    const std::chrono::weekday wd{std::chrono::sys_days{ymd}};
    if (wd == std::chrono::Saturday || wd == std::chrono::Sunday) return false;
    return !holidays.contains(iso_date);
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::size_t parse_index(const std::string& s, const std::string& where) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw input_error(where + ": expected a nonnegative integer, got '" + s + "'");
    return static_cast<std::size_t>(std::stoull(s));
}

}  // namespace detail

struct TripCsv {
    std::vector<TripRecord> records;
    std::size_t filtered_non_workday = 0;
};

/// Parses `vid,origin_zone,dest_zone,slice[,date]`. Malformed lines raise input_error with the
/// line number. When `workdays_only` is set, rows whose date is a weekend or holiday are dropped;
/// rows without a date column are kept.
[[nodiscard]] inline TripCsv read_trips_csv(std::istream& is, const std::string& source = "trips",
                                            bool workdays_only = false,
                                            const std::set<std::string>& holidays = {}) {
    TripCsv out;
    std::string line;
    std::size_t lineno = 0;
    bool has_date = false;
    while (std::getline(is, line)) {
        ++lineno;
        auto fields = detail::split_csv_line(line);
        if (lineno == 1) {
            const std::vector<std::string> base{"vid", "origin_zone", "dest_zone", "slice"};
            if (fields.size() == 5 && fields[4] == "date") {
                has_date = true;
                fields.pop_back();
            }
            if (fields != base)
                throw input_error(source + ":1: expected header vid,origin_zone,dest_zone,slice[,date]");
            continue;
        }
        if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        if (fields.size() != (has_date ? 5u : 4u))
            throw input_error(where + ": wrong number of fields");
        TripRecord rec{fields[0], detail::parse_index(fields[1], where),
                       detail::parse_index(fields[2], where), detail::parse_index(fields[3], where),
                       std::nullopt};
        if (has_date) {
            rec.date = fields[4];
            bool keep = true;
            try {
                keep = !workdays_only || is_workday(fields[4], holidays);
            } catch (const input_error& e) {
                throw input_error(where + ": " + e.what());
            }
            if (!keep) {
                ++out.filtered_non_workday;
                continue;
            }
        }
        out.records.push_back(std::move(rec));
    }
    if (lineno == 0) throw input_error(source + ": empty file");
    return out;
}

/// Default POI category labels (H = 14).
[[nodiscard]] inline std::vector<std::string> default_poi_categories() {
    return {"food & beverage service", "hotel", "scenic spot", "finance & insurance",
            "corporate business", "shopping service", "transportation facilities",
            "education and culture", "business building", "residence", "living service",
            "sports & entertainments", "medical care", "government agencies"};
}

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// counts(p, h) = number of POIs of category h located in zone p.
struct PoiTable {
    CountMatrix counts;
    std::vector<std::string> category_names;

    [[nodiscard]] std::size_t zones() const { return static_cast<std::size_t>(counts.rows()); }
    [[nodiscard]] std::size_t categories() const { return static_cast<std::size_t>(counts.cols()); }
};

/// Parses `zone,category,count` with categories numbered 1..H. Repeated (zone, category)
/// rows accumulate.
[[nodiscard]] inline PoiTable read_poi_csv(std::istream& is, std::size_t zones,
                                           std::vector<std::string> category_names,
                                           const std::string& source = "poi") {
    const std::size_t h = category_names.size();
    if (h == 0) throw input_error(source + ": at least one POI category is required");
    PoiTable table{CountMatrix::Zero(static_cast<Eigen::Index>(zones), static_cast<Eigen::Index>(h)),
                   std::move(category_names)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto fields = detail::split_csv_line(line);
        if (lineno == 1) {
            if (fields != std::vector<std::string>{"zone", "category", "count"})
                throw input_error(source + ":1: expected header zone,category,count");
            continue;
        }
        if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        if (fields.size() != 3) throw input_error(where + ": wrong number of fields");
        const auto zone = detail::parse_index(fields[0], where);
        const auto cat = detail::parse_index(fields[1], where);
        const auto count = detail::parse_index(fields[2], where);
        if (zone >= zones) throw input_error(where + ": zone out of range");
        if (cat < 1 || cat > h) throw input_error(where + ": category out of range 1.." + std::to_string(h));
        table.counts(static_cast<Eigen::Index>(zone), static_cast<Eigen::Index>(cat - 1)) +=
            static_cast<std::int64_t>(count);
    }
    if (lineno == 0) throw input_error(source + ": empty file");
    return table;
}

/// One category label per line.
[[nodiscard]] inline std::vector<std::string> read_category_names(std::istream& is) {
    std::vector<std::string> names;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    return names;
}

/// All zones' context vectors u_p = (c_p1, ..., c_pH, n_p) as rows of an M x (H+1) matrix.
/// c_ph is zone p's share of category h citywide; n_p is its share of all POIs.
/// A category absent citywide contributes 0.
[[nodiscard]] inline Matrix poi_context_vectors(const PoiTable& table) {
    const Eigen::Index m = table.counts.rows();
    const Eigen::Index h = table.counts.cols();
    if (h == 0) throw input_error("POI table has no categories");
    if ((table.counts.array() < 0).any()) throw input_error("POI counts must be nonnegative");
    const Matrix counts = table.counts.cast<double>();
    const Vector column_totals = counts.colwise().sum().transpose();
    const double total = column_totals.sum();
    Matrix u = Matrix::Zero(m, h + 1);
    for (Eigen::Index c = 0; c < h; ++c)
        if (column_totals(c) > 0.0) u.col(c) = counts.col(c) / column_totals(c);
    if (total > 0.0) u.col(h) = counts.rowwise().sum() / total;
    return u;
}

[[nodiscard]] inline Vector poi_context_vector(const PoiTable& table, std::size_t zone) {
    if (zone >= table.zones()) throw input_error("zone out of range");
    return poi_context_vectors(table).row(static_cast<Eigen::Index>(zone)).transpose();
}

/// Urban-context similarity matrix W with a per-zone activity flag.
///
/// Zones with no POIs at all are inactive: their rows and columns are zero
/// and they are excluded from the context penalty.
struct ContextMatrix {
    Matrix w;
    std::vector<bool> active;

    [[nodiscard]] std::size_t zones() const { return static_cast<std::size_t>(w.rows()); }

    /// Every zone active.
    [[nodiscard]] static ContextMatrix dense(Matrix w) {
        const auto n = static_cast<std::size_t>(w.rows());
        return {std::move(w), std::vector<bool>(n, true)};
    }

    [[nodiscard]] bool all_active() const {
        return std::all_of(active.begin(), active.end(), [](bool b) { return b; });
    }
};

/// Cosine similarity of POI context vectors.
[[nodiscard]] inline ContextMatrix build_context_matrix(const PoiTable& table) {
    const Matrix u = poi_context_vectors(table);
    const Eigen::Index m = u.rows();
    if (table.counts.sum() == 0) throw input_error("POI table is all zero");
    const Vector norms = u.rowwise().norm();
    ContextMatrix ctx{Matrix::Zero(m, m), std::vector<bool>(static_cast<std::size_t>(m), false)};
    for (Eigen::Index p = 0; p < m; ++p) ctx.active[static_cast<std::size_t>(p)] = norms(p) > 0.0;
    for (Eigen::Index p = 0; p < m; ++p) {
        if (!ctx.active[static_cast<std::size_t>(p)]) continue;
        ctx.w(p, p) = 1.0;
        for (Eigen::Index q = p + 1; q < m; ++q) {
            if (!ctx.active[static_cast<std::size_t>(q)]) continue;
            const double c = std::min(1.0, u.row(p).dot(u.row(q)) / (norms(p) * norms(q)));
            ctx.w(p, q) = c;
            ctx.w(q, p) = c;
        }
    }
    return ctx;
}

/// Adjacency sets M_x, sorted and free of self-loops.
struct NeighborGraph {
    std::vector<std::vector<std::size_t>> neighbors;

    [[nodiscard]] std::size_t zones() const { return neighbors.size(); }
    [[nodiscard]] bool isolated(std::size_t x) const { return neighbors[x].empty(); }
    [[nodiscard]] std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& nb : neighbors) n += nb.size();
        return n / 2;
    }
};

/// Symmetric closure of undirected pairs; duplicates merged and self-loops dropped.
[[nodiscard]] inline NeighborGraph
build_neighbor_graph(std::span<const std::pair<std::size_t, std::size_t>> pairs, std::size_t zones) {
    std::vector<std::set<std::size_t>> sets(zones);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [a, b] = pairs[i];
        if (a >= zones || b >= zones)
            throw input_error("adjacency pair " + std::to_string(i) + " references zone out of range");
        if (a == b) continue;
        sets[a].insert(b);
        sets[b].insert(a);
    }
    NeighborGraph g;
    g.neighbors.reserve(zones);
    for (const auto& s : sets) g.neighbors.emplace_back(s.begin(), s.end());
    return g;
}

/// Parses `zone_a,zone_b`; dangling zone indices are reported with their line number.
[[nodiscard]] inline NeighborGraph read_adjacency_csv(std::istream& is, std::size_t zones,
                                                      const std::string& source = "adjacency") {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto fields = detail::split_csv_line(line);
        if (lineno == 1) {
            if (fields != std::vector<std::string>{"zone_a", "zone_b"})
                throw input_error(source + ":1: expected header zone_a,zone_b");
            continue;
        }
        if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        if (fields.size() != 2) throw input_error(where + ": wrong number of fields");
        const auto a = detail::parse_index(fields[0], where);
        const auto b = detail::parse_index(fields[1], where);
        if (a >= zones || b >= zones) throw input_error(where + ": zone index out of range");
        pairs.emplace_back(a, b);
    }
    if (lineno == 0) throw input_error(source + ": empty file");
    return build_neighbor_graph(pairs, zones);
}

/// 4-neighborhood adjacency of a rows x cols grid, zones numbered row-major.
[[nodiscard]] inline NeighborGraph grid_neighbor_graph(std::size_t rows, std::size_t cols) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t z = r * cols + c;
            if (c + 1 < cols) pairs.emplace_back(z, z + 1);
            if (r + 1 < rows) pairs.emplace_back(z, z + cols);
        }
    return build_neighbor_graph(pairs, rows * cols);
}

}  // namespace odt
