#pragma once

// Seeded synthetic city with planted factors.
//
// Zones sit on a grid_rows x grid_cols grid and are split into
// block_rows x block_cols contiguous community blocks (I = J = block count).
// Membership G is one-hot plus a small uniform perturbation; the planted
// projections are G with unit-length rows, so O O^T equals the context matrix
// (the row cosine of G) exactly. The neighbor graph is the grid's 4-neighborhood. Temporal patterns
// are Gaussian bumps spread over the day. The core is diagonal heavy, with a
// "tidal" plant: in the first rhythm every community sends flow into
// community 0 (column concentrated), in the last rhythm community 0 sends flow
// out to everyone (row concentrated).

#include "odt/errors.hpp"
#include "odt/ingestion.hpp"
#include "odt/model.hpp"
#include "odt/tensor_io.hpp"

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace odt {

struct PlantSpec {
    std::size_t grid_rows = 6;
    std::size_t grid_cols = 5;
    std::size_t block_rows = 2;
    std::size_t block_cols = 2;
    std::size_t slices = 12;
    std::size_t rhythms = 3;
    double noise_sigma = 0.01;
    double membership_perturbation = 0.05;
    double intra_weight = 2.0;
    double tidal_weight = 3.0;
    double background_weight = 0.3;
    std::uint64_t seed = 1;

    [[nodiscard]] std::size_t zones() const { return grid_rows * grid_cols; }
    [[nodiscard]] std::size_t communities() const { return block_rows * block_cols; }

    void validate() const {
        if (grid_rows == 0 || grid_cols == 0 || slices == 0 || rhythms == 0)
            throw input_error("synthetic city dims must be positive");
        if (block_rows == 0 || block_cols == 0 || block_rows > grid_rows || block_cols > grid_cols)
            throw input_error("community blocks do not fit on the grid");
        if (rhythms > slices) throw input_error("more rhythms than time slices");
        const double w[] = {noise_sigma, membership_perturbation, intra_weight, tidal_weight, background_weight};
        for (double v : w)
            if (!std::isfinite(v) || v < 0.0) throw input_error("synthetic city weights must be finite and >= 0");
    }
};

struct SynthCity {
    PlantSpec spec;
    FactorModel truth;
    std::vector<std::size_t> labels;  // planted community of every zone
    Matrix membership;                // G
    Tensor3 r;                        // reconstruction plus clipped noise
    ContextMatrix context;
    NeighborGraph graph;
};

/// Planted community of a grid zone: blocks split rows and columns as evenly as possible.
[[nodiscard]] inline std::size_t planted_label(const PlantSpec& s, std::size_t zone) {
    const std::size_t row = zone / s.grid_cols;
    const std::size_t col = zone % s.grid_cols;
    const std::size_t br = row * s.block_rows / s.grid_rows;
    const std::size_t bc = col * s.block_cols / s.grid_cols;
    return br * s.block_cols + bc;
}

[[nodiscard]] inline Tensor3 planted_core(const PlantSpec& s) {
    const std::size_t i_count = s.communities();
    Tensor3 c(i_count, i_count, s.rhythms, s.background_weight);
    for (std::size_t k = 0; k < s.rhythms; ++k)
        for (std::size_t i = 0; i < i_count; ++i) c(i, i, k) = s.intra_weight;
    if (s.rhythms >= 2) {
        for (std::size_t i = 1; i < i_count; ++i) c(i, 0, 0) = s.tidal_weight;
        for (std::size_t j = 1; j < i_count; ++j) c(0, j, s.rhythms - 1) = s.tidal_weight;
    }
    return c;
}

/// Unimodal bumps, one per rhythm, centered at evenly spaced slices.
[[nodiscard]] inline Matrix planted_rhythms(const PlantSpec& s) {
    const auto n = static_cast<Eigen::Index>(s.slices);
    const auto k = static_cast<Eigen::Index>(s.rhythms);
    const double width = static_cast<double>(s.slices) / (2.0 * static_cast<double>(s.rhythms));
    Matrix t(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const double center = (static_cast<double>(c) + 0.5) * static_cast<double>(s.slices) / static_cast<double>(k);
        for (Eigen::Index z = 0; z < n; ++z) {
            const double d = (static_cast<double>(z) - center) / width;
            t(z, c) = std::exp(-0.5 * d * d);
        }
    }
    return t;
}

[[nodiscard]] inline ContextMatrix row_cosine_context(const Matrix& g) {
    const Vector norms = g.rowwise().norm();
    Matrix w = Matrix::Zero(g.rows(), g.rows());
    for (Eigen::Index p = 0; p < g.rows(); ++p)
        for (Eigen::Index q = 0; q < g.rows(); ++q)
            if (norms(p) > 0.0 && norms(q) > 0.0)
                w(p, q) = p == q ? 1.0 : std::min(1.0, g.row(p).dot(g.row(q)) / (norms(p) * norms(q)));
    return ContextMatrix::dense(std::move(w));
}

[[nodiscard]] inline SynthCity generate(const PlantSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const auto m = static_cast<Eigen::Index>(spec.zones());
    const auto ic = static_cast<Eigen::Index>(spec.communities());

    SynthCity city;
    city.spec = spec;
    city.labels.resize(spec.zones());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    city.membership = Matrix(m, ic);
    for (Eigen::Index x = 0; x < m; ++x) {
        city.labels[static_cast<std::size_t>(x)] = planted_label(spec, static_cast<std::size_t>(x));
        for (Eigen::Index i = 0; i < ic; ++i) city.membership(x, i) = spec.membership_perturbation * unif(rng);
        city.membership(x, static_cast<Eigen::Index>(city.labels[static_cast<std::size_t>(x)])) += 1.0;
    }
    Matrix o(m, ic);
    for (Eigen::Index x = 0; x < m; ++x) o.row(x) = city.membership.row(x).normalized();

    city.truth = FactorModel{planted_core(spec), o, o, planted_rhythms(spec)};
    city.r = city.truth.reconstruct();
    if (spec.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (double& v : city.r.values()) v = std::max(0.0, v + noise(rng));
    }
    city.context = row_cosine_context(city.membership);
    city.graph = grid_neighbor_graph(spec.grid_rows, spec.grid_cols);
    return city;
}

/// Bernoulli(rate) observation mask.
[[nodiscard]] inline SampleMask sample_mask(const Tensor3::Dims& dims, double rate, std::uint64_t seed) {
    if (!(rate > 0.0 && rate <= 1.0)) throw input_error("sampling rate must lie in (0, 1]");
    Tensor3 s(dims, 1.0);
    if (rate < 1.0) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (double& v : s.values()) v = unif(rng) < rate ? 1.0 : 0.0;
    }
    return SampleMask(std::move(s));
}

// ---- emission in the ingestion formats --------------------------------------

/// Trip counts behind a log-volume tensor: round(exp(r) - 1), per cell.
[[nodiscard]] inline std::vector<std::uint64_t> trip_counts(const Tensor3& r) {
    std::vector<std::uint64_t> counts(r.size());
    auto v = r.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0 || !std::isfinite(v[i])) throw input_error("trip counts need a finite nonnegative tensor");
        counts[i] = static_cast<std::uint64_t>(std::llround(std::expm1(v[i])));
    }
    return counts;
}

/// ln(1 + count) of the rounded trip counts, i.e. what ingesting the emitted trips yields.
[[nodiscard]] inline Tensor3 quantized_tensor(const Tensor3& r) {
    const auto counts = trip_counts(r);
    Tensor3 q(r.dims());
    auto v = q.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log1p(static_cast<double>(counts[i]));
    return q;
}

/// One `vid,origin_zone,dest_zone,slice` row per trip, cells in storage order.
inline void write_trips_csv(std::ostream& os, const Tensor3& r) {
    const auto counts = trip_counts(r);
    const auto [d1, d2, d3] = r.dims();
    os << "vid,origin_zone,dest_zone,slice\n";
    std::uint64_t vid = 0;
    for (std::size_t z = 0; z < d3; ++z)
        for (std::size_t y = 0; y < d2; ++y)
            for (std::size_t x = 0; x < d1; ++x)
                for (std::uint64_t c = counts[r.offset(x, y, z)]; c > 0; --c)
                    os << 'v' << vid++ << ',' << x << ',' << y << ',' << z << '\n';
}

/// POI counts with one category per community: round(scale * G).
[[nodiscard]] inline PoiTable synthetic_poi_table(const SynthCity& city, double scale = 1000.0) {
    PoiTable t;
    t.counts = (city.membership * scale).array().round().cast<std::int64_t>().matrix();
    for (Eigen::Index i = 0; i < t.counts.cols(); ++i) t.category_names.push_back("community " + std::to_string(i));
    return t;
}

inline void write_poi_csv(std::ostream& os, const PoiTable& table) {
    os << "zone,category,count\n";
    for (Eigen::Index p = 0; p < table.counts.rows(); ++p)
        for (Eigen::Index h = 0; h < table.counts.cols(); ++h)
            if (table.counts(p, h) != 0) os << p << ',' << h + 1 << ',' << table.counts(p, h) << '\n';
}

inline void write_adjacency_csv(std::ostream& os, const NeighborGraph& graph) {
    os << "zone_a,zone_b\n";
    for (std::size_t x = 0; x < graph.zones(); ++x)
        for (std::size_t y : graph.neighbors[x])
            if (x < y) os << x << ',' << y << '\n';
}

}  // namespace odt
