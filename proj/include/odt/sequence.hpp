#pragma once

// Pipeline-initialized analysis of a sequence of yearly tensors: year 1 starts
// from a seeded random model, every later year starts from the previous
// year's solution and is fitted to its own tensor and context only. Pattern
// labels therefore carry over by column index.

#include "odt/errors.hpp"
#include "odt/solver.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace odt {

struct YearInput {
    std::string label;
    Tensor3 tensor;
    ContextMatrix context;
    std::optional<SampleMask> mask;
};

struct YearResult {
    std::string label;
    FactorModel model;
    std::vector<double> objective_history;
    std::size_t rounds = 0;
    bool converged = false;
};

struct PatternSequence {
    std::vector<YearResult> years;
};

/// Supplies year l (0-based) on demand.
using YearLoader = std::function<YearInput(std::size_t)>;

/// Runs the pipeline over `length` years, loading each year exactly once and
/// only when its own fit starts.
[[nodiscard]] inline PatternSequence pi_tsa(std::size_t length, const YearLoader& load, const Hyperparameters& h,
                                            const NeighborGraph* graph, std::uint64_t seed) {
    if (length == 0) throw input_error("sequence must contain at least one year");
    PatternSequence seq;
    for (std::size_t l = 0; l < length; ++l) {
        const YearInput year = load(l);
        const auto& d = year.tensor.dims();
        if (l > 0) {
            const auto& prev = seq.years.back().model;
            if (d[0] != prev.zones() || d[1] != prev.zones() || d[2] != prev.slices())
                throw input_error("year '" + year.label + "' has dims that differ from the previous year");
        }
        const SampleMask* mask = year.mask ? &*year.mask : nullptr;
        FactorModel init = l == 0 ? random_model(year.tensor, h.ranks, seed, mask) : seq.years.back().model;
        SolveOptions opts;
        opts.graph = graph;
        opts.mask = mask;
        auto res = bcd_solve(year.tensor, &year.context, h, std::move(init), opts);
        seq.years.push_back({year.label, std::move(res.model), std::move(res.objective_history), res.rounds,
                             res.converged});
    }
    return seq;
}

[[nodiscard]] inline PatternSequence pi_tsa(std::span<const YearInput> inputs, const Hyperparameters& h,
                                            const NeighborGraph* graph, std::uint64_t seed) {
    return pi_tsa(inputs.size(), [&](std::size_t l) { return inputs[l]; }, h, graph, seed);
}

/// |current - previous|_F / |previous|_F (0 when both vanish).
[[nodiscard]] inline double relative_drift(const Matrix& current, const Matrix& previous) {
    const double base = previous.norm();
    const double diff = (current - previous).norm();
    if (base == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / base;
}

/// Pearson correlation between column i of `a` and column j of `b`; 0 for constant columns.
[[nodiscard]] inline Matrix column_correlation(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw input_error("column_correlation: row counts differ");
    Matrix out = Matrix::Zero(a.cols(), b.cols());
    const auto center = [](const Matrix& m) {
        Matrix c = m.rowwise() - m.colwise().mean();
        return c;
    };
    const Matrix ca = center(a);
    const Matrix cb = center(b);
    for (Eigen::Index i = 0; i < a.cols(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            const double na = ca.col(i).norm();
            const double nb = cb.col(j).norm();
            if (na > 0.0 && nb > 0.0) out(i, j) = ca.col(i).dot(cb.col(j)) / (na * nb);
        }
    return out;
}

struct DriftReport {
    std::string label;
    double origin = 0.0;
    double destination = 0.0;
    double time = 0.0;
    Matrix origin_correlation;       // column i of year l-1 vs column j of year l
    Matrix destination_correlation;
};

/// One entry per year l >= 2 comparing it with year l-1.
[[nodiscard]] inline std::vector<DriftReport> drift_report(const PatternSequence& seq) {
    std::vector<DriftReport> out;
    for (std::size_t l = 1; l < seq.years.size(); ++l) {
        const auto& prev = seq.years[l - 1].model;
        const auto& cur = seq.years[l].model;
        out.push_back({seq.years[l].label, relative_drift(cur.origin, prev.origin),
                       relative_drift(cur.destination, prev.destination), relative_drift(cur.time, prev.time),
                       column_correlation(prev.origin, cur.origin),
                       column_correlation(prev.destination, cur.destination)});
    }
    return out;
}

}  // namespace odt
