#pragma once

// CRF-style neighboring regularization of a spatial projection matrix.
//
// For a projection V (zones x patterns) with row-normalized version V':
//   unary     psi_xi = -log max(V'_xi, floor)
//   pairwise  Q_xi   = sum_{y in N(x)} g(x, y) * (1 - V'_yi)
//   target    Vt_xi  = exp(-(psi_xi + Q_xi)) * sum_j V_xj
// and the update blends Vt into the current iterate depending on the sign of
// the last solver step (see nr_update). g is a Gaussian kernel on the data
// tensor slices of the two zones.

#include "odt/errors.hpp"
#include "odt/ingestion.hpp"
#include "odt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace odt {

enum class Side { origin, destination };

struct NrConfig {
    double sigma = 1.0;
    double epsilon_floor = 1e-12;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw input_error("NR kernel width must be positive");
        if (!(epsilon_floor > 0.0 && epsilon_floor <= 1e-6))
            throw input_error("NR epsilon floor must lie in (0, 1e-6]");
    }
};

/// |R_x:: - R_y::|_F^2 for the origin side, |R_:x: - R_:y:|_F^2 for the destination side.
[[nodiscard]] inline double slice_distance_squared(const Tensor3& r, std::size_t x, std::size_t y, Side side) {
    const auto [d1, d2, d3] = r.dims();
    double s = 0.0;
    if (side == Side::origin) {
        for (std::size_t z = 0; z < d3; ++z)
            for (std::size_t b = 0; b < d2; ++b) {
                const double diff = r(x, b, z) - r(y, b, z);
                s += diff * diff;
            }
    } else {
        for (std::size_t z = 0; z < d3; ++z)
            for (std::size_t a = 0; a < d1; ++a) {
                const double diff = r(a, x, z) - r(a, y, z);
                s += diff * diff;
            }
    }
    return s;
}

/// g(x, y) = exp(-|slice_x - slice_y|_F^2 / (2 sigma^2)), in (0, 1].
[[nodiscard]] inline double pairwise_kernel(const Tensor3& r, std::size_t x, std::size_t y, Side side,
                                            const NrConfig& cfg) {
    return std::exp(-slice_distance_squared(r, x, y, side) / (2.0 * cfg.sigma * cfg.sigma));
}

/// Median of |slice_x - slice_y|_F over all neighbor pairs; 1 when that is zero or there are no pairs.
[[nodiscard]] inline double median_slice_distance(const Tensor3& r, const NeighborGraph& graph, Side side) {
    std::vector<double> d;
    for (std::size_t x = 0; x < graph.zones(); ++x)
        for (std::size_t y : graph.neighbors[x])
            if (x < y) d.push_back(std::sqrt(slice_distance_squared(r, x, y, side)));
    if (d.empty()) return 1.0;
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
    return med > 0.0 ? med : 1.0;
}

/// g(x, y) for every neighbor pair, laid out like graph.neighbors.
struct PairwiseKernelCache {
    std::vector<std::vector<double>> g;

    [[nodiscard]] static PairwiseKernelCache build(const Tensor3& r, const NeighborGraph& graph, Side side,
                                                   const NrConfig& cfg) {
        cfg.validate();
        if (r.dims()[0] != graph.zones() || r.dims()[1] != graph.zones())
            throw input_error("neighbor graph zone count does not match the data tensor");
        PairwiseKernelCache cache;
        cache.g.resize(graph.zones());
        for (std::size_t x = 0; x < graph.zones(); ++x) cache.g[x].assign(graph.neighbors[x].size(), 0.0);
        // one evaluation per undirected edge keeps the cache exactly symmetric
        for (std::size_t x = 0; x < graph.zones(); ++x) {
            for (std::size_t n = 0; n < graph.neighbors[x].size(); ++n) {
                const std::size_t y = graph.neighbors[x][n];
                if (y < x) continue;
                const double v = pairwise_kernel(r, x, y, side, cfg);
                cache.g[x][n] = v;
                const auto& back = graph.neighbors[y];
                const auto it = std::lower_bound(back.begin(), back.end(), x);
                if (it != back.end() && *it == x) cache.g[y][static_cast<std::size_t>(it - back.begin())] = v;
            }
        }
        return cache;
    }
};

/// Row-normalize; rows summing to zero become uniform.
[[nodiscard]] inline Matrix normalize_rows(const Matrix& v) {
    Matrix out(v.rows(), v.cols());
    for (Eigen::Index x = 0; x < v.rows(); ++x) {
        const double s = v.row(x).sum();
        if (s > 0.0)
            out.row(x) = v.row(x) / s;
        else
            out.row(x).setConstant(1.0 / static_cast<double>(v.cols()));
    }
    return out;
}

/// psi_xi = -log max(v'_xi, floor).
[[nodiscard]] inline Matrix unary_potentials(const Matrix& v, const NrConfig& cfg) {
    if ((v.array() < 0.0).any()) throw input_error("unary potentials need a nonnegative matrix");
    const Matrix p = normalize_rows(v);
    return p.unaryExpr([&](double o) { return -std::log(std::max(o, cfg.epsilon_floor)); });
}

/// Q_xi = sum_{y in N(x)} g(x, y) (1 - v'_yi), the closed form of the expected
/// pairwise potential when neighbor labels follow their normalized rows.
[[nodiscard]] inline Matrix pairwise_potentials(const Matrix& v_normalized, const PairwiseKernelCache& kernels,
                                                const NeighborGraph& graph) {
    const Eigen::Index m = v_normalized.rows();
    if (static_cast<std::size_t>(m) != graph.zones() || kernels.g.size() != graph.zones())
        throw input_error("pairwise potentials: zone count mismatch");
    Matrix q = Matrix::Zero(m, v_normalized.cols());
    for (Eigen::Index x = 0; x < m; ++x) {
        const auto& nb = graph.neighbors[static_cast<std::size_t>(x)];
        for (std::size_t n = 0; n < nb.size(); ++n) {
            const double g = kernels.g[static_cast<std::size_t>(x)][n];
            q.row(x).array() += g * (1.0 - v_normalized.row(static_cast<Eigen::Index>(nb[n])).array());
        }
    }
    return q;
}

/// Neighbor-regularized target Vt_xi = exp(-(psi_xi + Q_xi)) * sum_j v_xj.
[[nodiscard]] inline Matrix nr_target(const Matrix& v, const PairwiseKernelCache& kernels,
                                      const NeighborGraph& graph, const NrConfig& cfg) {
    const Matrix psi = unary_potentials(v, cfg);
    const Matrix q = pairwise_potentials(normalize_rows(v), kernels, graph);
    const Vector sums = v.rowwise().sum();
    Matrix out(v.rows(), v.cols());
    for (Eigen::Index x = 0; x < v.rows(); ++x)
        out.row(x) = (-(psi.row(x) + q.row(x))).array().exp() * sums(x);
    return out;
}

/// One neighboring-regularization pass.
///
/// With step = v - v_prev and nr = Vt - v, each element becomes
///   max(0, v_prev + step + nr)          if step <= 0
///   v_prev + max(0, step + nr)          otherwise.
/// Zones without neighbors are returned unchanged.
[[nodiscard]] inline Matrix nr_update(const Matrix& v, const Matrix& v_prev, const PairwiseKernelCache& kernels,
                                      const NeighborGraph& graph, const NrConfig& cfg) {
    if (v.rows() != v_prev.rows() || v.cols() != v_prev.cols())
        throw input_error("nr_update: current and previous matrices differ in shape");
    if ((v_prev.array() < 0.0).any()) throw input_error("nr_update: previous iterate must be nonnegative");
    const Matrix target = nr_target(v, kernels, graph, cfg);
    Matrix out = v;
    for (Eigen::Index x = 0; x < v.rows(); ++x) {
        if (graph.isolated(static_cast<std::size_t>(x))) continue;
        for (Eigen::Index i = 0; i < v.cols(); ++i) {
            const double nr = target(x, i) - v(x, i);
            if (nr == 0.0) continue;
            const double step = v(x, i) - v_prev(x, i);
            out(x, i) = step <= 0.0 ? std::max(0.0, v_prev(x, i) + step + nr)
                                    : v_prev(x, i) + std::max(0.0, step + nr);
        }
    }
    return out;
}

/// Convenience overload building the kernel cache from the data tensor.
[[nodiscard]] inline Matrix nr_update(const Matrix& v, const Matrix& v_prev, const Tensor3& r,
                                      const NeighborGraph& graph, const NrConfig& cfg, Side side) {
    return nr_update(v, v_prev, PairwiseKernelCache::build(r, graph, side, cfg), graph, cfg);
}

}  // namespace odt
