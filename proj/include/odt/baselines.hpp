#pragma once

// Comparison models sharing the block solver: nonnegative CP, context-regularized
// CP and plain nonnegative Tucker. A CP model is solved as a Tucker model whose
// core is a frozen superdiagonal of ones.

#include "odt/model.hpp"
#include "odt/solver.hpp"

namespace odt {

struct CpModel {
    Matrix origin;       // M x m
    Matrix destination;  // M x m
    Matrix time;         // N x m

    [[nodiscard]] std::size_t rank() const { return static_cast<std::size_t>(origin.cols()); }

    void validate() const {
        if (destination.cols() != origin.cols() || time.cols() != origin.cols() ||
            destination.rows() != origin.rows())
            throw input_error("CP factor shapes are inconsistent");
    }
};

[[nodiscard]] inline Tensor3 superdiagonal_core(std::size_t rank) {
    Tensor3 c(rank, rank, rank);
    for (std::size_t i = 0; i < rank; ++i) c(i, i, i) = 1.0;
    return c;
}

[[nodiscard]] inline FactorModel to_tucker(const CpModel& cp) {
    cp.validate();
    return {superdiagonal_core(cp.rank()), cp.origin, cp.destination, cp.time};
}

[[nodiscard]] inline CpModel to_cp(const FactorModel& m) {
    return {m.origin, m.destination, m.time};
}

/// sum_m o_:m outer d_:m outer t_:m, one slice at a time: X_::z = O diag(t_z) D^T.
[[nodiscard]] inline Tensor3 cp_reconstruct(const CpModel& model) {
    model.validate();
    const auto m = static_cast<std::size_t>(model.origin.rows());
    const auto n = static_cast<std::size_t>(model.time.rows());
    Tensor3 out(m, m, n);
    for (std::size_t z = 0; z < n; ++z) {
        Eigen::Map<Matrix> slice(out.data() + z * m * m, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        slice.noalias() = model.origin * model.time.row(static_cast<Eigen::Index>(z)).asDiagonal() *
                          model.destination.transpose();
    }
    return out;
}

/// Uniform (0,1) start scaled so |S o reconstruction|_F matches |S o R|_F.
[[nodiscard]] inline CpModel random_cp_model(const Tensor3& r, std::size_t rank, std::uint64_t seed,
                                             const SampleMask* mask = nullptr) {
    if (rank == 0) throw input_error("CP rank must be positive");
    std::mt19937_64 rng(seed);
    const auto m = static_cast<Eigen::Index>(r.dims()[0]);
    const auto n = static_cast<Eigen::Index>(r.dims()[2]);
    const auto k = static_cast<Eigen::Index>(rank);
    CpModel cp{uniform_matrix(m, k, rng), uniform_matrix(m, k, rng), uniform_matrix(n, k, rng)};
    const Tensor3 x = cp_reconstruct(cp);
    const double target = mask ? frobenius_norm(mask->apply(r)) : frobenius_norm(r);
    const double current = mask ? frobenius_norm(mask->apply(x)) : frobenius_norm(x);
    if (current > 0.0) {
        const double s = std::cbrt(target / current);
        cp.origin *= s;
        cp.destination *= s;
        cp.time *= s;
    }
    return cp;
}

struct CpSolveResult {
    CpModel model;
    std::vector<double> objective_history;
    std::size_t rounds = 0;
    bool converged = false;
};

namespace detail {

inline CpSolveResult cp_solve_impl(const Tensor3& r, const ContextMatrix* ctx, Hyperparameters h,
                                   const SampleMask* mask, const CpModel& init) {
    h.sparsity_core = 0.0;  // the frozen core carries no penalty
    h.neighbor_regularization = false;
    h.ranks = {init.rank(), init.rank(), init.rank()};
    SolveOptions opts;
    opts.mask = mask;
    opts.freeze_core = true;
    auto res = bcd_solve(r, ctx, h, to_tucker(init), opts);
    return {to_cp(res.model), std::move(res.objective_history), res.rounds, res.converged};
}

}  // namespace detail

/// Nonnegative CP with L1 penalties on the three factors.
[[nodiscard]] inline CpSolveResult cp_solve(const Tensor3& r, const Hyperparameters& h, const SampleMask* mask,
                                            const CpModel& init) {
    return detail::cp_solve_impl(r, nullptr, h.without_context(), mask, init);
}

/// CP with the two context terms added.
[[nodiscard]] inline CpSolveResult rcp_solve(const Tensor3& r, const ContextMatrix& ctx, const Hyperparameters& h,
                                             const SampleMask* mask, const CpModel& init) {
    return detail::cp_solve_impl(r, &ctx, h, mask, init);
}

/// Nonnegative Tucker: no context terms and no neighboring pass.
[[nodiscard]] inline SolveResult tucker_solve(const Tensor3& r, const Hyperparameters& h, const SampleMask* mask,
                                              FactorModel init) {
    SolveOptions opts;
    opts.mask = mask;
    return bcd_solve(r, nullptr, h.without_context(), std::move(init), opts);
}

/// Multi-start wrappers: same seed derivation as bcd_solve_multistart, lowest final objective wins.
[[nodiscard]] inline CpSolveResult cp_solve_multistart(const Tensor3& r, const ContextMatrix* ctx,
                                                       const Hyperparameters& h, std::size_t rank,
                                                       const SampleMask* mask, std::uint64_t seed,
                                                       std::size_t starts) {
    if (starts == 0) throw input_error("at least one start is required");
    std::optional<CpSolveResult> best;
    for (std::size_t s = 0; s < starts; ++s) {
        const CpModel init = random_cp_model(r, rank, start_seed(seed, s), mask);
        auto res = ctx ? rcp_solve(r, *ctx, h, mask, init) : cp_solve(r, h, mask, init);
        if (!best || res.objective_history.back() < best->objective_history.back()) best = std::move(res);
    }
    return std::move(*best);
}

[[nodiscard]] inline SolveResult tucker_solve_multistart(const Tensor3& r, const Hyperparameters& h,
                                                         const SampleMask* mask, std::uint64_t seed,
                                                         std::size_t starts) {
    SolveOptions opts;
    opts.mask = mask;
    return bcd_solve_multistart(r, nullptr, h.without_context(), seed, starts, opts);
}

}  // namespace odt
