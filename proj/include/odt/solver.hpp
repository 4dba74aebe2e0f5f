#pragma once

// Block coordinate descent with proximal-gradient block updates.
//
// Each round updates C, O, D, T in turn. A block update takes one proximal
// step from an extrapolated point; if that raises the objective the step is
// redone from the current point (no extrapolation), backtracking on the step
// size until the quadratic upper model holds. With neighboring regularization
// enabled, the neighbor pass is then applied to O and D and kept only when it
// does not raise the objective. The recorded objective history is therefore
// non-increasing.

#include "odt/errors.hpp"
#include "odt/ingestion.hpp"
#include "odt/model.hpp"
#include "odt/neighbor_reg.hpp"
#include "odt/objective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace odt {

enum class Block { core, origin, destination, time };

inline constexpr double kLipschitzFloor = 1e-10;
inline constexpr double kExtrapolationCap = 0.9999;
inline constexpr int kMaxBacktracks = 60;

/// Proximal step for nonnegative L1: max(0, x - grad/tau - lambda/tau), elementwise.
[[nodiscard]] inline Matrix pg_step(const Matrix& point, const Matrix& grad, double tau, double lambda) {
    if (!(tau > 0.0)) throw input_error("pg_step: tau must be positive");
    if (point.rows() != grad.rows() || point.cols() != grad.cols())
        throw input_error("pg_step: gradient shape mismatch");
    return (point - grad / tau)
        .array()
        .unaryExpr([&](double v) { return std::max(0.0, v - lambda / tau); })
        .matrix();
}

[[nodiscard]] inline Tensor3 pg_step(const Tensor3& point, const Tensor3& grad, double tau, double lambda) {
    if (!(tau > 0.0)) throw input_error("pg_step: tau must be positive");
    point.require_same_dims(grad, "pg_step");
    Tensor3 out(point.dims());
    auto o = out.values();
    auto p = point.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::max(0.0, p[i] - g[i] / tau - lambda / tau);
    return out;
}

/// Spectral norm of the (masked) context matrix, used by the O/D curvature bound.
[[nodiscard]] inline double context_spectral_norm(const ContextMatrix& ctx) {
    Matrix w = ctx.w;
    for (Eigen::Index p = 0; p < w.rows(); ++p)
        if (!ctx.active[static_cast<std::size_t>(p)]) {
            w.row(p).setZero();
            w.col(p).setZero();
        }
    if (w.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(w, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Step-size constant for one block at the current iterate.
///
/// Core and time blocks are quadratic; the value is the exact Lipschitz
/// constant of their gradient (an upper bound under a mask). For O and D the
/// quadratic part is exact and the quartic context term contributes the local
/// bound 4 * weight * (|W|_2 + 3 |V|_2^2), so callers must backtrack.
[[nodiscard]] inline double lipschitz_estimate(Block block, const FactorModel& m, const Hyperparameters& h,
                                               double context_norm = 0.0) {
    const Matrix go = m.origin.transpose() * m.origin;
    const Matrix gd = m.destination.transpose() * m.destination;
    const Matrix gt = m.time.transpose() * m.time;
    double tau = 0.0;
    switch (block) {
    case Block::core:
        tau = 2.0 * largest_eigenvalue(go) * largest_eigenvalue(gd) * largest_eigenvalue(gt);
        break;
    case Block::origin: {
        const Matrix c1 = matricize(m.core, Mode::first);
        const Matrix b = matricize(mode_product(mode_product(m.core, gd, Mode::second), gt, Mode::third),
                                   Mode::first) * c1.transpose();
        tau = 2.0 * largest_eigenvalue(0.5 * (b + b.transpose()));
        if (h.context_origin > 0.0)
            tau += 4.0 * h.context_origin * (context_norm + 3.0 * largest_eigenvalue(go));
        break;
    }
    case Block::destination: {
        const Matrix c2 = matricize(m.core, Mode::second);
        const Matrix b = matricize(mode_product(mode_product(m.core, go, Mode::first), gt, Mode::third),
                                   Mode::second) * c2.transpose();
        tau = 2.0 * largest_eigenvalue(0.5 * (b + b.transpose()));
        if (h.context_destination > 0.0)
            tau += 4.0 * h.context_destination * (context_norm + 3.0 * largest_eigenvalue(gd));
        break;
    }
    case Block::time: {
        const Matrix c3 = matricize(m.core, Mode::third);
        const Matrix b = matricize(mode_product(mode_product(m.core, go, Mode::first), gd, Mode::second),
                                   Mode::third) * c3.transpose();
        tau = 2.0 * largest_eigenvalue(0.5 * (b + b.transpose()));
        break;
    }
    }
    return std::isfinite(tau) ? std::max(tau, kLipschitzFloor) : tau;
}

/// t-sequence of accelerated block updates: t_0 = 1, t_s = (1 + sqrt(1 + 4 t_{s-1}^2)) / 2.
struct MomentumSequence {
    double previous = 1.0;
    double current = 1.0;
    std::size_t steps = 0;

    void advance() {
        previous = current;
        current = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * current * current));
        ++steps;
    }
};

/// omega = min((t_{s-1} - 1) / t_s, cap * sqrt(tau_prev / tau_curr)); zero in the first round.
[[nodiscard]] inline double extrapolation_weight(std::size_t round, const MomentumSequence& seq, double tau_prev,
                                                 double tau_curr, double cap = kExtrapolationCap) {
    if (round <= 1 || !(tau_prev > 0.0) || !(tau_curr > 0.0)) return 0.0;
    const double hat = (seq.previous - 1.0) / seq.current;
    return std::clamp(std::min(hat, cap * std::sqrt(tau_prev / tau_curr)), 0.0, cap);
}

struct RoundReport {
    std::size_t round = 0;
    double objective = 0.0;
    std::size_t restarts = 0;     // extrapolated steps discarded this round
    bool nr_origin_applied = false;
    bool nr_destination_applied = false;
};

struct SolveOptions {
    const NeighborGraph* graph = nullptr;  // required for the neighboring pass
    const SampleMask* mask = nullptr;
    bool freeze_core = false;              // CP baselines keep a fixed superdiagonal core
    std::function<void(const RoundReport&)> on_round;
};

struct SolveResult {
    FactorModel model;
    std::vector<double> objective_history;  // [0] is the initial objective
    std::size_t rounds = 0;
    bool converged = false;
    std::size_t restarts = 0;
    std::size_t start_index = 0;  // which random start won in a multi-start run
    std::size_t nr_accepted = 0;
    std::size_t nr_rejected = 0;
    std::vector<std::size_t> nr_rejected_rounds;  // rounds where the raw neighbor pass would have raised the objective
    double nr_sigma_origin = 0.0;
    double nr_sigma_destination = 0.0;
};

namespace detail {

class BcdSolver {
public:
    BcdSolver(const Tensor3& r, const ContextMatrix* ctx, const Hyperparameters& h, const SolveOptions& opts)
        : r_(r), ctx_(ctx), h_(h), opts_(opts) {
        if (ctx_ && (h_.context_origin > 0.0 || h_.context_destination > 0.0))
            context_norm_ = context_spectral_norm(*ctx_);
    }

    SolveResult run(FactorModel init) {
        h_.validate();
        detail::check_compatible(r_, ctx_, init, opts_.mask);
        if (!init.nonnegative()) throw input_error("initial model must be nonnegative");

        SolveResult result;
        model_ = std::move(init);
        previous_ = model_;
        f_ = evaluate(model_);
        if (!std::isfinite(f_)) throw solver_error("initial objective is not finite");
        result.objective_history.push_back(f_);

        const bool nr = h_.neighbor_regularization && opts_.graph != nullptr;
        if (nr) prepare_kernels(result);

        MomentumSequence seq;
        for (std::size_t s = 1; s <= h_.max_rounds; ++s) {
            seq.advance();
            const FactorModel round_start = model_;
            const double f_start = f_;
            RoundReport report{s, 0.0, 0, false, false};

            if (!opts_.freeze_core) update_block(Block::core, s, seq, report);
            update_block(Block::origin, s, seq, report);
            update_block(Block::destination, s, seq, report);
            update_block(Block::time, s, seq, report);

            if (nr) {
                report.nr_origin_applied = apply_nr(Side::origin, round_start, result, s);
                report.nr_destination_applied = apply_nr(Side::destination, round_start, result, s);
            }
            if (!std::isfinite(f_)) throw solver_error("objective became non-finite in round " + std::to_string(s));

            result.objective_history.push_back(f_);
            result.rounds = s;
            result.restarts += report.restarts;
            report.objective = f_;
            if (opts_.on_round) opts_.on_round(report);

            const double change = f_start - f_;
            if (f_start == 0.0 || change <= h_.tolerance * std::abs(f_start)) {
                result.converged = true;
                break;
            }
        }
        result.model = std::move(model_);
        return result;
    }

private:
    double evaluate(const FactorModel& m) const { return objective(r_, ctx_, m, h_, opts_.mask); }
    double evaluate_smooth(const FactorModel& m) const {
        return objective_terms(r_, ctx_, m, h_, opts_.mask).smooth();
    }

    double lambda(Block b) const {
        switch (b) {
        case Block::core: return h_.sparsity_core;
        case Block::origin: return h_.sparsity_origin;
        case Block::destination: return h_.sparsity_destination;
        case Block::time: return h_.sparsity_time;
        }
        return 0.0;
    }

    static std::size_t index(Block b) { return static_cast<std::size_t>(b); }

    // Works on either the core tensor or one of the factor matrices.
    template <typename T>
    static T& block_ref(FactorModel& m, Block b) {
        if constexpr (std::is_same_v<T, Tensor3>) {
            return m.core;
        } else {
            switch (b) {
            case Block::origin: return m.origin;
            case Block::destination: return m.destination;
            default: return m.time;
            }
        }
    }

    Matrix matrix_gradient(Block b, const FactorModel& m) const {
        switch (b) {
        case Block::origin: return gradient_origin(r_, ctx_, m, h_, opts_.mask);
        case Block::destination: return gradient_destination(r_, ctx_, m, h_, opts_.mask);
        default: return gradient_time(r_, m, opts_.mask);
        }
    }

    static double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }
    static double inner(const Tensor3& a, const Tensor3& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
        return s;
    }
    static double sq_norm(const Matrix& a) { return a.squaredNorm(); }
    static double sq_norm(const Tensor3& a) { return frobenius_norm_squared(a); }

    void update_block(Block b, std::size_t round, const MomentumSequence& seq, RoundReport& report) {
        if (b == Block::core)
            update_block_impl<Tensor3>(b, round, seq, report);
        else
            update_block_impl<Matrix>(b, round, seq, report);
    }

    template <typename T>
    T block_gradient(Block b, const FactorModel& m) const {
        if constexpr (std::is_same_v<T, Tensor3>)
            return gradient_core(r_, m, opts_.mask);
        else
            return matrix_gradient(b, m);
    }

    template <typename T>
    void update_block_impl(Block b, std::size_t round, const MomentumSequence& seq, RoundReport& report) {
        double tau = lipschitz_estimate(b, model_, h_, context_norm_);
        if (!std::isfinite(tau)) throw solver_error("non-finite Lipschitz estimate");
        const double omega = extrapolation_weight(round, seq, tau_prev_[index(b)], tau);
        const T current = block_ref<T>(model_, b);
        const double lam = lambda(b);

        std::optional<double> accepted;
        FactorModel trial = model_;
        if (omega > 0.0) {
            const T& prev = block_ref<T>(previous_, b);
            const T extrapolated = current + (current - prev) * omega;
            block_ref<T>(trial, b) = extrapolated;
            const T grad = block_gradient<T>(b, trial);
            block_ref<T>(trial, b) = pg_step(extrapolated, grad, tau, lam);
            const double f_trial = evaluate(trial);
            if (f_trial <= f_) accepted = f_trial;
            else ++report.restarts;
        }
        if (!accepted) {
            // plain proximal step from the current point with backtracking
            trial = model_;
            const T grad = block_gradient<T>(b, model_);
            const double smooth_now = evaluate_smooth(model_);
            for (int attempt = 0; attempt <= kMaxBacktracks; ++attempt) {
                T candidate = pg_step(current, grad, tau, lam);
                const T delta = candidate - current;
                block_ref<T>(trial, b) = std::move(candidate);
                const double smooth_new = evaluate_smooth(trial);
                const double model_bound = smooth_now + inner(grad, delta) + 0.5 * tau * sq_norm(delta);
                const double slack = 1e-12 * (std::abs(smooth_now) + 1.0);
                if (std::isfinite(smooth_new) && smooth_new <= model_bound + slack) {
                    const double f_trial = evaluate(trial);
                    if (f_trial <= f_) accepted = f_trial;
                    break;
                }
                tau *= 2.0;
            }
        }
        if (accepted) {
            block_ref<T>(previous_, b) = current;
            model_ = std::move(trial);
            f_ = *accepted;
        } else {
            block_ref<T>(previous_, b) = current;
        }
        tau_prev_[index(b)] = tau;
    }

    void prepare_kernels(SolveResult& result) {
        const Tensor3 observed = opts_.mask ? opts_.mask->apply(r_) : r_;
        const double so = h_.nr_sigma > 0.0 ? h_.nr_sigma : median_slice_distance(observed, *opts_.graph, Side::origin);
        const double sd =
            h_.nr_sigma > 0.0 ? h_.nr_sigma : median_slice_distance(observed, *opts_.graph, Side::destination);
        nr_origin_ = NrConfig{so, h_.nr_epsilon_floor};
        nr_destination_ = NrConfig{sd, h_.nr_epsilon_floor};
        kernels_origin_ = PairwiseKernelCache::build(observed, *opts_.graph, Side::origin, nr_origin_);
        kernels_destination_ = PairwiseKernelCache::build(observed, *opts_.graph, Side::destination, nr_destination_);
        result.nr_sigma_origin = so;
        result.nr_sigma_destination = sd;
    }

    bool apply_nr(Side side, const FactorModel& round_start, SolveResult& result, std::size_t round) {
        const bool origin = side == Side::origin;
        const Matrix& v = origin ? model_.origin : model_.destination;
        const Matrix& v_prev = origin ? round_start.origin : round_start.destination;
        Matrix updated = nr_update(v, v_prev, origin ? kernels_origin_ : kernels_destination_, *opts_.graph,
                                   origin ? nr_origin_ : nr_destination_);
        if (updated == v) return false;
        FactorModel trial = model_;
        (origin ? trial.origin : trial.destination) = updated;
        const double f_trial = evaluate(trial);
        if (f_trial <= f_) {
            model_ = std::move(trial);
            f_ = f_trial;
            // no momentum across a neighbor correction
            (origin ? previous_.origin : previous_.destination) = origin ? model_.origin : model_.destination;
            ++result.nr_accepted;
            return true;
        }
        ++result.nr_rejected;
        if (result.nr_rejected_rounds.empty() || result.nr_rejected_rounds.back() != round)
            result.nr_rejected_rounds.push_back(round);
        return false;
    }

    const Tensor3& r_;
    const ContextMatrix* ctx_;
    Hyperparameters h_;
    SolveOptions opts_;
    double context_norm_ = 0.0;

    FactorModel model_;
    FactorModel previous_;
    double f_ = 0.0;
    std::array<double, 4> tau_prev_{0.0, 0.0, 0.0, 0.0};

    NrConfig nr_origin_;
    NrConfig nr_destination_;
    PairwiseKernelCache kernels_origin_;
    PairwiseKernelCache kernels_destination_;
};

}  // namespace detail

/// Fits the context-regularized (and optionally neighbor-regularized) Tucker model.
[[nodiscard]] inline SolveResult bcd_solve(const Tensor3& r, const ContextMatrix* ctx, const Hyperparameters& h,
                                           FactorModel init, const SolveOptions& opts = {}) {
    return detail::BcdSolver(r, ctx, h, opts).run(std::move(init));
}

/// Seed of start s in a multi-start run; start 0 uses `seed` itself.
[[nodiscard]] inline std::uint64_t start_seed(std::uint64_t seed, std::size_t s) {
    return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(s);
}

/// Solves from `starts` seeded random initializations and keeps the lowest final
/// objective (earliest start on ties).
[[nodiscard]] inline SolveResult bcd_solve_multistart(const Tensor3& r, const ContextMatrix* ctx,
                                                      const Hyperparameters& h, std::uint64_t seed,
                                                      std::size_t starts, const SolveOptions& opts = {}) {
    if (starts == 0) throw input_error("at least one start is required");
    std::optional<SolveResult> best;
    for (std::size_t s = 0; s < starts; ++s) {
        auto res = bcd_solve(r, ctx, h, random_model(r, h.ranks, start_seed(seed, s), opts.mask), opts);
        res.start_index = s;
        if (!best || res.objective_history.back() < best->objective_history.back()) best = std::move(res);
    }
    return std::move(*best);
}

}  // namespace odt
