#pragma once

// Objective value and gradients of the context-regularized Tucker model.
//
// Gradients cover the smooth part only (squared reconstruction error plus the
// two context terms); the L1 terms are handled by the proximal step. Without a
// mask the Gram-matrix form is used; with a mask the gradient is assembled from
// the masked residual S o (X - R).

#include "odt/ingestion.hpp"
#include "odt/model.hpp"
#include "odt/tensor.hpp"

namespace odt {

struct ObjectiveTerms {
    double reconstruction = 0.0;
    double context_origin = 0.0;
    double context_destination = 0.0;
    double l1_origin = 0.0;
    double l1_destination = 0.0;
    double l1_time = 0.0;
    double l1_core = 0.0;

    [[nodiscard]] double smooth() const { return reconstruction + context_origin + context_destination; }
    [[nodiscard]] double total() const {
        return smooth() + l1_origin + l1_destination + l1_time + l1_core;
    }
};

namespace detail {

inline void check_compatible(const Tensor3& r, const ContextMatrix* ctx, const FactorModel& model,
                             const SampleMask* mask) {
    model.validate();
    const auto& d = r.dims();
    if (d[0] != model.zones() || d[1] != model.zones() || d[2] != model.slices())
        throw input_error("data tensor dims do not match the factor model");
    if (mask && mask->dims() != d) throw input_error("sample mask dims do not match the data tensor");
    if (ctx && (ctx->zones() != model.zones() || ctx->w.cols() != ctx->w.rows() ||
                ctx->active.size() != ctx->zones()))
        throw input_error("context matrix dims do not match the zone count");
}

/// sum over active (p, q) of (w_pq - (V V^T)_pq)^2
inline double context_misfit(const ContextMatrix& ctx, const Matrix& v) {
    Matrix diff = ctx.w - v * v.transpose();
    if (!ctx.all_active()) {
        for (Eigen::Index p = 0; p < diff.rows(); ++p)
            if (!ctx.active[static_cast<std::size_t>(p)]) {
                diff.row(p).setZero();
                diff.col(p).setZero();
            }
    }
    return diff.squaredNorm();
}

/// d/dV sum_active (w - V V^T)^2 = -4 (P o (W - V V^T)) V for symmetric W.
inline Matrix context_gradient(const ContextMatrix& ctx, const Matrix& v) {
    Matrix diff = ctx.w - v * v.transpose();
    if (!ctx.all_active()) {
        for (Eigen::Index p = 0; p < diff.rows(); ++p)
            if (!ctx.active[static_cast<std::size_t>(p)]) {
                diff.row(p).setZero();
                diff.col(p).setZero();
            }
    }
    return -4.0 * diff * v;
}

inline const ContextMatrix& require_context(const ContextMatrix* ctx) {
    if (!ctx) throw input_error("a context matrix is required when context weights are positive");
    return *ctx;
}

/// Masked residual S o (X - R).
inline Tensor3 masked_residual(const Tensor3& r, const FactorModel& model, const SampleMask& mask) {
    Tensor3 e = model.reconstruct();
    auto ev = e.values();
    auto rv = r.values();
    auto sv = mask.tensor().values();
    for (std::size_t i = 0; i < ev.size(); ++i) ev[i] = sv[i] * (ev[i] - rv[i]);
    return e;
}

}  // namespace detail

/// Squared reconstruction error |S o (R - X)|_F^2, summed in storage order.
[[nodiscard]] inline double reconstruction_error(const Tensor3& r, const Tensor3& x,
                                                 const SampleMask* mask = nullptr) {
    r.require_same_dims(x, "reconstruction_error");
    auto rv = r.values();
    auto xv = x.values();
    double s = 0.0;
    if (mask) {
        auto sv = mask->tensor().values();
        for (std::size_t i = 0; i < rv.size(); ++i) {
            const double e = sv[i] * (rv[i] - xv[i]);
            s += e * e;
        }
    } else {
        for (std::size_t i = 0; i < rv.size(); ++i) {
            const double e = rv[i] - xv[i];
            s += e * e;
        }
    }
    return s;
}

[[nodiscard]] inline ObjectiveTerms objective_terms(const Tensor3& r, const ContextMatrix* ctx,
                                                    const FactorModel& model, const Hyperparameters& h,
                                                    const SampleMask* mask = nullptr) {
    detail::check_compatible(r, ctx, model, mask);
    ObjectiveTerms t;
    t.reconstruction = reconstruction_error(r, model.reconstruct(), mask);
    if (h.context_origin > 0.0)
        t.context_origin = h.context_origin * detail::context_misfit(detail::require_context(ctx), model.origin);
    if (h.context_destination > 0.0)
        t.context_destination =
            h.context_destination * detail::context_misfit(detail::require_context(ctx), model.destination);
    t.l1_origin = h.sparsity_origin * l1_norm(model.origin);
    t.l1_destination = h.sparsity_destination * l1_norm(model.destination);
    t.l1_time = h.sparsity_time * l1_norm(model.time);
    t.l1_core = h.sparsity_core * l1_norm(model.core);
    return t;
}

[[nodiscard]] inline double objective(const Tensor3& r, const ContextMatrix* ctx, const FactorModel& model,
                                      const Hyperparameters& h, const SampleMask* mask = nullptr) {
    return objective_terms(r, ctx, model, h, mask).total();
}

/// Gradient of the smooth objective with respect to the core.
[[nodiscard]] inline Tensor3 gradient_core(const Tensor3& r, const FactorModel& m,
                                           const SampleMask* mask = nullptr) {
    const Matrix ot = m.origin.transpose();
    const Matrix dt = m.destination.transpose();
    const Matrix tt = m.time.transpose();
    if (mask) {
        Tensor3 g = multi_mode_product(detail::masked_residual(r, m, *mask), ot, dt, tt);
        return g *= 2.0;
    }
    Tensor3 g = multi_mode_product(m.core, ot * m.origin, dt * m.destination, tt * m.time);
    g -= multi_mode_product(r, ot, dt, tt);
    return g *= 2.0;
}

/// Gradient with respect to the origin projection O (reconstruction plus context term).
[[nodiscard]] inline Matrix gradient_origin(const Tensor3& r, const ContextMatrix* ctx, const FactorModel& m,
                                            const Hyperparameters& h, const SampleMask* mask = nullptr) {
    const Matrix c1 = matricize(m.core, Mode::first);
    Matrix g;
    if (mask) {
        const Tensor3 e = detail::masked_residual(r, m, *mask);
        const Tensor3 p = mode_product(mode_product(e, m.destination.transpose(), Mode::second),
                                       m.time.transpose(), Mode::third);
        g = 2.0 * matricize(p, Mode::first) * c1.transpose();
    } else {
        const Tensor3 gram = mode_product(mode_product(m.core, m.destination.transpose() * m.destination,
                                                       Mode::second),
                                          m.time.transpose() * m.time, Mode::third);
        const Tensor3 p = mode_product(mode_product(r, m.destination.transpose(), Mode::second),
                                       m.time.transpose(), Mode::third);
        g = 2.0 * (m.origin * (matricize(gram, Mode::first) * c1.transpose()) -
                   matricize(p, Mode::first) * c1.transpose());
    }
    if (h.context_origin > 0.0)
        g += h.context_origin * detail::context_gradient(detail::require_context(ctx), m.origin);
    return g;
}

/// Gradient with respect to the destination projection D.
[[nodiscard]] inline Matrix gradient_destination(const Tensor3& r, const ContextMatrix* ctx,
                                                 const FactorModel& m, const Hyperparameters& h,
                                                 const SampleMask* mask = nullptr) {
    const Matrix c2 = matricize(m.core, Mode::second);
    Matrix g;
    if (mask) {
        const Tensor3 e = detail::masked_residual(r, m, *mask);
        const Tensor3 p =
            mode_product(mode_product(e, m.origin.transpose(), Mode::first), m.time.transpose(), Mode::third);
        g = 2.0 * matricize(p, Mode::second) * c2.transpose();
    } else {
        const Tensor3 gram = mode_product(mode_product(m.core, m.origin.transpose() * m.origin, Mode::first),
                                          m.time.transpose() * m.time, Mode::third);
        const Tensor3 p =
            mode_product(mode_product(r, m.origin.transpose(), Mode::first), m.time.transpose(), Mode::third);
        g = 2.0 * (m.destination * (matricize(gram, Mode::second) * c2.transpose()) -
                   matricize(p, Mode::second) * c2.transpose());
    }
    if (h.context_destination > 0.0)
        g += h.context_destination * detail::context_gradient(detail::require_context(ctx), m.destination);
    return g;
}

/// Gradient with respect to the temporal projection T.
[[nodiscard]] inline Matrix gradient_time(const Tensor3& r, const FactorModel& m,
                                          const SampleMask* mask = nullptr) {
    const Matrix c3 = matricize(m.core, Mode::third);
    if (mask) {
        const Tensor3 e = detail::masked_residual(r, m, *mask);
        const Tensor3 p = mode_product(mode_product(e, m.origin.transpose(), Mode::first),
                                       m.destination.transpose(), Mode::second);
        return 2.0 * matricize(p, Mode::third) * c3.transpose();
    }
    const Tensor3 gram = mode_product(mode_product(m.core, m.origin.transpose() * m.origin, Mode::first),
                                      m.destination.transpose() * m.destination, Mode::second);
    const Tensor3 p = mode_product(mode_product(r, m.origin.transpose(), Mode::first),
                                   m.destination.transpose(), Mode::second);
    return 2.0 * (m.time * (matricize(gram, Mode::third) * c3.transpose()) -
                  matricize(p, Mode::third) * c3.transpose());
}

struct Gradients {
    Tensor3 core;
    Matrix origin;
    Matrix destination;
    Matrix time;
};

[[nodiscard]] inline Gradients gradients(const Tensor3& r, const ContextMatrix* ctx, const FactorModel& model,
                                         const Hyperparameters& h, const SampleMask* mask = nullptr) {
    detail::check_compatible(r, ctx, model, mask);
    return {gradient_core(r, model, mask), gradient_origin(r, ctx, model, h, mask),
            gradient_destination(r, ctx, model, h, mask), gradient_time(r, model, mask)};
}

}  // namespace odt
