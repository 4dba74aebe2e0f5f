#pragma once

// Post-factorization views: crisp community assignment, per-rhythm energies,
// the concentrated core with its inter/intra-community intensities, and RMSE.

#include "odt/errors.hpp"
#include "odt/model.hpp"
#include "odt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace odt {

struct CommunityAssignment {
    std::vector<std::size_t> labels;                // zone -> pattern
    std::vector<std::vector<std::size_t>> members;  // pattern -> zones, ascending

    [[nodiscard]] bool empty_pattern(std::size_t i) const { return members[i].empty(); }
    [[nodiscard]] std::size_t patterns() const { return members.size(); }
};

/// Row-wise argmax; ties go to the lowest column.
[[nodiscard]] inline CommunityAssignment assign_communities(const Matrix& v) {
    if ((v.array() < 0.0).any()) throw input_error("assign_communities expects a nonnegative matrix");
    if (v.cols() == 0) throw input_error("assign_communities: matrix has no columns");
    CommunityAssignment a;
    a.labels.resize(static_cast<std::size_t>(v.rows()));
    a.members.resize(static_cast<std::size_t>(v.cols()));
    for (Eigen::Index x = 0; x < v.rows(); ++x) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < v.cols(); ++i)
            if (v(x, i) > v(x, best)) best = i;
        a.labels[static_cast<std::size_t>(x)] = static_cast<std::size_t>(best);
        a.members[static_cast<std::size_t>(best)].push_back(static_cast<std::size_t>(x));
    }
    return a;
}

/// Fraction of zones whose label matches the truth under the best relabeling
/// of predicted patterns (brute force over permutations, so keep label counts small).
[[nodiscard]] inline double label_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                           std::size_t labels) {
    if (predicted.size() != truth.size()) throw input_error("label_accuracy: length mismatch");
    if (labels > 9) throw input_error("label_accuracy: too many labels for exhaustive matching");
    if (predicted.empty()) return 1.0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] >= labels || truth[i] >= labels) throw input_error("label_accuracy: label out of range");
    std::vector<std::size_t> perm(labels);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) hits += perm[predicted[i]] == truth[i];
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(predicted.size());
}

/// Reconstruction using only temporal pattern k (all other columns of T zeroed).
[[nodiscard]] inline Tensor3 temporal_component(const FactorModel& model, std::size_t k) {
    model.validate();
    if (k >= static_cast<std::size_t>(model.time.cols())) throw input_error("temporal pattern index out of range");
    Matrix t = Matrix::Zero(model.time.rows(), model.time.cols());
    t.col(static_cast<Eigen::Index>(k)) = model.time.col(static_cast<Eigen::Index>(k));
    return multi_mode_product(model.core, model.origin, model.destination, t);
}

/// u_k = |component k|_1 / (M M N).
[[nodiscard]] inline double pattern_energy(const FactorModel& model, std::size_t k) {
    const Tensor3 comp = temporal_component(model, k);
    return l1_norm(comp) / static_cast<double>(comp.size());
}

[[nodiscard]] inline Vector pattern_energies(const FactorModel& model) {
    Vector u(model.time.cols());
    for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = pattern_energy(model, static_cast<std::size_t>(k));
    return u;
}

/// t~_zk = t_zk / sum_n t_nk * u_k; zero columns stay zero.
[[nodiscard]] inline Matrix rescaled_coefficients(const FactorModel& model) {
    const Vector u = pattern_energies(model);
    Matrix out = Matrix::Zero(model.time.rows(), model.time.cols());
    for (Eigen::Index k = 0; k < model.time.cols(); ++k) {
        const double s = model.time.col(k).sum();
        if (s > 0.0) out.col(k) = model.time.col(k) / s * u(k);
    }
    return out;
}

/// c'_ijk = c_ijk * sum_x o_xi * sum_y d_yj * sum_z t_zk.
[[nodiscard]] inline Tensor3 concentrated_core(const FactorModel& model) {
    model.validate();
    if (!model.nonnegative()) throw input_error("concentrated_core expects a nonnegative model");
    const Vector so = model.origin.colwise().sum().transpose();
    const Vector sd = model.destination.colwise().sum().transpose();
    const Vector st = model.time.colwise().sum().transpose();
    Tensor3 out = model.core;
    const auto [di, dj, dk] = out.dims();
    for (std::size_t k = 0; k < dk; ++k)
        for (std::size_t j = 0; j < dj; ++j)
            for (std::size_t i = 0; i < di; ++i)
                out(i, j, k) *= so(static_cast<Eigen::Index>(i)) * sd(static_cast<Eigen::Index>(j)) *
                                st(static_cast<Eigen::Index>(k));
    return out;
}

struct IntensityReport {
    Tensor3 concentrated;
    Vector inter;  // per community: outgoing plus incoming flow to other communities
    Vector intra;  // per community: flow that stays inside
};

[[nodiscard]] inline IntensityReport inter_intra_intensity(const Tensor3& cprime) {
    const auto [di, dj, dk] = cprime.dims();
    if (di != dj) throw input_error("inter/intra intensities need equal origin and destination pattern counts");
    IntensityReport rep{cprime, Vector::Zero(static_cast<Eigen::Index>(di)),
                        Vector::Zero(static_cast<Eigen::Index>(di))};
    for (std::size_t k = 0; k < dk; ++k)
        for (std::size_t j = 0; j < dj; ++j)
            for (std::size_t i = 0; i < di; ++i) {
                const double v = cprime(i, j, k);
                if (i == j) {
                    rep.intra(static_cast<Eigen::Index>(i)) += v;
                } else {
                    rep.inter(static_cast<Eigen::Index>(i)) += v;
                    rep.inter(static_cast<Eigen::Index>(j)) += v;
                }
            }
    return rep;
}

/// Community-level OD matrix of rhythm k.
[[nodiscard]] inline Matrix od_slice(const Tensor3& cprime, std::size_t k) {
    const auto [di, dj, dk] = cprime.dims();
    if (k >= dk) throw input_error("rhythm index out of range");
    return Eigen::Map<const Matrix>(cprime.data() + k * di * dj, static_cast<Eigen::Index>(di),
                                    static_cast<Eigen::Index>(dj));
}

/// Unmasked: sqrt(sum (r - x)^2 / (M M N)). Masked: the sum and the count run
/// over observed cells only, in storage order.
[[nodiscard]] inline double rmse(const Tensor3& r, const Tensor3& x, const SampleMask* mask = nullptr) {
    r.require_same_dims(x, "rmse");
    auto rv = r.values();
    auto xv = x.values();
    double s = 0.0;
    std::size_t n = 0;
    if (mask) {
        if (mask->dims() != r.dims()) throw input_error("rmse: mask dims differ from the tensor");
        auto sv = mask->tensor().values();
        for (std::size_t i = 0; i < rv.size(); ++i) {
            if (sv[i] == 0.0) continue;
            const double e = rv[i] - xv[i];
            s += e * e;
            ++n;
        }
        if (n == 0) throw input_error("rmse: mask has no observed cells");
    } else {
        for (std::size_t i = 0; i < rv.size(); ++i) {
            const double e = rv[i] - xv[i];
            s += e * e;
        }
        n = rv.size();
    }
    return std::sqrt(s / static_cast<double>(n));
}

/// Both RMSE conventions for a completion run.
struct CompletionScores {
    double full_rmse = 0.0;     // full tensor, divided by M M N
    double held_out_rmse = 0.0;  // unobserved cells only
};

[[nodiscard]] inline CompletionScores completion_scores(const Tensor3& truth, const Tensor3& estimate,
                                                        const SampleMask& observed) {
    CompletionScores s;
    s.full_rmse = rmse(truth, estimate);
    const SampleMask held = observed.complement();
    s.held_out_rmse = held.observed() > 0 ? rmse(truth, estimate, &held) : 0.0;
    return s;
}

}  // namespace odt
