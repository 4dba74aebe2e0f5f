#pragma once

#include "odt/errors.hpp"
#include "odt/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace odt {

/// Pattern-space dimensions: origin patterns I, destination patterns J, temporal patterns K.
struct Ranks {
    std::size_t origin = 20;
    std::size_t destination = 20;
    std::size_t time = 4;

    friend bool operator==(const Ranks&, const Ranks&) = default;
};

/// Weights of the regularized objective
///
///   |S o (R - C x1 O x2 D x3 T)|_F^2
///     + context_origin |W - O O^T|_F^2 + context_destination |W - D D^T|_F^2
///     + sparsity_origin |O|_1 + sparsity_destination |D|_1
///     + sparsity_time |T|_1 + sparsity_core |C|_1
///
/// plus solver controls.
struct Hyperparameters {
    Ranks ranks;
    double context_origin = 0.01;
    double context_destination = 0.01;
    double sparsity_origin = 2.5;
    double sparsity_destination = 2.5;
    double sparsity_time = 2.5;
    double sparsity_core = 2.5;

    std::size_t max_rounds = 500;
    double tolerance = 1e-6;  // relative objective change over one round

    bool neighbor_regularization = true;
    double nr_sigma = 0.0;  // <= 0 selects the median slice distance over neighbor pairs
    double nr_epsilon_floor = 1e-12;

    void validate() const {
        const double weights[] = {context_origin, context_destination, sparsity_origin,
                                  sparsity_destination, sparsity_time, sparsity_core};
        for (double w : weights)
            if (!std::isfinite(w) || w < 0.0)
                throw input_error("regularization weights must be finite and nonnegative");
        if (ranks.origin == 0 || ranks.destination == 0 || ranks.time == 0)
            throw input_error("ranks must be positive");
        if (!(tolerance >= 0.0)) throw input_error("tolerance must be nonnegative");
        if (!std::isfinite(nr_sigma)) throw input_error("nr_sigma must be finite");
        if (!(nr_epsilon_floor > 0.0 && nr_epsilon_floor <= 1e-6))
            throw input_error("nr_epsilon_floor must lie in (0, 1e-6]");
    }

    /// Same weights with both context terms off and no neighboring pass.
    [[nodiscard]] Hyperparameters without_context() const {
        Hyperparameters h = *this;
        h.context_origin = 0.0;
        h.context_destination = 0.0;
        h.neighbor_regularization = false;
        return h;
    }
};

/// Tucker model: core (I x J x K), origin (M x I), destination (M x J), time (N x K).
struct FactorModel {
    Tensor3 core;
    Matrix origin;
    Matrix destination;
    Matrix time;

    [[nodiscard]] std::size_t zones() const { return static_cast<std::size_t>(origin.rows()); }
    [[nodiscard]] std::size_t slices() const { return static_cast<std::size_t>(time.rows()); }
    [[nodiscard]] Ranks ranks() const { return {core.dims()[0], core.dims()[1], core.dims()[2]}; }

    /// Throws if the factor shapes disagree with the core.
    void validate() const {
        const auto& cd = core.dims();
        if (static_cast<std::size_t>(origin.cols()) != cd[0] ||
            static_cast<std::size_t>(destination.cols()) != cd[1] ||
            static_cast<std::size_t>(time.cols()) != cd[2] || origin.rows() != destination.rows())
            throw input_error("factor model shapes are inconsistent");
    }

    [[nodiscard]] bool nonnegative() const {
        for (double v : core.values())
            if (v < 0.0) return false;
        return (origin.array() >= 0.0).all() && (destination.array() >= 0.0).all() &&
               (time.array() >= 0.0).all();
    }

    [[nodiscard]] bool finite() const {
        return all_finite(core) && origin.allFinite() && destination.allFinite() && time.allFinite();
    }

    [[nodiscard]] Tensor3 reconstruct() const {
        return multi_mode_product(core, origin, destination, time);
    }

    friend bool operator==(const FactorModel&, const FactorModel&) = default;
};

/// Binary observation mask S; 1 marks a sampled cell.
class SampleMask {
public:
    SampleMask() = default;

    explicit SampleMask(Tensor3 mask) : mask_(std::move(mask)) {
        for (double v : mask_.values())
            if (v != 0.0 && v != 1.0) throw input_error("sample mask entries must be 0 or 1");
    }

    [[nodiscard]] static SampleMask all_ones(const Tensor3::Dims& dims) {
        return SampleMask(Tensor3(dims, 1.0));
    }

    [[nodiscard]] const Tensor3& tensor() const { return mask_; }
    [[nodiscard]] const Tensor3::Dims& dims() const { return mask_.dims(); }

    [[nodiscard]] std::size_t observed() const {
        std::size_t n = 0;
        for (double v : mask_.values()) n += v != 0.0;
        return n;
    }

    [[nodiscard]] double density() const {
        return mask_.size() == 0 ? 0.0 : static_cast<double>(observed()) / static_cast<double>(mask_.size());
    }

    [[nodiscard]] SampleMask complement() const {
        Tensor3 c(mask_.dims());
        auto src = mask_.values();
        auto dst = c.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = 1.0 - src[i];
        return SampleMask(std::move(c));
    }

    /// S o t.
    [[nodiscard]] Tensor3 apply(const Tensor3& t) const { return hadamard(mask_, t); }

private:
    Tensor3 mask_;
};

[[nodiscard]] inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            double v = unif(rng);
            while (v == 0.0) v = unif(rng);
            m(i, j) = v;
        }
    return m;
}

/// Random start: entries uniform on (0, 1), then every block scaled by the same
/// factor so that |S o reconstruction|_F matches |S o R|_F.
[[nodiscard]] inline FactorModel random_model(const Tensor3& r, const Ranks& ranks, std::uint64_t seed,
                                              const SampleMask* mask = nullptr) {
    if (r.dims()[0] != r.dims()[1]) throw input_error("data tensor must be square in its zone modes");
    const auto m = static_cast<Eigen::Index>(r.dims()[0]);
    const auto n = static_cast<Eigen::Index>(r.dims()[2]);
    std::mt19937_64 rng(seed);
    FactorModel model;
    Matrix core_flat = uniform_matrix(static_cast<Eigen::Index>(ranks.origin * ranks.destination),
                                      static_cast<Eigen::Index>(ranks.time), rng);
    model.core = Tensor3(ranks.origin, ranks.destination, ranks.time);
    model.core.as_matrix(ranks.origin * ranks.destination, ranks.time) = core_flat;
    model.origin = uniform_matrix(m, static_cast<Eigen::Index>(ranks.origin), rng);
    model.destination = uniform_matrix(m, static_cast<Eigen::Index>(ranks.destination), rng);
    model.time = uniform_matrix(n, static_cast<Eigen::Index>(ranks.time), rng);

    const Tensor3 x = model.reconstruct();
    const double target = mask ? frobenius_norm(mask->apply(r)) : frobenius_norm(r);
    const double current = mask ? frobenius_norm(mask->apply(x)) : frobenius_norm(x);
    if (current > 0.0) {
        const double s = std::pow(target / current, 0.25);
        model.core *= s;
        model.origin *= s;
        model.destination *= s;
        model.time *= s;
    }
    return model;
}

}  // namespace odt
