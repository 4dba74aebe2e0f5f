#include "test_support.hpp"

#include <gtest/gtest.h>

namespace odt {
namespace {

using namespace odt::testing;

Tensor3 cp_oracle(const CpModel& m) {
    const auto zones = static_cast<std::size_t>(m.origin.rows());
    const auto slices = static_cast<std::size_t>(m.time.rows());
    Tensor3 out(zones, zones, slices);
    for (std::size_t a = 0; a < zones; ++a)
        for (std::size_t b = 0; b < zones; ++b)
            for (std::size_t c = 0; c < slices; ++c)
                for (Eigen::Index q = 0; q < m.origin.cols(); ++q)
                    out(a, b, c) += m.origin(static_cast<Eigen::Index>(a), q) *
                                    m.destination(static_cast<Eigen::Index>(b), q) *
                                    m.time(static_cast<Eigen::Index>(c), q);
    return out;
}

TEST(CpReconstruct, RankOneOnes) {
    const CpModel m{Matrix::Ones(2, 1), Matrix::Ones(2, 1), Matrix::Ones(2, 1)};
    EXPECT_EQ(cp_reconstruct(m), Tensor3(2, 2, 2, 1.0));
}

TEST(CpReconstruct, MatchesOuterProductOracleAndTuckerForm) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 5; ++trial) {
        const CpModel m{random_matrix(5, 3, rng), random_matrix(5, 3, rng), random_matrix(4, 3, rng)};
        const Tensor3 got = cp_reconstruct(m);
        const Tensor3 oracle = cp_oracle(m);
        const Tensor3 tucker = to_tucker(m).reconstruct();
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_NEAR(got.values()[i], oracle.values()[i], 1e-12);
            EXPECT_NEAR(got.values()[i], tucker.values()[i], 1e-12);
        }
    }
}

TEST(CpSolve, PlantedRankTwoRecovery) {
    std::mt19937_64 rng(62);
    const CpModel planted{random_matrix(8, 2, rng, 0.1, 1.0), random_matrix(8, 2, rng, 0.1, 1.0),
                          random_matrix(6, 2, rng, 0.1, 1.0)};
    const Tensor3 r = cp_reconstruct(planted);
    Hyperparameters h;
    h.context_origin = h.context_destination = 0.0;
    h.sparsity_origin = h.sparsity_destination = h.sparsity_time = 0.0;
    h.max_rounds = 5000;
    h.tolerance = 1e-12;
    const auto res = cp_solve_multistart(r, nullptr, h, 2, nullptr, 3, 3);
    EXPECT_LE(rmse(r, cp_reconstruct(res.model)), 1e-3);
    EXPECT_TRUE(res.model.origin.minCoeff() >= 0.0 && res.model.time.minCoeff() >= 0.0);
    for (std::size_t s = 1; s < res.objective_history.size(); ++s)
        EXPECT_LE(res.objective_history[s], res.objective_history[s - 1] + 1e-12);
}

TEST(CpSolve, AcceptsDefaultRanks) {
    std::mt19937_64 rng(63);
    const Tensor3 r = random_tensor({6, 6, 5}, rng);
    Hyperparameters h;
    h.max_rounds = 5;
    for (std::size_t rank : {4u, 20u}) {
        const auto res = cp_solve(r, h, nullptr, random_cp_model(r, rank, 1));
        EXPECT_EQ(res.model.rank(), rank);
    }
}

TEST(RcpSolve, ZeroContextWeightsReduceToCp) {
    std::mt19937_64 rng(64);
    const Tensor3 r = random_tensor({6, 6, 4}, rng);
    const ContextMatrix ctx = random_context(6, rng);
    Hyperparameters h;
    h.context_origin = h.context_destination = 0.0;
    h.max_rounds = 50;
    const CpModel init = random_cp_model(r, 3, 9);
    const auto a = cp_solve(r, h, nullptr, init);
    const auto b = rcp_solve(r, ctx, h, nullptr, init);
    EXPECT_EQ(a.objective_history, b.objective_history);
}

TEST(RcpSolve, MonotoneWithContextAndMask) {
    std::mt19937_64 rng(65);
    const Tensor3 r = random_tensor({6, 6, 4}, rng);
    const ContextMatrix ctx = random_context(6, rng);
    const SampleMask mask = random_mask(r.dims(), 0.6, rng);
    Hyperparameters h;
    h.max_rounds = 100;
    const auto res = rcp_solve(r, ctx, h, &mask, random_cp_model(r, 3, 4, &mask));
    for (std::size_t s = 1; s < res.objective_history.size(); ++s)
        EXPECT_LE(res.objective_history[s], res.objective_history[s - 1] + 1e-12);
}

TEST(TuckerSolve, EqualsBcdWithoutContextOrNeighbors) {
    std::mt19937_64 rng(66);
    const Tensor3 r = random_tensor({6, 6, 4}, rng);
    Hyperparameters h;
    h.ranks = {2, 2, 2};
    h.max_rounds = 40;
    const FactorModel init = random_model(r, h.ranks, 5);
    const auto a = tucker_solve(r, h, nullptr, init);
    Hyperparameters plain = h;
    plain.context_origin = plain.context_destination = 0.0;
    plain.neighbor_regularization = false;
    const auto b = bcd_solve(r, nullptr, plain, init);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.objective_history, b.objective_history);
}

}  // namespace
}  // namespace odt
