#include "test_support.hpp"

#include <gtest/gtest.h>

namespace odt {
namespace {

using namespace odt::testing;

PlantSpec small_city(std::uint64_t seed) {
    PlantSpec s;
    s.grid_rows = 4;
    s.grid_cols = 4;
    s.slices = 8;
    s.rhythms = 2;
    s.seed = seed;
    return s;
}

Hyperparameters sequence_hyperparameters() {
    Hyperparameters h;
    h.ranks = {4, 4, 2};
    h.max_rounds = 5000;  // year 1 must reach the stopping tolerance for the drift bounds
    return h;
}

TEST(PiTsa, LoadsEachYearOnceInOrder) {
    const auto city = generate(small_city(3));
    std::vector<std::size_t> calls;
    const YearLoader load = [&](std::size_t l) {
        calls.push_back(l);
        return YearInput{"y" + std::to_string(l), city.r, city.context, std::nullopt};
    };
    Hyperparameters h = sequence_hyperparameters();
    h.max_rounds = 5;
    const auto seq = pi_tsa(3, load, h, nullptr, 1);
    EXPECT_EQ(calls, (std::vector<std::size_t>{0, 1, 2}));
    ASSERT_EQ(seq.years.size(), 3u);
    EXPECT_EQ(seq.years[2].label, "y2");
}

TEST(PiTsa, SingleYearEqualsDirectSolve) {
    const auto city = generate(small_city(4));
    const Hyperparameters h = sequence_hyperparameters();
    const std::vector<YearInput> years{{"2019", city.r, city.context, std::nullopt}};
    const auto seq = pi_tsa(years, h, &city.graph, 17);
    SolveOptions opts;
    opts.graph = &city.graph;
    const auto direct = bcd_solve(city.r, &city.context, h, random_model(city.r, h.ranks, 17), opts);
    EXPECT_EQ(seq.years[0].model, direct.model);
    EXPECT_EQ(seq.years[0].objective_history, direct.objective_history);
}

TEST(PiTsa, LaterYearsStartFromPreviousSolution) {
    const auto city = generate(small_city(5));
    Hyperparameters h = sequence_hyperparameters();
    const std::vector<YearInput> years{{"a", city.r, city.context, std::nullopt},
                                       {"b", city.r, city.context, std::nullopt}};
    const auto seq = pi_tsa(years, h, nullptr, 2);
    const auto direct = bcd_solve(city.r, &city.context, h, seq.years[0].model);
    EXPECT_EQ(seq.years[1].model, direct.model);
}

TEST(PiTsa, IdenticalYearsBarelyDrift) {
    const auto city = generate(small_city(6));
    const Hyperparameters h = sequence_hyperparameters();
    const std::vector<YearInput> years(3, YearInput{"same", city.r, city.context, std::nullopt});
    const auto seq = pi_tsa(years, h, &city.graph, 8);
    const auto report = drift_report(seq);
    ASSERT_EQ(report.size(), 2u);
    for (const auto& d : report) {
        EXPECT_LE(d.origin, 1e-3);
        EXPECT_LE(d.destination, 1e-3);
        EXPECT_LE(d.time, 1e-3);
    }
}

TEST(PiTsa, DimensionChangeRejected) {
    const auto a = generate(small_city(7));
    PlantSpec other = small_city(7);
    other.slices = 10;
    const auto b = generate(other);
    Hyperparameters h = sequence_hyperparameters();
    h.max_rounds = 3;
    const std::vector<YearInput> years{{"a", a.r, a.context, std::nullopt}, {"b", b.r, b.context, std::nullopt}};
    EXPECT_THROW((void)pi_tsa(years, h, nullptr, 1), input_error);
    EXPECT_THROW((void)pi_tsa(std::span<const YearInput>{}, h, nullptr, 1), input_error);
}

TEST(PiTsa, PatternsKeepTheirIndexAcrossYears) {
    // Year 2 is a different draw of the same planted city; pipeline initialization
    // keeps column i of year 1 matched to column i of year 2.
    const auto city = generate(small_city(9));
    const Hyperparameters h = sequence_hyperparameters();
    std::vector<YearInput> years{{"y1", city.r, city.context, std::nullopt}};
    PlantSpec perturbed = small_city(10);
    perturbed.noise_sigma = 0.02;
    const auto second = generate(perturbed);
    years.push_back({"y2", second.r, second.context, std::nullopt});

    const auto seq = pi_tsa(years, h, nullptr, 5);
    const auto a1 = assign_communities(seq.years[0].model.origin);
    const auto a2 = assign_communities(seq.years[1].model.origin);
    std::size_t same = 0;
    for (std::size_t x = 0; x < a1.labels.size(); ++x) same += a1.labels[x] == a2.labels[x];
    EXPECT_GE(static_cast<double>(same) / static_cast<double>(a1.labels.size()), 0.95);
    const auto report = drift_report(seq);
    for (Eigen::Index i = 0; i < 4; ++i) {
        Eigen::Index best = 0;
        report[0].origin_correlation.row(i).maxCoeff(&best);
        EXPECT_EQ(best, i);
    }
}

TEST(Drift, Definitions) {
    const Matrix a = Matrix::Ones(3, 2);
    EXPECT_EQ(relative_drift(a, a), 0.0);
    EXPECT_NEAR(relative_drift(2.0 * a, a), 1.0, 1e-15);
    EXPECT_EQ(relative_drift(Matrix::Zero(2, 2), Matrix::Zero(2, 2)), 0.0);
    EXPECT_TRUE(std::isinf(relative_drift(a, Matrix::Zero(3, 2))));
}

TEST(Drift, ColumnCorrelationOracle) {
    std::mt19937_64 rng(91);
    const Matrix a = random_matrix(7, 3, rng);
    const Matrix b = random_matrix(7, 2, rng);
    const Matrix c = column_correlation(a, b);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) {
            double ma = 0, mb = 0;
            for (Eigen::Index x = 0; x < 7; ++x) {
                ma += a(x, i) / 7.0;
                mb += b(x, j) / 7.0;
            }
            double sab = 0, saa = 0, sbb = 0;
            for (Eigen::Index x = 0; x < 7; ++x) {
                sab += (a(x, i) - ma) * (b(x, j) - mb);
                saa += (a(x, i) - ma) * (a(x, i) - ma);
                sbb += (b(x, j) - mb) * (b(x, j) - mb);
            }
            EXPECT_NEAR(c(i, j), sab / std::sqrt(saa * sbb), 1e-12);
        }
    EXPECT_NEAR(column_correlation(a, a).diagonal().minCoeff(), 1.0, 1e-12);
    EXPECT_EQ(column_correlation(Matrix::Ones(4, 1), a.topRows(4))(0, 0), 0.0);
}

}  // namespace
}  // namespace odt
