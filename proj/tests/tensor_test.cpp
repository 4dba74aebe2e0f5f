#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

namespace odt {
namespace {

using testing::random_matrix;
using testing::random_tensor;

Tensor3 mode_product_oracle(const Tensor3& t, const Matrix& m, int mode) {
    auto dims = t.dims();
    dims[static_cast<std::size_t>(mode - 1)] = static_cast<std::size_t>(m.rows());
    Tensor3 out(dims);
    for (std::size_t a = 0; a < dims[0]; ++a)
        for (std::size_t b = 0; b < dims[1]; ++b)
            for (std::size_t c = 0; c < dims[2]; ++c) {
                double s = 0.0;
                for (Eigen::Index q = 0; q < m.cols(); ++q) {
                    const auto u = static_cast<std::size_t>(q);
                    const double tv = mode == 1 ? t(u, b, c) : mode == 2 ? t(a, u, c) : t(a, b, u);
                    const std::size_t row = mode == 1 ? a : mode == 2 ? b : c;
                    s += m(static_cast<Eigen::Index>(row), q) * tv;
                }
                out(a, b, c) = s;
            }
    return out;
}

TEST(Tensor3, StorageIsModeOneFastest) {
    Tensor3 t(2, 3, 4);
    EXPECT_EQ(t.offset(1, 0, 0), 1u);
    EXPECT_EQ(t.offset(0, 1, 0), 2u);
    EXPECT_EQ(t.offset(0, 0, 1), 6u);
    EXPECT_EQ(t.offset(1, 2, 3), 1u + 2u * (2u + 3u * 3u));
}

TEST(Tensor3, RejectsWrongValueCount) {
    EXPECT_THROW(Tensor3({2, 2, 2}, std::vector<double>(7)), input_error);
}

TEST(Tensor3, AtChecksBounds) {
    Tensor3 t(2, 2, 2);
    EXPECT_THROW((void)t.at(2, 0, 0), std::out_of_range);
}

TEST(ModeProduct, IdentityLeavesTensorUnchanged) {
    std::mt19937_64 rng(1);
    const Tensor3 t = random_tensor({3, 4, 2}, rng);
    EXPECT_EQ(mode_product(t, Matrix::Identity(3, 3), Mode::first), t);
    EXPECT_EQ(mode_product(t, Matrix::Identity(4, 4), Mode::second), t);
    EXPECT_EQ(mode_product(t, Matrix::Identity(2, 2), Mode::third), t);
}

TEST(ModeProduct, ZeroTensorStaysZero) {
    std::mt19937_64 rng(2);
    const Tensor3 z(2, 2, 2);
    const Tensor3 out = mode_product(z, random_matrix(3, 2, rng), Mode::first);
    EXPECT_EQ(out.dims(), (Tensor3::Dims{3, 2, 2}));
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(ModeProduct, MatchesTripleLoopOracle) {
    std::mt19937_64 rng(3);
    for (int mode = 1; mode <= 3; ++mode) {
        const Tensor3 t = random_tensor({2, 2, 2}, rng);
        const Matrix m = random_matrix(3, 2, rng, -1.0, 1.0);
        const Tensor3 got = mode_product(t, m, static_cast<Mode>(mode));
        const Tensor3 want = mode_product_oracle(t, m, mode);
        ASSERT_EQ(got.dims(), want.dims());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-14);
    }
}

TEST(ModeProduct, RejectsDimensionMismatch) {
    EXPECT_THROW((void)mode_product(Tensor3(2, 3, 4), Matrix::Zero(2, 5), Mode::second), input_error);
}

TEST(ModeProduct, IsLinearInTheTensor) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor3 t1 = random_tensor({3, 3, 3}, rng, -1, 1);
        const Tensor3 t2 = random_tensor({3, 3, 3}, rng, -1, 1);
        const Matrix m = random_matrix(3, 3, rng, -1, 1);
        const double a = 0.7;
        const double b = -1.3;
        for (int mode = 1; mode <= 3; ++mode) {
            const Tensor3 lhs = mode_product(t1 * a + t2 * b, m, static_cast<Mode>(mode));
            const Tensor3 rhs = mode_product(t1, m, static_cast<Mode>(mode)) * a +
                                mode_product(t2, m, static_cast<Mode>(mode)) * b;
            EXPECT_LE(frobenius_norm(lhs - rhs), 1e-12 * frobenius_norm(rhs));
        }
    }
}

TEST(ModeProduct, DistinctModesCommute) {
    std::mt19937_64 rng(5);
    const Tensor3 t = random_tensor({3, 4, 5}, rng);
    const Matrix a = random_matrix(2, 3, rng);
    const Matrix b = random_matrix(6, 4, rng);
    const Tensor3 ab = mode_product(mode_product(t, a, Mode::first), b, Mode::second);
    const Tensor3 ba = mode_product(mode_product(t, b, Mode::second), a, Mode::first);
    EXPECT_LE(frobenius_norm(ab - ba), 1e-12 * frobenius_norm(ab));
}

TEST(Matricize, FoldRoundTrip) {
    std::mt19937_64 rng(6);
    const Tensor3 t = random_tensor({3, 4, 2}, rng);
    for (int mode = 1; mode <= 3; ++mode)
        EXPECT_EQ(fold(matricize(t, static_cast<Mode>(mode)), static_cast<Mode>(mode), t.dims()), t);
}

TEST(Matricize, AllOnes) {
    const Matrix m = matricize(Tensor3(2, 2, 2, 1.0), Mode::first);
    EXPECT_EQ(m.rows(), 2);
    EXPECT_EQ(m.cols(), 4);
    EXPECT_TRUE((m.array() == 1.0).all());
}

TEST(Matricize, SingleNonzeroLandsAtDocumentedColumn) {
    // documented orderings: mode 1 col = y + d2 z, mode 2 col = x + d1 z, mode 3 col = x + d1 y
    Tensor3 t(2, 3, 4);
    t(1, 2, 3) = 5.0;
    const auto check = [&](Mode mode, Eigen::Index row, Eigen::Index col) {
        const Matrix m = matricize(t, mode);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) EXPECT_EQ(m(i, j), (i == row && j == col) ? 5.0 : 0.0);
    };
    check(Mode::first, 1, 2 + 3 * 3);
    check(Mode::second, 2, 1 + 2 * 3);
    check(Mode::third, 3, 1 + 2 * 2);
}

TEST(Matricize, ModeProductIdentity) {
    std::mt19937_64 rng(7);
    const Tensor3 t = random_tensor({3, 4, 5}, rng);
    for (int mode = 1; mode <= 3; ++mode) {
        const auto md = static_cast<Mode>(mode);
        const Matrix m = random_matrix(2, static_cast<Eigen::Index>(t.dim(md)), rng);
        const Matrix lhs = matricize(mode_product(t, m, md), md);
        const Matrix rhs = m * matricize(t, md);
        EXPECT_LE((lhs - rhs).norm(), 1e-12 * rhs.norm());
    }
}

TEST(Norms, Basics) {
    EXPECT_EQ(frobenius_norm(Tensor3(3, 3, 3)), 0.0);
    EXPECT_EQ(l1_norm(Tensor3(2, 2, 2, 1.0)), 8.0);
    Tensor3 t(1, 1, 2);
    t(0, 0, 0) = 3.0;
    t(0, 0, 1) = -4.0;
    EXPECT_DOUBLE_EQ(frobenius_norm(t), 5.0);
    EXPECT_DOUBLE_EQ(l1_norm(t), 7.0);
}

TEST(Hadamard, OnesIsIdentityAndShapesMustMatch) {
    std::mt19937_64 rng(8);
    const Tensor3 t = random_tensor({2, 3, 4}, rng);
    EXPECT_EQ(hadamard(t, Tensor3(t.dims(), 1.0)), t);
    EXPECT_THROW((void)hadamard(t, Tensor3(2, 3, 5)), input_error);
}

TEST(TensorIo, BinaryRoundTripIsExact) {
    std::mt19937_64 rng(9);
    const Tensor3 t = random_tensor({3, 2, 5}, rng);
    const Matrix m = random_matrix(4, 3, rng);
    const auto dir = std::filesystem::temp_directory_path();
    const auto tp = dir / "odt_tensor_io_test.odt";
    const auto mp = dir / "odt_matrix_io_test.odm";
    io::write_tensor(tp, t);
    io::write_matrix(mp, m);
    EXPECT_EQ(io::read_tensor(tp), t);
    EXPECT_EQ(io::read_matrix(mp), m);
    std::filesystem::remove(tp);
    std::filesystem::remove(mp);
}

TEST(TensorIo, ReadRejectsForeignFiles) {
    const auto p = std::filesystem::temp_directory_path() / "odt_not_a_tensor.bin";
    {
        std::ofstream os(p, std::ios::binary);
        os << "garbage";
    }
    EXPECT_THROW((void)io::read_tensor(p), input_error);
    std::filesystem::remove(p);
}

TEST(TensorIo, CsvRoundTripIsExact) {
    std::mt19937_64 rng(10);
    Tensor3 t = random_tensor({3, 3, 2}, rng);
    t(0, 1, 1) = 0.0;
    std::stringstream ss;
    io::write_tensor_csv(ss, t);
    EXPECT_EQ(io::read_tensor_csv(ss, t.dims()), t);
}

TEST(TensorIo, CsvErrorsCarryLineNumbers) {
    std::stringstream ss("i,j,k,value\n0,0,0,1.5\n0,9,0,2\n");
    try {
        (void)io::read_tensor_csv(ss, {2, 2, 2}, "fixture.csv");
        FAIL() << "expected input_error";
    } catch (const input_error& e) {
        EXPECT_NE(std::string(e.what()).find("fixture.csv:3"), std::string::npos) << e.what();
    }
}

}  // namespace
}  // namespace odt
