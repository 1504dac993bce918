#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sose/diagnostics.hpp"
#include "sose/less.hpp"

using namespace sose;

namespace {

LeverageScores uniform_scores(std::int64_t n, double value, double beta1 = 1.0, double beta2 = 1.0) {
    return {Eigen::VectorXd::Constant(n, value), beta1, beta2};
}

LessIcSpec ic_spec(std::int64_t m, double p, LeverageScores scores, std::uint64_t seed = 0, int k = 8) {
    LessIcSpec s;
    s.m = m;
    s.p = p;
    s.scores = std::move(scores);
    s.degree_k = k;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(LessIc, ReferenceLayoutSeventyRowsWidthFifteen) {
    // b = floor(1 / (beta1 p z)) = 15 with p = 0.1, z = 2/3.
    const LessIcSpec spec = ic_spec(70, 0.1, uniform_scores(1, 2.0 / 3.0 - 1e-9));
    ASSERT_EQ(spec.block_width(0), 15);
    const auto layout = subcolumn_layout(spec, 0);
    ASSERT_EQ(layout.size(), 5u);
    for (std::size_t g = 0; g < 4; ++g) {
        EXPECT_EQ(layout[g].begin, 15 * static_cast<std::int64_t>(g));
        EXPECT_EQ(layout[g].end, 15 * static_cast<std::int64_t>(g + 1));
    }
    EXPECT_EQ(layout[4].begin, 60);
    EXPECT_EQ(layout[4].end, 70);
    EXPECT_DOUBLE_EQ(layout[4].alpha, std::sqrt(10 * 0.1));
}

TEST(LessIc, BlocksPartitionRowsAndEnergyIsPm) {
    SplitMix64Engine rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const std::int64_t m = 10 + static_cast<std::int64_t>(rng() % 300);
        const double p = (1.0 + static_cast<double>(rng() % 9)) / static_cast<double>(m);
        LeverageScores sc;
        sc.z = Eigen::VectorXd(50);
        for (Eigen::Index j = 0; j < 50; ++j) sc.z[j] = unif(rng) < 0.2 ? 0.0 : unif(rng);
        sc.beta1 = 1.0 + 4.0 * unif(rng);
        const LessIcSpec spec = ic_spec(m, p, sc, rng());
        for (std::int64_t j = 0; j < 50; ++j) {
            const auto layout = subcolumn_layout(spec, j);
            std::int64_t covered = 0;
            double energy = 0;
            for (std::size_t g = 0; g < layout.size(); ++g) {
                EXPECT_EQ(layout[g].begin, covered);
                covered = layout[g].end;
                energy += layout[g].alpha * layout[g].alpha;
            }
            EXPECT_EQ(covered, m);
            EXPECT_NEAR(energy, spec.pm(), 1e-12 * spec.pm());
        }
        const auto sk = build_less_ic(spec, KWiseFamily::create(spec.seed, 8));
        sk.check_structure();
        for (std::int64_t j = 0; j < 50; ++j) {
            EXPECT_NEAR(sk.column_energy(j), spec.pm(), 1e-12 * spec.pm());
            const auto layout = subcolumn_layout(spec, j);
            ASSERT_EQ(sk.column_nnz(j), static_cast<std::int64_t>(layout.size()));
            for (std::size_t g = 0; g < layout.size(); ++g) {
                const auto r = sk.row_idx[static_cast<std::size_t>(sk.col_ptr[j]) + g];
                EXPECT_GE(r, layout[g].begin);
                EXPECT_LT(r, layout[g].end);
            }
        }
    }
}

TEST(LessIc, NnzWithinBound) {
    SplitMix64Engine rng(8);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::int64_t n = 3000, d = 10;
    Eigen::MatrixXd a(n, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = unif(rng) - 0.5;
    a.row(7) *= 1000.0;  // one heavy row
    LeverageScores sc = exact_leverage(a);
    sc.beta1 = 2.0;
    sc.beta2 = std::max(1.0, sc.z.sum() / d);
    const LessIcSpec spec = ic_spec(200, 0.05, sc, 1);
    const auto sk = build_less_ic(spec, KWiseFamily::create(1, 8));
    EXPECT_LE(static_cast<double>(sk.nnz()), less_nnz_bound(n, sc.beta1, sc.beta2, spec.pm(), d));
    EXPECT_EQ(sk.column_nnz(7), spec.subcolumns(7));
    EXPECT_GE(sk.column_nnz(7), 10);  // heavy row gets many subcolumns
    ASSERT_TRUE(sk.less.has_value());
    EXPECT_EQ(sk.less->scores_digest, digest(sc));
}

TEST(LessIc, ZeroScoreColumnsGetOneEntry) {
    const LessIcSpec spec = ic_spec(64, 0.125, uniform_scores(10, 0.0));
    const auto sk = build_less_ic(spec, KWiseFamily::create(0, 4));
    for (std::int64_t j = 0; j < 10; ++j) {
        EXPECT_EQ(sk.column_nnz(j), 1);
        EXPECT_DOUBLE_EQ(std::abs(sk.values[static_cast<std::size_t>(j)]), std::sqrt(0.125 * 64));
    }
}

TEST(LessIc, ThreadInvariant) {
    const LessIcSpec spec = ic_spec(128, 0.05, uniform_scores(5000, 0.01, 2.0), 4);
    EXPECT_EQ(build_less_ic(spec, KWiseFamily::create(4, 8), 1), build_less_ic(spec, KWiseFamily::create(4, 8), 3));
}

TEST(LessIc, RejectsBadSpecs) {
    EXPECT_THROW(build_less_ic(ic_spec(10, 1.0, uniform_scores(3, 0.5)), KWiseFamily::create(0, 2)),
                 ParameterError);
    EXPECT_THROW(build_less_ic(ic_spec(10, 0.05, uniform_scores(3, 0.5)), KWiseFamily::create(0, 2)),
                 ParameterError);
    EXPECT_THROW(build_less_ic(ic_spec(10, 0.5, uniform_scores(3, 1.5)), KWiseFamily::create(0, 2)),
                 ParameterError);
    EXPECT_THROW(build_less_ic(ic_spec(10, 0.5, uniform_scores(3, 0.5, 0.5)), KWiseFamily::create(0, 2)),
                 ParameterError);
    EXPECT_THROW(subcolumn_layout(ic_spec(10, 0.5, uniform_scores(3, 0.5)), 3), RangeError);
}

TEST(LessIe, KeepProbabilityAndMagnitude) {
    const LeverageScores sc = uniform_scores(4000, 0.02, 2.0);
    const double p = 0.5;
    const auto sk = build_less_ie(sc, p, 50, KWiseFamily::fully_independent(3));
    sk.check_structure();
    const double keep = 2.0 * 0.02 * p;
    const double cells = 50.0 * 4000.0;
    EXPECT_NEAR(static_cast<double>(sk.nnz()) / cells, keep, 4.0 * std::sqrt(keep * (1 - keep) / cells));
    for (double v : sk.values) EXPECT_DOUBLE_EQ(std::abs(v), 1.0 / std::sqrt(0.04));
    EXPECT_TRUE(sk.warnings.empty());
}

TEST(LessIe, ClampsAndWarns) {
    LeverageScores sc = uniform_scores(6, 0.01, 4.0);
    sc.z[2] = 1.0;
    const auto sk = build_less_ie(sc, 0.5, 20, KWiseFamily::create(1, 4));
    ASSERT_EQ(sk.warnings.size(), 1u);
    EXPECT_EQ(sk.column_nnz(2), 20);
    EXPECT_EQ(sk.spec.kind, SketchKind::less_ie);
}

TEST(LessIe, KWiseScanMatchesDensity) {
    const LeverageScores sc = uniform_scores(400, 0.1);
    const auto sk = build_less_ie(sc, 0.5, 100, KWiseFamily::create(2, 6));
    const double cells = 40000.0;
    EXPECT_NEAR(static_cast<double>(sk.nnz()) / cells, 0.05, 4.0 * std::sqrt(0.05 * 0.95 / cells));
}

TEST(LessDefaults, FormulaAndFallback) {
    const LeverageScores sc = uniform_scores(4096, 16.0 / 4096);
    Calibration cal;
    cal.c_m_less = 1.0;
    cal.c_l = 1.0 / 64;
    const LessIcSpec s = less_default_parameters(16, 0.5, 0.05, sc, 3, cal);
    const double ld = std::log(16 / 0.05);
    EXPECT_EQ(s.m, static_cast<std::int64_t>(std::ceil((16 + ld * ld) / 0.25 + ld * ld * ld / 0.5)));
    const double L = std::log(16 / 0.025);
    EXPECT_DOUBLE_EQ(s.pm(), std::ceil(std::max(std::pow(L, 2.5) / 0.5, L * L * L) / 64));
    cal.c_l = 1e6;
    std::vector<std::string> warnings;
    const LessIcSpec dense = less_default_parameters(16, 0.5, 0.05, sc, 3, cal, &warnings);
    EXPECT_DOUBLE_EQ(dense.p, 1.0);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(LessIc, EmbedsHaarSubspaceWithExactScores) {
    const std::int64_t n = 2000, d = 8;
    const Eigen::MatrixXd u = haar_subspace(n, d, 12);
    const LessIcSpec spec = ic_spec(400, 8.0 / 400, exact_leverage(u), 5);
    const AnySketch sk = build_less_ic(spec, KWiseFamily::create(5, 16));
    const DistortionReport r = distortion(sk, u, 0.5);
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(r.consistent());
    const DiagonalSplit split = diagonal_offdiagonal_split(std::get<SparseSketch>(sk), u);
    EXPECT_LE(split.diag_norm, 1e-10);
}
