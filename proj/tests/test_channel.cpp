// SPDX-License-Identifier: Apache-2.0

#include "bdris/channel.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace bdris;
using bdris::testing::rel_err;
using bdris::testing::unit_config;

TEST(Config, ValidateRejectsBadSplits)
{
    SystemConfig cfg = unit_config(4, 2, 1, 2);
    EXPECT_NO_THROW(cfg.validate());

    auto expect_invalid = [](SystemConfig c) {
        try {
            c.validate();
            FAIL() << "expected InvalidConfig";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
        }
    };
    SystemConfig odd = cfg;
    odd.tau1 = 9;
    expect_invalid(odd);
    SystemConfig short1 = cfg;
    short1.tau1 = 6;
    expect_invalid(short1);
    SystemConfig short2 = cfg;
    short2.tau2 = 1;
    expect_invalid(short2);
    SystemConfig zero_theta = cfg;
    zero_theta.theta = 0.0;
    expect_invalid(zero_theta);
    SystemConfig full_turn = cfg;
    full_turn.theta = 2.0 * std::numbers::pi;
    expect_invalid(full_turn);
    SystemConfig bad_gain = cfg;
    bad_gain.pathloss_ur = {0.0};
    expect_invalid(bad_gain);
    SystemConfig wrong_users = cfg;
    wrong_users.pathloss_ur = {1.0, 1.0};
    expect_invalid(wrong_users);
}

TEST(Config, SingleAntennaAllowsEmptyPhase2)
{
    SystemConfig cfg = unit_config(8, 8, 1, 1);
    EXPECT_EQ(cfg.tau2, 0);
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, DefaultPowersAndPathLoss)
{
    const SystemConfig cfg = default_config(Dimensions{4, 8, 1, 2});
    EXPECT_NEAR(cfg.tx_power, 1.9952623149688795, 1e-12);
    EXPECT_NEAR(cfg.noise_variance / 1.2589254117941673e-14, 1.0, 1e-12);
    // -30 dB * 10^-2.8 and -30 dB * 50^-2.2
    EXPECT_NEAR(cfg.pathloss_ur[0] / (1e-3 * std::pow(10.0, -2.8)), 1.0, 1e-12);
    EXPECT_NEAR(cfg.pathloss_rb / (1e-3 * std::pow(50.0, -2.2)), 1.0, 1e-12);
    EXPECT_EQ(cfg.tau1, 16);
    EXPECT_EQ(cfg.tau2, 2);
}

TEST(ChannelGeneration, SameSeedIsBitIdentical)
{
    const SystemConfig cfg = unit_config(4, 3, 2, 2);
    const ChannelSet a = generate_channel_set(cfg, 42);
    const ChannelSet b = generate_channel_set(cfg, 42);
    EXPECT_EQ(a.G, b.G);
    for (std::size_t k = 0; k < a.R.size(); ++k) {
        EXPECT_EQ(a.R[k], b.R[k]);
        EXPECT_EQ(a.D[k], b.D[k]);
    }
    const ChannelSet c = generate_channel_set(cfg, 43);
    EXPECT_NE(a.G, c.G);
}

TEST(ChannelGeneration, RankOfWideChannelIsN)
{
    const ChannelSet ch = generate_channel_set(unit_config(8, 4, 1, 1), 7);
    EXPECT_EQ(ch.q, 4);
    const RVector s = singular_values(ch.G);
    EXPECT_GT(s(3), 1e-9 * s(0));
}

TEST(ChannelGeneration, EntryVarianceMatchesModel)
{
    // 10^5 entries of G: N * M * draws = 8 * 25 * 500.
    SystemConfig cfg = unit_config(25, 8, 1, 1);
    cfg.pathloss_rb = 0.3;
    double acc = 0.0;
    double re2 = 0.0;
    long count = 0;
    for (std::uint64_t s = 0; s < 500; ++s) {
        const ChannelSet ch = generate_channel_set(cfg, s);
        acc += ch.G.squaredNorm();
        re2 += ch.G.real().squaredNorm();
        count += ch.G.size();
    }
    const double expected = 0.3 * 25;
    EXPECT_NEAR(acc / count / expected, 1.0, 0.05);
    EXPECT_NEAR(re2 / count / (expected / 2.0), 1.0, 0.05);
}

TEST(Cascaded, SingleElementIsScaledG)
{
    const ChannelSet ch = generate_channel_set(unit_config(1, 3, 1, 1), 3);
    const CascadedChannel cc = build_cascaded(ch);
    ASSERT_EQ(cc.J[0].rows(), 3);
    ASSERT_EQ(cc.J[0].cols(), 1);
    EXPECT_LE(rel_err(cc.J[0], ch.R[0](0, 0) * ch.G), 1e-15);
}

TEST(Cascaded, ShapeIsUNByMSquared)
{
    const ChannelSet ch = generate_channel_set(unit_config(5, 4, 2, 3), 11);
    const CascadedChannel cc = build_cascaded(ch);
    ASSERT_EQ(cc.J.size(), 2u);
    for (const auto& J : cc.J) {
        EXPECT_EQ(J.rows(), 12);
        EXPECT_EQ(J.cols(), 25);
    }
}

TEST(Cascaded, SubBlockIsScaledG)
{
    const ChannelSet ch = generate_channel_set(unit_config(4, 3, 2, 2), 5);
    const CascadedChannel cc = build_cascaded(ch);
    for (int k = 0; k < 2; ++k)
        for (int u = 0; u < 2; ++u)
            for (int m = 0; m < 4; ++m) {
                const CMatrix blk = cc.block(k, u, m);
                EXPECT_EQ(blk, (ch.R[static_cast<std::size_t>(k)](m, u) * ch.G).eval());
                // Rank one relative to G.
                CMatrix pair(blk.size(), 2);
                pair.col(0) = vec(blk);
                pair.col(1) = vec(ch.G);
                const RVector s = singular_values(pair);
                EXPECT_LE(s(1), 1e-9 * s(0));
            }
}

TEST(Cascaded, KroneckerVectorizationIdentity)
{
    const ChannelSet ch = generate_channel_set(unit_config(4, 3, 1, 2), 9);
    const CascadedChannel cc = build_cascaded(ch);
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const CMatrix phi = haar_unitary(4, rng);
        const CMatrix direct = ch.G * phi * ch.R[0];
        const CMatrix via_kron = unvec(cc.J[0] * vec(phi), 3, 2);
        EXPECT_LE(rel_err(via_kron, direct), 1e-12);
    }
}

TEST(Scaling, ReferenceCoefficientIsOne)
{
    const ChannelSet ch = generate_channel_set(unit_config(3, 2, 2, 2), 1);
    const ScalingCoefficients sc = scaling_coefficients(ch);
    EXPECT_EQ(sc.B[0](0, 0), cplx(1.0));
}

TEST(Scaling, CoefficientTimesReferenceBlockGivesSubBlock)
{
    const ChannelSet ch = generate_channel_set(unit_config(4, 3, 2, 2), 21);
    const ScalingCoefficients sc = scaling_coefficients(ch);
    const CascadedChannel cc = build_cascaded(ch);
    const CMatrix Q = reference_block(ch);
    for (int k = 0; k < 2; ++k)
        for (int u = 0; u < 2; ++u)
            for (int m = 0; m < 4; ++m) {
                const CMatrix blk = cc.block(k, u, m);
                EXPECT_LE(rel_err(sc.B[static_cast<std::size_t>(k)](m, u) * Q, blk), 1e-12);
            }
}

TEST(Scaling, SingleAntennaLayout)
{
    const ChannelSet ch = generate_channel_set(unit_config(3, 2, 1, 1), 4);
    const ScalingCoefficients sc = scaling_coefficients(ch);
    EXPECT_EQ(sc.Bbar.rows(), 3);
    EXPECT_EQ(sc.Bbar.cols(), 0);
    EXPECT_EQ(sc.bbar.size(), 0);
    // The Phase I unknowns are beta_{1,1,2}, beta_{1,1,3}.
    const cplx r = ch.R[0](0, 0);
    EXPECT_LE(std::abs(sc.B[0](1, 0) - ch.R[0](1, 0) / r), 1e-15);
    EXPECT_LE(std::abs(sc.B[0](2, 0) - ch.R[0](2, 0) / r), 1e-15);
    EXPECT_EQ(sc.B[0].col(0).tail(2).size(), 2);
}

TEST(Scaling, ReducedMatrixColumnOrder)
{
    const ChannelSet ch = generate_channel_set(unit_config(3, 2, 2, 2), 8);
    const ScalingCoefficients sc = scaling_coefficients(ch);
    ASSERT_EQ(sc.Bbar.cols(), 3);
    EXPECT_EQ(sc.Bbar.col(0), sc.B[0].col(1));
    EXPECT_EQ(sc.Bbar.col(1), sc.B[1].col(0));
    EXPECT_EQ(sc.Bbar.col(2), sc.B[1].col(1));
    EXPECT_EQ(sc.bbar.size(), 9);
}

TEST(Scaling, DegenerateReferenceIsRejected)
{
    ChannelSet ch = generate_channel_set(unit_config(3, 2, 1, 2), 2);
    ch.R[0](0, 0) = 0.0;
    try {
        (void)scaling_coefficients(ch);
        FAIL() << "expected DegenerateReference";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateReference);
    }
}

TEST(Scaling, ReconstructionClosure)
{
    const ChannelSet ch = generate_channel_set(unit_config(4, 3, 2, 2), 31);
    const ScalingCoefficients sc = scaling_coefficients(ch);
    const CascadedChannel cc = build_cascaded(ch);
    const auto rebuilt = cascaded_from_scaling(reference_block(ch), sc.B);
    for (std::size_t k = 0; k < rebuilt.size(); ++k)
        EXPECT_LE(rel_err(rebuilt[k], cc.J[k]), 1e-14);
    const auto B = assemble_scaling(sc.B[0].col(0).tail(3), sc.bbar, ch.dims);
    for (std::size_t k = 0; k < B.size(); ++k)
        EXPECT_EQ(B[k], sc.B[k]);
}

TEST(Scaling, AssembleRejectsWrongLengths)
{
    const Dimensions d{2, 3, 2, 2};
    EXPECT_THROW(assemble_scaling(CVector::Zero(3), CVector::Zero(9), d), Error);
    EXPECT_THROW(assemble_scaling(CVector::Zero(2), CVector::Zero(8), d), Error);
    EXPECT_NO_THROW(assemble_scaling(CVector::Zero(2), CVector::Zero(9), d));
}
