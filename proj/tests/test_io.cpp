// SPDX-License-Identifier: Apache-2.0

#include "bdris/io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace bdris;
using bdris::testing::unit_config;

TEST(ChannelDump, HeaderAndRowMajorLayout)
{
    ChannelSet ch;
    ch.dims = Dimensions{2, 2, 1, 1};
    ch.seed = 99;
    ch.G.resize(2, 2);
    ch.G << cplx(1, 2), cplx(3, 4), cplx(5, 6), cplx(7, 8);
    ch.R = {CMatrix::Constant(2, 1, cplx(0.5, 0))};
    ch.D = {CMatrix::Constant(2, 1, cplx(0, -1))};
    const std::string text = to_text(ch, write_channel_dump);
    EXPECT_EQ(text.substr(0, text.find('\n')), "bdris-channel 2 2 1 1 99");
    EXPECT_NE(text.find("G 2 2\n1 2 3 4\n5 6 7 8\n"), std::string::npos);
}

TEST(ChannelDump, ReadBackIsBitExact)
{
    const ChannelSet ch = generate_channel_set(unit_config(3, 2, 2, 2), 5);
    std::istringstream is(to_text(ch, write_channel_dump));
    const ChannelSet back = read_channel_dump(is);
    EXPECT_EQ(back.G, ch.G);
    ASSERT_EQ(back.R.size(), 2u);
    EXPECT_EQ(back.R[1], ch.R[1]);
    EXPECT_EQ(back.D[0], ch.D[0]);
    EXPECT_EQ(back.seed, 5u);
    EXPECT_EQ(back.q, 2);
}

TEST(ChannelDump, MalformedInput)
{
    std::istringstream wrong_kind("bdris-rx 1 1 0 0");
    EXPECT_THROW((void)read_channel_dump(wrong_kind), Error);
    std::istringstream truncated("bdris-channel 2 2 1 1 0\nG 2 2\n1 2 3\n");
    try {
        (void)read_channel_dump(truncated);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
    std::istringstream bad_shape("bdris-channel 2 2 1 1 0\nG 2 3\n");
    EXPECT_THROW((void)read_channel_dump(bad_shape), Error);
}

TEST(ScheduleText, ReadBackIsBitExact)
{
    Rng rng(6);
    const PilotSchedule s = build_schedule(unit_config(3, 2, 2, 2), rng);
    std::istringstream is(to_text(s, write_schedule));
    const PilotSchedule back = read_schedule(is);
    ASSERT_EQ(back.tau(), s.tau());
    EXPECT_EQ(back.tau1, s.tau1);
    EXPECT_EQ(back.tau2, s.tau2);
    EXPECT_EQ(back.theta, s.theta);
    for (int t = 0; t < s.tau(); ++t) {
        EXPECT_EQ(back.instants[static_cast<std::size_t>(t)].phi, s.instants[static_cast<std::size_t>(t)].phi);
        EXPECT_EQ(back.instants[static_cast<std::size_t>(t)].pilots, s.instants[static_cast<std::size_t>(t)].pilots);
        EXPECT_EQ(back.instants[static_cast<std::size_t>(t)].tag, s.instants[static_cast<std::size_t>(t)].tag);
    }
}

TEST(ScheduleText, OneRecordPerInstant)
{
    Rng rng(7);
    const PilotSchedule s = build_schedule(unit_config(2, 2, 1, 2), rng);
    const std::string text = to_text(s, write_schedule);
    EXPECT_NE(text.find("instant 0 phase1-first\n"), std::string::npos);
    EXPECT_NE(text.find("instant 2 phase1-second\n"), std::string::npos);
    EXPECT_NE(text.find("instant 4 phase2-minimal\n"), std::string::npos);
}

TEST(ScheduleText, UnknownTag)
{
    std::istringstream is("bdris-schedule 1 1 1 1 2 0 1 3.14\ninstant 0 nonsense\n");
    EXPECT_THROW((void)read_schedule(is), Error);
}

TEST(RxDump, ReadBackIsBitExact)
{
    const SystemConfig cfg = unit_config(3, 2, 1, 2, 0.5);
    Rng rng(8);
    const PilotSchedule s = build_schedule(cfg, rng);
    const RxRecord rx = synthesize_rx(generate_channel_set(cfg, 9), s, cfg, 10);
    std::istringstream is(to_text(rx, write_rx_dump));
    const RxRecord back = read_rx_dump(is);
    EXPECT_EQ(back.y, rx.y);
    EXPECT_EQ(back.tags, rx.tags);
    EXPECT_EQ(back.noise_variance, rx.noise_variance);
    EXPECT_EQ(back.seed, rx.seed);
}
