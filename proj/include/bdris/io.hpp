// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/channel.hpp"
#include "bdris/error.hpp"
#include "bdris/linalg.hpp"
#include "bdris/schedule.hpp"
#include "bdris/sim.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace bdris {

// Text dumps for audit and cross-implementation diffing. Every file opens with a header line
// naming the record kind and its sizes; matrices follow as "<name> <rows> <cols>" and then one
// line per row with "re im" pairs (17 significant digits).

namespace io_detail {

inline void write_matrix(std::ostream& os, const std::string& name, const CMatrix& m)
{
    os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0)
                os << ' ';
            os << m(i, j).real() << ' ' << m(i, j).imag();
        }
        os << '\n';
    }
}

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

template <typename T>
T read_value(std::istream& is, const char* what)
{
    T v{};
    if (!(is >> v))
        fail(std::string("expected ") + what);
    return v;
}

inline void expect_token(std::istream& is, const std::string& token)
{
    std::string got;
    if (!(is >> got) || got != token)
        fail("expected '" + token + "', got '" + got + "'");
}

inline CMatrix read_matrix(std::istream& is, const std::string& name, Index rows, Index cols)
{
    expect_token(is, name);
    const auto r = read_value<Index>(is, "row count");
    const auto c = read_value<Index>(is, "column count");
    if (r != rows || c != cols)
        fail(name + " has unexpected shape");
    CMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
            const auto re = read_value<double>(is, "real part");
            const auto im = read_value<double>(is, "imaginary part");
            m(i, j) = {re, im};
        }
    return m;
}

inline PhaseTag parse_tag(const std::string& s)
{
    for (PhaseTag t : {PhaseTag::Phase1First, PhaseTag::Phase1Second, PhaseTag::Phase2Minimal, PhaseTag::Phase2Extra,
                       PhaseTag::Baseline})
        if (to_string(t) == s)
            return t;
    fail("unknown phase tag '" + s + "'");
}

struct PrecisionGuard {
    explicit PrecisionGuard(std::ostream& os) : os_(os), prec_(os.precision()), flags_(os.flags())
    {
        os_ << std::setprecision(17);
        os_.unsetf(std::ios::floatfield);
    }
    ~PrecisionGuard()
    {
        os_.precision(prec_);
        os_.flags(flags_);
    }
    PrecisionGuard(const PrecisionGuard&) = delete;
    PrecisionGuard& operator=(const PrecisionGuard&) = delete;

private:
    std::ostream& os_;
    std::streamsize prec_;
    std::ios::fmtflags flags_;
};

}  // namespace io_detail

inline void write_channel_dump(std::ostream& os, const ChannelSet& ch)
{
    io_detail::PrecisionGuard guard(os);
    const Dimensions& d = ch.dims;
    os << "bdris-channel " << d.N << ' ' << d.M << ' ' << d.K << ' ' << d.U << ' ' << ch.seed << '\n';
    io_detail::write_matrix(os, "G", ch.G);
    for (std::size_t k = 0; k < ch.R.size(); ++k)
        io_detail::write_matrix(os, "R", ch.R[k]);
    for (std::size_t k = 0; k < ch.D.size(); ++k)
        io_detail::write_matrix(os, "D", ch.D[k]);
}

inline ChannelSet read_channel_dump(std::istream& is)
{
    using namespace io_detail;
    expect_token(is, "bdris-channel");
    ChannelSet ch;
    ch.dims.N = read_value<int>(is, "N");
    ch.dims.M = read_value<int>(is, "M");
    ch.dims.K = read_value<int>(is, "K");
    ch.dims.U = read_value<int>(is, "U");
    ch.seed = read_value<std::uint64_t>(is, "seed");
    const Dimensions& d = ch.dims;
    if (d.N < 1 || d.M < 1 || d.K < 1 || d.U < 1)
        fail("dimensions must be positive");
    ch.G = read_matrix(is, "G", d.N, d.M);
    for (int k = 0; k < d.K; ++k)
        ch.R.push_back(read_matrix(is, "R", d.M, d.U));
    for (int k = 0; k < d.K; ++k)
        ch.D.push_back(read_matrix(is, "D", d.N, d.U));
    ch.q = numerical_rank(ch.G);
    return ch;
}

inline void write_schedule(std::ostream& os, const PilotSchedule& s)
{
    io_detail::PrecisionGuard guard(os);
    const Dimensions& d = s.dims;
    os << "bdris-schedule " << d.N << ' ' << d.M << ' ' << d.K << ' ' << d.U << ' ' << s.tau1 << ' ' << s.tau2 << ' '
       << s.tau() << ' ' << s.theta << '\n';
    for (int t = 0; t < s.tau(); ++t) {
        const Instant& in = s.instants[static_cast<std::size_t>(t)];
        os << "instant " << t << ' ' << to_string(in.tag) << '\n';
        io_detail::write_matrix(os, "pilots", in.pilots);
        io_detail::write_matrix(os, "phi", in.phi);
    }
}

inline PilotSchedule read_schedule(std::istream& is)
{
    using namespace io_detail;
    expect_token(is, "bdris-schedule");
    PilotSchedule s;
    s.dims.N = read_value<int>(is, "N");
    s.dims.M = read_value<int>(is, "M");
    s.dims.K = read_value<int>(is, "K");
    s.dims.U = read_value<int>(is, "U");
    s.tau1 = read_value<int>(is, "tau1");
    s.tau2 = read_value<int>(is, "tau2");
    const int tau = read_value<int>(is, "tau");
    s.theta = read_value<double>(is, "theta");
    if (s.dims.M < 1 || s.dims.K < 1 || s.dims.U < 1 || tau < 0)
        fail("invalid schedule header");
    for (int t = 0; t < tau; ++t) {
        expect_token(is, "instant");
        if (read_value<int>(is, "instant index") != t)
            fail("instants out of order");
        Instant in;
        in.tag = parse_tag(read_value<std::string>(is, "phase tag"));
        in.pilots = read_matrix(is, "pilots", s.dims.K, s.dims.U);
        in.phi = read_matrix(is, "phi", s.dims.M, s.dims.M);
        s.instants.push_back(std::move(in));
    }
    return s;
}

inline void write_rx_dump(std::ostream& os, const RxRecord& rx)
{
    io_detail::PrecisionGuard guard(os);
    os << "bdris-rx " << rx.y.rows() << ' ' << rx.y.cols() << ' ' << rx.seed << ' ' << rx.noise_variance << '\n';
    os << "tags";
    for (PhaseTag t : rx.tags)
        os << ' ' << to_string(t);
    os << '\n';
    io_detail::write_matrix(os, "y", rx.y);
}

inline RxRecord read_rx_dump(std::istream& is)
{
    using namespace io_detail;
    expect_token(is, "bdris-rx");
    const auto N = read_value<Index>(is, "N");
    const auto tau = read_value<Index>(is, "tau");
    RxRecord rx;
    rx.seed = read_value<std::uint64_t>(is, "seed");
    rx.noise_variance = read_value<double>(is, "noise variance");
    expect_token(is, "tags");
    for (Index t = 0; t < tau; ++t)
        rx.tags.push_back(parse_tag(read_value<std::string>(is, "phase tag")));
    rx.y = read_matrix(is, "y", N, tau);
    return rx;
}

template <typename T, typename Writer>
std::string to_text(const T& value, Writer write)
{
    std::ostringstream os;
    write(os, value);
    return os.str();
}

}  // namespace bdris
