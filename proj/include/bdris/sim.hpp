// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/channel.hpp"
#include "bdris/config.hpp"
#include "bdris/error.hpp"
#include "bdris/linalg.hpp"
#include "bdris/schedule.hpp"

#include <cstdint>
#include <vector>

namespace bdris {

/// Effective received pilots y_t (direct-path contribution already removed), one column per instant.
struct RxRecord {
    CMatrix y;  // N x tau
    double noise_variance = 0.0;
    std::vector<PhaseTag> tags;
    std::uint64_t seed = 0;

    int tau() const { return static_cast<int>(y.cols()); }
};

/// Pair-differenced Phase I observations ybar_t = y_{delta+t} - y_t.
struct DiffRecord {
    CMatrix Ybar1;  // N x delta
    double noise_variance = 0.0;  // 2 sigma^2
};

inline void check_consistent(const ChannelSet& ch, const PilotSchedule& s)
{
    const Dimensions& a = ch.dims;
    const Dimensions& b = s.dims;
    if (a.M != b.M || a.K != b.K || a.U != b.U || ch.G.rows() != a.N || ch.G.cols() != a.M ||
        static_cast<int>(ch.R.size()) != a.K)
        throw Error(ErrorCode::DimensionMismatch, "channels and schedule disagree on dimensions");
    for (const auto& in : s.instants)
        if (in.phi.rows() != a.M || in.phi.cols() != a.M || in.pilots.rows() != a.K || in.pilots.cols() != a.U)
            throw Error(ErrorCode::DimensionMismatch, "schedule instant has wrong shape");
}

/// y_t = sum_k G Phi_t R_k sqrt(p) a_{k,t} + n_t with n_t ~ CN(0, sigma^2 I_N), independent over t.
inline RxRecord synthesize_rx(const ChannelSet& ch, const PilotSchedule& s, double tx_power, double noise_variance,
                              std::uint64_t seed)
{
    check_consistent(ch, s);
    const Index N = ch.dims.N;
    const double amp = std::sqrt(tx_power);
    RxRecord rx;
    rx.y.resize(N, s.tau());
    rx.noise_variance = noise_variance;
    rx.seed = seed;
    rx.tags.reserve(s.instants.size());
    Rng rng(seed);
    for (int t = 0; t < s.tau(); ++t) {
        const Instant& in = s.instants[static_cast<std::size_t>(t)];
        CVector reflected = CVector::Zero(ch.dims.M);
        for (int k = 0; k < ch.dims.K; ++k)
            reflected += ch.R[static_cast<std::size_t>(k)] * in.pilots.row(k).transpose();
        rx.y.col(t) = amp * (ch.G * (in.phi * reflected));
        if (noise_variance > 0.0)
            rx.y.col(t) += complex_gaussian(N, 1, noise_variance, rng);
        rx.tags.push_back(in.tag);
    }
    return rx;
}

inline RxRecord synthesize_rx(const ChannelSet& ch, const PilotSchedule& s, const SystemConfig& cfg, std::uint64_t seed)
{
    return synthesize_rx(ch, s, cfg.tx_power, cfg.noise_variance, seed);
}

/// Raw BS observation including the direct paths D_k.
inline CMatrix add_direct_paths(const RxRecord& rx, const ChannelSet& ch, const PilotSchedule& s, double tx_power)
{
    CMatrix raw = rx.y;
    const double amp = std::sqrt(tx_power);
    for (int t = 0; t < s.tau(); ++t)
        for (int k = 0; k < ch.dims.K; ++k)
            raw.col(t) += amp * (ch.D[static_cast<std::size_t>(k)] * s.instants[static_cast<std::size_t>(t)].pilots.row(k).transpose());
    return raw;
}

/// Removes the known direct-path contribution from raw observations.
inline CMatrix remove_direct_paths(const CMatrix& raw, const ChannelSet& ch, const PilotSchedule& s, double tx_power)
{
    if (raw.cols() != s.tau() || raw.rows() != ch.dims.N)
        throw Error(ErrorCode::DimensionMismatch, "raw observation shape");
    CMatrix y = raw;
    const double amp = std::sqrt(tx_power);
    for (int t = 0; t < s.tau(); ++t)
        for (int k = 0; k < ch.dims.K; ++k)
            y.col(t) -= amp * (ch.D[static_cast<std::size_t>(k)] * s.instants[static_cast<std::size_t>(t)].pilots.row(k).transpose());
    return y;
}

inline DiffRecord pair_difference(const RxRecord& rx, int delta)
{
    if (delta < 1 || 2 * delta > rx.tau())
        throw Error(ErrorCode::PhasePairingViolation, "record does not cover 2 delta Phase I instants");
    for (int t = 0; t < delta; ++t) {
        const auto first = rx.tags[static_cast<std::size_t>(t)];
        const auto second = rx.tags[static_cast<std::size_t>(delta + t)];
        if (first != PhaseTag::Phase1First || second != PhaseTag::Phase1Second)
            throw Error(ErrorCode::PhasePairingViolation, "instants are not tagged as Phase I pairs");
    }
    DiffRecord d;
    d.Ybar1 = rx.y.middleCols(delta, delta) - rx.y.leftCols(delta);
    d.noise_variance = 2.0 * rx.noise_variance;
    return d;
}

/// ytilde_t = y_t - sqrt(p) a_t Qhat phi_{1,t} for t = 1..delta, stacked into one vector of length N delta.
inline CVector strip_reference(const RxRecord& rx, const CMatrix& Q_hat, const PilotSchedule& s, double tx_power)
{
    const int delta = s.delta();
    const Index N = rx.y.rows();
    if (Q_hat.rows() != N || Q_hat.cols() != s.dims.M || rx.tau() < delta)
        throw Error(ErrorCode::DimensionMismatch, "reference block or record shape");
    const double amp = std::sqrt(tx_power);
    CVector out(N * delta);
    for (int t = 0; t < delta; ++t) {
        const Instant& in = s.instants[static_cast<std::size_t>(t)];
        out.segment(t * N, N) = rx.y.col(t) - (amp * in.pilots(0, 0)) * (Q_hat * in.phi.col(0));
    }
    return out;
}

/// Phase II observations stacked into y^(2), length N tau2.
inline CVector phase2_observations(const RxRecord& rx, const PilotSchedule& s)
{
    const Index N = rx.y.rows();
    CVector out(N * s.tau2);
    for (int t = 0; t < s.tau2; ++t)
        out.segment(t * N, N) = rx.y.col(s.tau1 + t);
    return out;
}

}  // namespace bdris
