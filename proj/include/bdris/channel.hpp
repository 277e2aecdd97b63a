// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/config.hpp"
#include "bdris/error.hpp"
#include "bdris/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace bdris {

/// Ground-truth channels of one coherence block.
///   G    : N x M, RIS -> BS
///   R[k] : M x U, entry (m, u) is the gain from antenna u of user k to element m
///   D[k] : N x U, direct user -> BS (known, never estimated)
struct ChannelSet {
    Dimensions dims;
    CMatrix G;
    std::vector<CMatrix> R;
    std::vector<CMatrix> D;
    Index q = 0;
    std::uint64_t seed = 0;

    cplx reference_gain() const { return R.front()(0, 0); }
};

/// Per-user J_k = R_k^T (x) G, of size UN x M^2. Sub-block (u, m) is r_{k,u,m} G.
struct CascadedChannel {
    Dimensions dims;
    std::vector<CMatrix> J;

    auto block(int k, int u, int m) const
    {
        return J[static_cast<std::size_t>(k)].block(u * dims.N, m * dims.M, dims.N, dims.M);
    }
};

/// beta_{k,u,m} = r_{k,u,m} / r_{1,1,1}.
struct ScalingCoefficients {
    std::vector<CMatrix> B;  // per user, M x U, column u = beta_{k,u,:}
    CMatrix Bbar;            // M x (KU - 1): every column of every B_k except B_1(:, 0)
    CVector bbar;            // vec(Bbar)
};

inline bool is_degenerate_reference(const ChannelSet& ch)
{
    double sum_sq = 0.0;
    Index count = 0;
    for (const auto& r : ch.R) {
        sum_sq += r.squaredNorm();
        count += r.size();
    }
    const double rms = std::sqrt(sum_sq / static_cast<double>(count));
    return std::abs(ch.reference_gain()) < 1e-12 * rms;
}

/// Draws G ~ CN(0, l_RB M) and r_{k,u,m} ~ CN(0, l_UR_k) entrywise, and D_k ~ CN(0, l_D).
/// A draw whose reference gain r_{1,1,1} is numerically zero is discarded and redrawn
/// from the same stream, so the result stays a pure function of (cfg, seed).
inline ChannelSet generate_channel_set(const SystemConfig& cfg, std::uint64_t seed)
{
    const Dimensions& d = cfg.dims;
    Rng rng(seed);
    ChannelSet ch;
    ch.dims = d;
    ch.seed = seed;
    do {
        ch.G = complex_gaussian(d.N, d.M, cfg.pathloss_rb * d.M, rng);
        ch.R.clear();
        ch.D.clear();
        for (int k = 0; k < d.K; ++k)
            ch.R.push_back(complex_gaussian(d.M, d.U, cfg.pathloss_ur[static_cast<std::size_t>(k)], rng));
        for (int k = 0; k < d.K; ++k)
            ch.D.push_back(complex_gaussian(d.N, d.U, cfg.pathloss_direct, rng));
    } while (is_degenerate_reference(ch));
    ch.q = numerical_rank(ch.G);
    return ch;
}

inline CascadedChannel build_cascaded(const ChannelSet& ch)
{
    CascadedChannel out;
    out.dims = ch.dims;
    out.J.reserve(ch.R.size());
    for (const auto& r : ch.R)
        out.J.push_back(kron(r.transpose(), ch.G));
    return out;
}

/// Reduced matrix [beta_{1,2} .. beta_{1,U}, B_2 .. B_K] (column order = flattened antenna
/// order with antenna 1 of user 1 removed).
inline CMatrix reduced_scaling_matrix(const std::vector<CMatrix>& B)
{
    const Index M = B.front().rows();
    const Index U = B.front().cols();
    const Index KU = U * static_cast<Index>(B.size());
    CMatrix out(M, KU - 1);
    Index col = 0;
    for (std::size_t k = 0; k < B.size(); ++k)
        for (Index u = 0; u < U; ++u) {
            if (k == 0 && u == 0)
                continue;
            out.col(col++) = B[k].col(u);
        }
    return out;
}

/// Inverse of the reduction: rebuild every B_k from beta_{1,1,2..M} and vec(Bbar),
/// pinning beta_{1,1,1} = 1.
inline std::vector<CMatrix> assemble_scaling(const CVector& beta11, const CVector& bbar, const Dimensions& d)
{
    if (beta11.size() != d.M - 1 || bbar.size() != d.phase2_unknowns())
        throw Error(ErrorCode::DimensionMismatch, "scaling coefficient vectors do not match dimensions");
    std::vector<CMatrix> B(static_cast<std::size_t>(d.K), CMatrix(d.M, d.U));
    B[0](0, 0) = 1.0;
    B[0].col(0).tail(d.M - 1) = beta11;
    Index col = 0;
    for (int k = 0; k < d.K; ++k)
        for (int u = 0; u < d.U; ++u) {
            if (k == 0 && u == 0)
                continue;
            B[static_cast<std::size_t>(k)].col(u) = bbar.segment(col * d.M, d.M);
            ++col;
        }
    return B;
}

inline ScalingCoefficients scaling_coefficients(const ChannelSet& ch)
{
    if (is_degenerate_reference(ch))
        throw Error(ErrorCode::DegenerateReference, "|r_{1,1,1}| is numerically zero");
    const cplx ref = ch.reference_gain();
    ScalingCoefficients out;
    for (const auto& r : ch.R)
        out.B.push_back(r / ref);
    out.B[0](0, 0) = 1.0;
    out.Bbar = reduced_scaling_matrix(out.B);
    out.bbar = vec(out.Bbar);
    return out;
}

/// Reference block Q_{1,1,1} = r_{1,1,1} G.
inline CMatrix reference_block(const ChannelSet& ch) { return ch.reference_gain() * ch.G; }

/// J_k = B_k^T (x) Q for every user.
inline std::vector<CMatrix> cascaded_from_scaling(const CMatrix& Q, const std::vector<CMatrix>& B)
{
    std::vector<CMatrix> J;
    J.reserve(B.size());
    for (const auto& b : B)
        J.push_back(kron(b.transpose(), Q));
    return J;
}

}  // namespace bdris
