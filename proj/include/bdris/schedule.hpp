// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/config.hpp"
#include "bdris/error.hpp"
#include "bdris/linalg.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

namespace bdris {

enum class PhaseTag {
    Phase1First,    // instants 1..delta
    Phase1Second,   // instants delta+1..2 delta, phase-rotated twins
    Phase2Minimal,  // first ceil(M(KU-1)/q) Phase II instants
    Phase2Extra,    // remaining Phase II instants
    Baseline,       // LS baseline, orthogonal-time pilots
};

constexpr std::string_view to_string(PhaseTag tag) noexcept
{
    switch (tag) {
    case PhaseTag::Phase1First: return "phase1-first";
    case PhaseTag::Phase1Second: return "phase1-second";
    case PhaseTag::Phase2Minimal: return "phase2-minimal";
    case PhaseTag::Phase2Extra: return "phase2-extra";
    case PhaseTag::Baseline: return "baseline";
    }
    return "unknown";
}

/// One pilot instant: scattering matrix Phi_t (M x M, unitary) and pilots a_{k,u,t} (K x U).
struct Instant {
    CMatrix phi;
    CMatrix pilots;
    PhaseTag tag = PhaseTag::Phase1First;
};

struct PilotSchedule {
    Dimensions dims;
    double theta = std::numbers::pi;
    int tau1 = 0;
    int tau2 = 0;
    std::vector<Instant> instants;

    int delta() const { return tau1 / 2; }
    int tau() const { return static_cast<int>(instants.size()); }

    std::span<const Instant> phase1_first() const { return {instants.data(), static_cast<std::size_t>(delta())}; }
    std::span<const Instant> phase2() const
    {
        return {instants.data() + tau1, static_cast<std::size_t>(tau2)};
    }
};

struct Overhead {
    int q = 0;
    int tau1 = 0;
    int tau2 = 0;
    int tau = 0;
};

/// Minimum pilot overhead of the two-phase protocol: 2M + ceil(M(KU-1)/q), q = min(M, N).
inline Overhead min_overhead(int M, int N, int K, int U)
{
    if (M < 1 || N < 1 || K < 1 || U < 1)
        throw Error(ErrorCode::InvalidConfig, "dimensions must be positive");
    Overhead o;
    o.q = std::min(M, N);
    o.tau1 = 2 * M;
    o.tau2 = ceil_div(M * (K * U - 1), o.q);
    o.tau = o.tau1 + o.tau2;
    return o;
}

/// Haar-distributed unitary: QR of an i.i.d. CN(0,1) matrix with the phases of diag(R)
/// moved into Q.
inline CMatrix haar_unitary(Index M, Rng& rng)
{
    const CMatrix z = complex_gaussian(M, M, 1.0, rng);
    Eigen::HouseholderQR<CMatrix> qr(z);
    CMatrix q = qr.householderQ() * CMatrix::Identity(M, M);
    const CMatrix& r = qr.matrixQR();
    for (Index j = 0; j < M; ++j) {
        const double mag = std::abs(r(j, j));
        if (mag > 0.0)
            q.col(j) *= r(j, j) / mag;
    }
    return q;
}

/// Normalized DFT matrix, P(i, j) = exp(-2 pi i j / M) / sqrt(M).
inline CMatrix dft_matrix(Index M)
{
    CMatrix p(M, M);
    const double scale = 1.0 / std::sqrt(static_cast<double>(M));
    for (Index i = 0; i < M; ++i)
        for (Index j = 0; j < M; ++j)
            p(i, j) = std::polar(scale, -2.0 * std::numbers::pi * static_cast<double>((i * j) % M) / static_cast<double>(M));
    return p;
}

// ---------------------------------------------------------------------------
// Measurement matrices

/// Pilot vector with antenna 1 of user 1 removed, flattened user-major.
inline CVector reduced_pilots(const CMatrix& pilots)
{
    const Index KU = pilots.size();
    CVector out(KU - 1);
    Index f = 0;
    for (Index k = 0; k < pilots.rows(); ++k)
        for (Index u = 0; u < pilots.cols(); ++u) {
            if (k == 0 && u == 0)
                continue;
            out(f++) = pilots(k, u);
        }
    return out;
}

/// Psi_1 = [a_1 phi_{1,1}, ..., a_delta phi_{1,delta}], M x delta.
inline CMatrix psi1_matrix(std::span<const Instant> first_half)
{
    if (first_half.empty())
        return CMatrix();
    CMatrix psi(first_half.front().phi.rows(), static_cast<Index>(first_half.size()));
    for (std::size_t t = 0; t < first_half.size(); ++t)
        psi.col(static_cast<Index>(t)) = first_half[t].pilots(0, 0) * first_half[t].phi.col(0);
    return psi;
}

/// Theta_1 = [F_1; ...; F_delta] with F_t = sqrt(p) a_t Q [phi_{2,t} .. phi_{M,t}].
inline CMatrix theta1_matrix(std::span<const Instant> first_half, const CMatrix& Q, double p)
{
    const Index N = Q.rows();
    const Index M = Q.cols();
    const double amp = std::sqrt(p);
    CMatrix theta(N * static_cast<Index>(first_half.size()), M - 1);
    for (std::size_t t = 0; t < first_half.size(); ++t) {
        const Instant& in = first_half[t];
        theta.middleRows(static_cast<Index>(t) * N, N) = (amp * in.pilots(0, 0)) * (Q * in.phi.rightCols(M - 1));
    }
    return theta;
}

/// Theta_2 = [T_1; ...; T_tau2] with T_t = sqrt(p) abar_t^T (x) (Q Phi_t).
inline CMatrix theta2_matrix(std::span<const Instant> phase2, const CMatrix& Q, double p)
{
    const Index N = Q.rows();
    const Index M = Q.cols();
    if (phase2.empty())
        return CMatrix(0, 0);
    const Index Ut = phase2.front().pilots.size() - 1;
    const double amp = std::sqrt(p);
    CMatrix theta = CMatrix::Zero(N * static_cast<Index>(phase2.size()), M * Ut);
    for (std::size_t t = 0; t < phase2.size(); ++t) {
        const CVector abar = reduced_pilots(phase2[t].pilots);
        const CMatrix qphi = Q * phase2[t].phi;
        for (Index j = 0; j < Ut; ++j)
            if (abar(j) != cplx(0.0))
                theta.block(static_cast<Index>(t) * N, j * M, N, M) = (amp * abar(j)) * qphi;
    }
    return theta;
}

/// Random N x M matrix of rank min(q, M) used to check rank conditions before any channel is known.
inline CMatrix rank_probe(Index q, Index M, Rng& rng)
{
    return complex_gaussian(q, M, 1.0, rng);
}

// ---------------------------------------------------------------------------
// Phase I

inline constexpr int kScheduleRetries = 8;

/// Phase I fragment of 2 delta instants. Instants 1..M use Phi_t = P C^{t-1} (C the cyclic
/// column shift) with a_t = 1, so the first columns sweep all columns of P; instants
/// M+1..delta are Haar with CN(0,1) pilots; the second half repeats the first with column 1
/// rotated by e^{j theta}. Only antenna 1 of user 1 transmits.
inline std::vector<Instant> phase1_schedule(const Dimensions& d, int q, double theta, int delta, Rng& rng,
                                            const CMatrix& P)
{
    const Index M = d.M;
    if (delta < d.M)
        throw Error(ErrorCode::InvalidConfig, "Phase I half-length must be at least M");
    if (!(theta > 0.0 && theta < 2.0 * std::numbers::pi))
        throw Error(ErrorCode::InvalidConfig, "theta must lie in (0, 2pi)");
    if (P.rows() != M || P.cols() != M)
        throw Error(ErrorCode::DimensionMismatch, "P must be M x M");

    auto silent = [&] { return CMatrix::Zero(d.K, d.U).eval(); };

    std::vector<Instant> minimal;
    CMatrix base = P;
    bool verified = false;
    for (int attempt = 0; attempt <= kScheduleRetries && !verified; ++attempt) {
        if (attempt > 0)
            base = haar_unitary(M, rng);
        minimal.clear();
        for (Index t = 0; t < M; ++t) {
            Instant in;
            in.phi.resize(M, M);
            for (Index c = 0; c < M; ++c)
                in.phi.col(c) = base.col((c + t) % M);
            in.pilots = silent();
            in.pilots(0, 0) = 1.0;
            in.tag = PhaseTag::Phase1First;
            minimal.push_back(std::move(in));
        }
        const CMatrix probe = rank_probe(q, M, rng);
        verified = numerical_rank(psi1_matrix(minimal)) == M &&
                   numerical_rank(theta1_matrix(minimal, probe, 1.0)) == M - 1;
    }
    if (!verified)
        throw Error(ErrorCode::ScheduleRankFailure, "Phase I rank conditions not met after retries");

    std::vector<Instant> out = std::move(minimal);
    for (int t = d.M; t < delta; ++t) {
        Instant in;
        in.phi = haar_unitary(M, rng);
        in.pilots = silent();
        in.pilots(0, 0) = complex_normal(rng);
        in.tag = PhaseTag::Phase1First;
        out.push_back(std::move(in));
    }
    const cplx rot = std::polar(1.0, theta);
    for (int t = 0; t < delta; ++t) {
        Instant twin = out[static_cast<std::size_t>(t)];
        twin.phi.col(0) *= rot;
        twin.tag = PhaseTag::Phase1Second;
        out.push_back(std::move(twin));
    }
    return out;
}

inline std::vector<Instant> phase1_schedule(const Dimensions& d, int q, double theta, int delta, Rng& rng)
{
    return phase1_schedule(d, q, theta, delta, rng, dft_matrix(d.M));
}

/// Constructive Phase I design: eps = floor((M-1)/q), rho = M-1-eps q. Matrix t <= eps has rows
/// (t-1)q+1..tq of P as its first q rows; matrix eps+1 starts with rows eps q+1..M-1. Remaining
/// rows are random and orthonormalized against the pinned ones, which are copied verbatim.
inline std::vector<CMatrix> appendix_a_construction(int M, int q, const CMatrix& P, Rng& rng)
{
    if (q < 1 || q > M)
        throw Error(ErrorCode::InvalidConfig, "requires 1 <= q <= M");
    if (P.rows() != M || P.cols() != M)
        throw Error(ErrorCode::DimensionMismatch, "P must be M x M");
    const int eps = (M - 1) / q;
    const int rho = M - 1 - eps * q;

    auto complete = [&](Index first_row, Index pinned) {
        CMatrix phi(M, M);
        phi.topRows(pinned) = P.middleRows(first_row, pinned);
        for (Index r = pinned; r < M; ++r) {
            CMatrix v = complex_gaussian(1, M, 1.0, rng);
            for (int pass = 0; pass < 2; ++pass)
                for (Index s = 0; s < r; ++s)
                    v -= (v * phi.row(s).adjoint())(0, 0) * phi.row(s);
            phi.row(r) = v / v.norm();
        }
        return phi;
    };

    std::vector<CMatrix> out;
    for (int t = 0; t < eps; ++t)
        out.push_back(complete(static_cast<Index>(t) * q, q));
    out.push_back(complete(static_cast<Index>(eps) * q, rho));
    return out;
}

// ---------------------------------------------------------------------------
// Phase II

/// Auxiliary allocation matrix by the northwest corner rule: each of the tau2 rows supplies q,
/// each of the U_tilde columns demands M.
inline Eigen::MatrixXi northwest_corner(int tau2, int q, int M, int U_tilde)
{
    if (tau2 < 0 || q < 1 || M < 1 || U_tilde < 0)
        throw Error(ErrorCode::InvalidConfig, "invalid allocation dimensions");
    if (static_cast<long long>(tau2) * q < static_cast<long long>(M) * U_tilde)
        throw Error(ErrorCode::InfeasibleAllocation, "total supply tau2*q is below demand M*U_tilde");
    Eigen::MatrixXi pi = Eigen::MatrixXi::Zero(tau2, U_tilde);
    std::vector<int> supply(static_cast<std::size_t>(tau2), q);
    std::vector<int> demand(static_cast<std::size_t>(U_tilde), M);
    int i = 0;
    int j = 0;
    while (i < tau2 && j < U_tilde) {
        auto& s = supply[static_cast<std::size_t>(i)];
        auto& dm = demand[static_cast<std::size_t>(j)];
        const int allo = std::min(s, dm);
        pi(i, j) = allo;
        s -= allo;
        dm -= allo;
        if (s == 0)
            ++i;
        else if (dm == 0)
            ++j;
    }
    return pi;
}

/// Rows of P in the order of (1..M) rotated left by `shift`.
inline CMatrix rotated_rows(const CMatrix& P, Index shift)
{
    const Index M = P.rows();
    CMatrix out(M, P.cols());
    for (Index r = 0; r < M; ++r)
        out.row(r) = P.row((r + shift) % M);
    return out;
}

/// Phase II fragment of tau2 instants. The first ceil(M(KU-1)/q) instants use row rotations of
/// P (shift (i q) mod M at relative instant i) with 0/1 pilots following the support of the
/// northwest-corner allocation; the rest use Haar matrices and CN(0,1) pilots. Antenna 1 of
/// user 1 is always silent.
inline std::vector<Instant> phase2_schedule(const Dimensions& d, int q, int tau2, Rng& rng, const CMatrix& P)
{
    const int M = d.M;
    const int Ut = d.reduced_antennas();
    if (q < 1)
        throw Error(ErrorCode::ScheduleRankFailure, "rank of the RIS-BS channel must be positive");
    const int minimal_len = ceil_div(M * Ut, q);
    if (tau2 < minimal_len)
        throw Error(ErrorCode::InsufficientPhase2Length, "tau2 below ceil(M(KU-1)/q)");
    if (P.rows() != M || P.cols() != M)
        throw Error(ErrorCode::DimensionMismatch, "P must be M x M");

    const Eigen::MatrixXi pi = northwest_corner(minimal_len, q, M, Ut);

    std::vector<Instant> minimal;
    CMatrix base = P;
    bool verified = minimal_len == 0;
    for (int attempt = 0; attempt <= kScheduleRetries; ++attempt) {
        if (attempt > 0)
            base = haar_unitary(M, rng);
        minimal.clear();
        for (int i = 0; i < minimal_len; ++i) {
            Instant in;
            in.phi = rotated_rows(base, (static_cast<Index>(i) * q) % M);
            in.pilots = CMatrix::Zero(d.K, d.U);
            for (int j = 0; j < Ut; ++j)
                if (pi(i, j) != 0)
                    in.pilots((j + 1) / d.U, (j + 1) % d.U) = 1.0;
            in.tag = PhaseTag::Phase2Minimal;
            minimal.push_back(std::move(in));
        }
        if (minimal_len == 0)
            break;
        const CMatrix probe = rank_probe(q, M, rng);
        if (numerical_rank(theta2_matrix(minimal, probe, 1.0)) == static_cast<Index>(M) * Ut) {
            verified = true;
            break;
        }
    }
    if (!verified)
        throw Error(ErrorCode::ScheduleRankFailure, "Phase II rank condition not met after retries");

    std::vector<Instant> out = std::move(minimal);
    for (int t = minimal_len; t < tau2; ++t) {
        Instant in;
        in.phi = haar_unitary(M, rng);
        in.pilots = complex_gaussian(d.K, d.U, 1.0, rng);
        in.pilots(0, 0) = 0.0;
        in.tag = PhaseTag::Phase2Extra;
        out.push_back(std::move(in));
    }
    return out;
}

inline std::vector<Instant> phase2_schedule(const Dimensions& d, int q, int tau2, Rng& rng)
{
    return phase2_schedule(d, q, tau2, rng, dft_matrix(d.M));
}

/// Full two-phase schedule for `cfg` (tau1 = 2 delta Phase I instants followed by tau2 Phase II
/// instants), built against rank q = min(M, N).
inline PilotSchedule build_schedule(const SystemConfig& cfg, Rng& rng)
{
    cfg.validate();
    PilotSchedule s;
    s.dims = cfg.dims;
    s.theta = cfg.theta;
    s.tau1 = cfg.tau1;
    s.tau2 = cfg.tau2;
    const int q = cfg.dims.q();
    s.instants = phase1_schedule(cfg.dims, q, cfg.theta, cfg.delta(), rng);
    auto p2 = phase2_schedule(cfg.dims, q, cfg.tau2, rng);
    s.instants.insert(s.instants.end(), std::make_move_iterator(p2.begin()), std::make_move_iterator(p2.end()));
    return s;
}

/// Orthogonal-time schedule for the LS baseline: users take contiguous turns (sizes differ by
/// at most one), each instant uses a Haar scattering matrix and CN(0,1) pilots on every antenna
/// of the active user.
inline PilotSchedule ls_baseline_schedule(const Dimensions& d, int tau, Rng& rng)
{
    if (tau < 0)
        throw Error(ErrorCode::InvalidConfig, "negative pilot length");
    PilotSchedule s;
    s.dims = d;
    s.tau1 = 0;
    s.tau2 = 0;
    int t = 0;
    for (int k = 0; k < d.K; ++k) {
        const int share = tau / d.K + (k < tau % d.K ? 1 : 0);
        for (int i = 0; i < share; ++i, ++t) {
            Instant in;
            in.phi = haar_unitary(d.M, rng);
            in.pilots = CMatrix::Zero(d.K, d.U);
            in.pilots.row(k) = complex_gaussian(1, d.U, 1.0, rng);
            in.tag = PhaseTag::Baseline;
            s.instants.push_back(std::move(in));
        }
    }
    return s;
}

}  // namespace bdris
