// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/channel.hpp"
#include "bdris/config.hpp"
#include "bdris/error.hpp"
#include "bdris/linalg.hpp"
#include "bdris/schedule.hpp"
#include "bdris/sim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace bdris {

struct PriorCovariances {
    CMatrix C_Q;      // M x M
    CMatrix C_beta1;  // (M-1) x (M-1)
    CMatrix C_b;      // M(KU-1) x M(KU-1)
    std::vector<double> user_scale;  // c_k, one per user
};

struct EstimationResult {
    CMatrix Q_hat;
    CVector beta11_hat;
    CVector b_hat;
    std::vector<CMatrix> J_hat;
    double nmse = std::numeric_limits<double>::quiet_NaN();
};

/// Normal-equation form of a linear observation y = Theta x + n: gram = Theta^H Theta, rhs = Theta^H y.
struct NormalEquations {
    CMatrix gram;
    CVector rhs;
};

namespace detail {

inline cplx phase1_gain(double theta, double p)
{
    return std::sqrt(p) * (std::polar(1.0, theta) - 1.0);
}

/// C Theta^H (Theta C Theta^H + s I)^{-1} y, evaluated literally (rows x rows system).
inline CVector lmmse_observation_space(const CMatrix& theta, const CVector& y, const CMatrix& C, double s)
{
    CMatrix S = theta * C * theta.adjoint();
    S.diagonal().array() += s;
    return C * (theta.adjoint() * S.ldlt().solve(y));
}

/// Same estimator through C (Theta^H Theta C + s I)^{-1} Theta^H y (cols x cols system).
inline CVector lmmse_parameter_space(const NormalEquations& ne, const CMatrix& C, double s)
{
    // Positive diagonal prior: C (G C + s I)^{-1} = (G + s C^{-1})^{-1}, Hermitian positive definite.
    if (s > 0.0 && C.isDiagonal(0.0) && (C.diagonal().real().array() > 0.0).all()) {
        CMatrix H = ne.gram;
        H.diagonal() += (s / C.diagonal().real().array()).matrix().cast<cplx>();
        Eigen::LLT<CMatrix> llt(H);
        if (llt.info() == Eigen::Success)
            return llt.solve(ne.rhs);
    }
    CMatrix S = ne.gram * C;
    S.diagonal().array() += s;
    return C * S.partialPivLu().solve(ne.rhs);
}

/// (1/c) Ybar (Psi^H C Psi + s I_delta)^{-1} Psi^H C, evaluated literally.
inline CMatrix q_lmmse_observation_space(const CMatrix& Ybar, const CMatrix& psi, const CMatrix& C, double s, cplx c)
{
    CMatrix S = psi.adjoint() * C * psi;
    S.diagonal().array() += s;
    // Ybar S^{-1} = (S^{-H} Ybar^H)^H, S Hermitian.
    const CMatrix left = S.ldlt().solve(Ybar.adjoint()).adjoint();
    return (left * psi.adjoint() * C) / c;
}

/// Same estimator through (1/c) Ybar Psi^H (C Psi Psi^H + s I_M)^{-1} C.
inline CMatrix q_lmmse_parameter_space(const CMatrix& Ybar, const CMatrix& psi, const CMatrix& C, double s, cplx c)
{
    CMatrix S = C * psi * psi.adjoint();
    S.diagonal().array() += s;
    // X S^{-1} = (S^{-T} X^T)^T
    const CMatrix x = Ybar * psi.adjoint();
    const CMatrix xs = S.transpose().partialPivLu().solve(x.transpose()).transpose();
    return (xs * C) / c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Noise-free (exact) estimators

/// Q = (sqrt(p)(e^{j theta} - 1))^{-1} Ybar1 Psi1^H (Psi1 Psi1^H)^{-1}.
inline CMatrix estimate_q_noisefree(const DiffRecord& diff, const CMatrix& psi1, double theta, double p)
{
    const Index M = psi1.rows();
    if (diff.Ybar1.cols() != psi1.cols())
        throw Error(ErrorCode::DimensionMismatch, "Ybar1 and Psi1 disagree on delta");
    // Row-wise least squares: Psi1^T Q^T = Ybar1^T / c.
    Eigen::BDCSVD<CMatrix> svd(psi1.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kRankTolerance);
    if (svd.rank() < M)
        throw Error(ErrorCode::RankDeficientPsi, "rank(Psi1) < M");
    const CMatrix qt = svd.solve(diff.Ybar1.transpose());
    return qt.transpose() / detail::phase1_gain(theta, p);
}

/// Least-squares solve that refuses rank-deficient systems.
inline CVector full_rank_solve(const CMatrix& theta, const CVector& y, ErrorCode on_deficient)
{
    if (theta.cols() == 0)
        return CVector(0);
    if (theta.rows() != y.size())
        throw Error(ErrorCode::DimensionMismatch, "observation length does not match system");
    if (theta.rows() < theta.cols())
        throw Error(on_deficient, "fewer equations than unknowns");
    Eigen::BDCSVD<CMatrix> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kRankTolerance);
    if (svd.rank() < theta.cols())
        throw Error(on_deficient, "system matrix is rank deficient");
    return svd.solve(y);
}

/// beta11 = (Theta1^H Theta1)^{-1} Theta1^H ytilde.
inline CVector estimate_beta_phase1_noisefree(const CVector& ytilde1, const CMatrix& theta1)
{
    return full_rank_solve(theta1, ytilde1, ErrorCode::RankDeficientTheta1);
}

/// bbar = (Theta2^H Theta2)^{-1} Theta2^H y2.
inline CVector estimate_b_phase2_noisefree(const CVector& y2, const CMatrix& theta2)
{
    return full_rank_solve(theta2, y2, ErrorCode::RankDeficientTheta2);
}

// ---------------------------------------------------------------------------
// LMMSE estimators

inline constexpr std::uint64_t kPriorCalibrationSeed = 0x9b1d5eedULL;
inline constexpr int kPriorCalibrationDraws = 10000;

/// C_Q = l_UR_1 l_RB M N I_M (closed form of E[Q^H Q]). The beta priors are diagonal with a
/// per-user scale c_k = median |r_{k,u,m} / r_{1,1,1}|^2 over a fixed-seed calibration ensemble.
inline PriorCovariances compute_priors(const SystemConfig& cfg)
{
    const Dimensions& d = cfg.dims;
    PriorCovariances pc;
    pc.C_Q = CMatrix::Identity(d.M, d.M) * (cfg.pathloss_ur.front() * cfg.pathloss_rb * d.M * d.N);

    Rng rng(kPriorCalibrationSeed);
    std::vector<double> ratios(kPriorCalibrationDraws);
    for (int k = 0; k < d.K; ++k) {
        const double lk = cfg.pathloss_ur[static_cast<std::size_t>(k)];
        for (auto& r : ratios) {
            const cplx ref = complex_normal(rng, cfg.pathloss_ur.front());
            const cplx other = complex_normal(rng, lk);
            r = std::norm(other / ref);
        }
        auto mid = ratios.begin() + kPriorCalibrationDraws / 2;
        std::nth_element(ratios.begin(), mid, ratios.end());
        const double upper = *mid;
        const double lower = *std::max_element(ratios.begin(), mid);
        pc.user_scale.push_back(0.5 * (upper + lower));
    }

    pc.C_beta1 = CMatrix::Identity(d.M - 1, d.M - 1) * pc.user_scale.front();
    RVector diag(d.phase2_unknowns());
    Index col = 0;
    for (int k = 0; k < d.K; ++k)
        for (int u = 0; u < d.U; ++u) {
            if (k == 0 && u == 0)
                continue;
            diag.segment(col * d.M, d.M).setConstant(pc.user_scale[static_cast<std::size_t>(k)]);
            ++col;
        }
    pc.C_b = diag.cast<cplx>().asDiagonal();
    return pc;
}

/// Qhat = (sqrt(p)(e^{j theta}-1))^{-1} Ybar1 (Psi1^H C_Q Psi1 + sigma_z^2 I)^{-1} Psi1^H C_Q.
/// For delta > M the algebraically identical M x M form is used.
inline CMatrix estimate_q_lmmse(const DiffRecord& diff, const CMatrix& psi1, double theta, double p, const CMatrix& C_Q,
                                double sigma_z2)
{
    if (diff.Ybar1.cols() != psi1.cols() || C_Q.rows() != psi1.rows())
        throw Error(ErrorCode::DimensionMismatch, "Phase I LMMSE operand shapes");
    const cplx c = detail::phase1_gain(theta, p);
    if (sigma_z2 <= 0.0) {
        const CMatrix S = psi1.adjoint() * C_Q * psi1;
        if (numerical_rank(S) < S.rows())
            throw Error(ErrorCode::SingularRegularizedMatrix, "Psi1^H C_Q Psi1 is singular and sigma_z^2 = 0");
        return detail::q_lmmse_observation_space(diff.Ybar1, psi1, C_Q, 0.0, c);
    }
    if (psi1.cols() <= psi1.rows())
        return detail::q_lmmse_observation_space(diff.Ybar1, psi1, C_Q, sigma_z2, c);
    return detail::q_lmmse_parameter_space(diff.Ybar1, psi1, C_Q, sigma_z2, c);
}

/// xhat = C Theta^H (Theta C Theta^H + sigma^2 I)^{-1} y, with the smaller of the two equivalent
/// systems solved.
inline CVector lmmse_solve(const CMatrix& theta, const CVector& y, const CMatrix& C, double sigma2)
{
    if (theta.cols() == 0)
        return CVector(0);
    if (theta.rows() != y.size() || C.rows() != theta.cols())
        throw Error(ErrorCode::DimensionMismatch, "LMMSE operand shapes");
    if (theta.rows() <= theta.cols())
        return detail::lmmse_observation_space(theta, y, C, sigma2);
    return detail::lmmse_parameter_space({theta.adjoint() * theta, theta.adjoint() * y}, C, sigma2);
}

inline CVector estimate_beta_phase1_lmmse(const CVector& ytilde1, const CMatrix& theta1_hat, const CMatrix& C_beta1,
                                          double sigma2)
{
    return lmmse_solve(theta1_hat, ytilde1, C_beta1, sigma2);
}

inline CVector estimate_b_phase2_lmmse(const CVector& y2, const CMatrix& theta2_hat, const CMatrix& C_b, double sigma2)
{
    return lmmse_solve(theta2_hat, y2, C_b, sigma2);
}

inline CVector estimate_b_phase2_lmmse(const NormalEquations& ne, const CMatrix& C_b, double sigma2)
{
    if (ne.gram.cols() == 0)
        return CVector(0);
    return detail::lmmse_parameter_space(ne, C_b, sigma2);
}

/// Theta2^H Theta2 and Theta2^H y2 accumulated instant by instant from the Kronecker structure
/// T_t = sqrt(p) abar_t^T (x) Q Phi_t, without forming Theta2.
inline NormalEquations phase2_normal_equations(std::span<const Instant> phase2, const CMatrix& Q, double p, const CVector& y2)
{
    const Index N = Q.rows();
    const Index M = Q.cols();
    const Index Ut = phase2.empty() ? 0 : phase2.front().pilots.size() - 1;
    if (y2.size() != N * static_cast<Index>(phase2.size()))
        throw Error(ErrorCode::DimensionMismatch, "Phase II observation length");
    const Index T = static_cast<Index>(phase2.size());
    NormalEquations ne{CMatrix::Zero(M * Ut, M * Ut), CVector::Zero(M * Ut)};
    const CMatrix QhQ = Q.adjoint() * Q;
    const double amp = std::sqrt(p);
    // sum_t W_t (x) A_t, W_t = p conj(abar) abar^T and A_t = Phi^H Q^H Q Phi, is evaluated as one
    // product of the stacked vec(W_t)^T and vec(A_t)^T rows, then rearranged block by block.
    CMatrix weights(T, Ut * Ut);
    CMatrix inners(T, M * M);
    for (Index t = 0; t < T; ++t) {
        const Instant& in = phase2[static_cast<std::size_t>(t)];
        const CVector abar = reduced_pilots(in.pilots);
        const CMatrix w = p * abar.conjugate() * abar.transpose();
        const CMatrix inner = in.phi.adjoint() * QhQ * in.phi;
        weights.row(t) = Eigen::Map<const CVector>(w.data(), w.size()).transpose();
        inners.row(t) = Eigen::Map<const CVector>(inner.data(), inner.size()).transpose();
        const CVector proj = in.phi.adjoint() * (Q.adjoint() * y2.segment(t * N, N));
        for (Index i = 0; i < Ut; ++i)
            if (abar(i) != cplx(0.0))
                ne.rhs.segment(i * M, M) += (amp * std::conj(abar(i))) * proj;
    }
    const CMatrix rearranged = weights.transpose() * inners;
    for (Index j = 0; j < Ut; ++j)
        for (Index i = 0; i < Ut; ++i)
            ne.gram.block(i * M, j * M, M, M) =
                Eigen::Map<const CMatrix, 0, Eigen::InnerStride<>>(rearranged.data() + (i + j * Ut), M, M,
                                                                   Eigen::InnerStride<>(rearranged.rows()));
    return ne;
}

// ---------------------------------------------------------------------------
// Reconstruction and metric

inline std::vector<CMatrix> reconstruct_j(const CMatrix& Q_hat, const CVector& beta11_hat, const CVector& b_hat,
                                          const Dimensions& d)
{
    if (Q_hat.rows() != d.N || Q_hat.cols() != d.M)
        throw Error(ErrorCode::DimensionMismatch, "Q_hat must be N x M");
    return cascaded_from_scaling(Q_hat, assemble_scaling(beta11_hat, b_hat, d));
}

/// (1/K) sum_k ||Jhat_k - J_k||_F^2 / ||J_k||_F^2 for a single realization.
inline double nmse(std::span<const CMatrix> J_hat, std::span<const CMatrix> J)
{
    if (J_hat.size() != J.size() || J.empty())
        throw Error(ErrorCode::DimensionMismatch, "user count mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < J.size(); ++k) {
        if (J_hat[k].rows() != J[k].rows() || J_hat[k].cols() != J[k].cols())
            throw Error(ErrorCode::DimensionMismatch, "cascaded channel shape mismatch");
        const double ref = J[k].squaredNorm();
        if (ref == 0.0)
            throw Error(ErrorCode::ZeroChannel, "reference cascaded channel has zero norm");
        acc += (J_hat[k] - J[k]).squaredNorm() / ref;
    }
    return acc / static_cast<double>(J.size());
}

// ---------------------------------------------------------------------------
// LS baseline

/// Direct least-squares estimation of every J_k entry. Per BS antenna n, user k's unknowns
/// x_{k,n} = [J_k(n, :), J_k(N+n, :), ...]^T (length U M^2) enter y_{t,n} through the row
/// sqrt(p) (a_{k,t} (x) vec(Phi_t))^T. The minimum-norm pseudo-inverse depends only on the
/// schedule, so it is factored once and applied to any number of records.
class LsBaselineSolver {
public:
    LsBaselineSolver(const PilotSchedule& s, double tx_power) : dims_(s.dims)
    {
        const Dimensions& d = dims_;
        const Index M2 = static_cast<Index>(d.M) * d.M;
        const double amp = std::sqrt(tx_power);

        std::vector<int> active(s.instants.size(), -1);
        orthogonal_ = true;
        for (std::size_t t = 0; t < s.instants.size(); ++t) {
            const CMatrix& a = s.instants[t].pilots;
            for (int k = 0; k < d.K; ++k)
                if (!a.row(k).isZero(0.0)) {
                    if (active[t] >= 0)
                        orthogonal_ = false;
                    active[t] = k;
                }
        }

        auto design_row = [&](const Instant& in, int k) {
            const CVector phi = vec(in.phi);
            CMatrix row(1, d.U * M2);
            for (int u = 0; u < d.U; ++u)
                row.middleCols(u * M2, M2) = (amp * in.pilots(k, u)) * phi.transpose();
            return row;
        };

        if (orthogonal_) {
            for (int k = 0; k < d.K; ++k) {
                Group g;
                g.users = {k};
                for (std::size_t t = 0; t < active.size(); ++t)
                    if (active[t] == k)
                        g.instants.push_back(static_cast<Index>(t));
                CMatrix A(static_cast<Index>(g.instants.size()), d.U * M2);
                for (std::size_t i = 0; i < g.instants.size(); ++i)
                    A.row(static_cast<Index>(i)) = design_row(s.instants[static_cast<std::size_t>(g.instants[i])], k);
                g.pinv = pseudo_inverse(A);
                groups_.push_back(std::move(g));
            }
        } else {
            Group g;
            for (int k = 0; k < d.K; ++k)
                g.users.push_back(k);
            for (std::size_t t = 0; t < s.instants.size(); ++t)
                g.instants.push_back(static_cast<Index>(t));
            CMatrix A(static_cast<Index>(g.instants.size()), d.K * d.U * M2);
            for (std::size_t t = 0; t < s.instants.size(); ++t)
                for (int k = 0; k < d.K; ++k)
                    A.block(static_cast<Index>(t), k * d.U * M2, 1, d.U * M2) = design_row(s.instants[t], k);
            g.pinv = pseudo_inverse(A);
            groups_.push_back(std::move(g));
        }
    }

    std::vector<CMatrix> solve(const RxRecord& rx) const
    {
        const Dimensions& d = dims_;
        if (rx.y.rows() != d.N)
            throw Error(ErrorCode::DimensionMismatch, "record has wrong number of BS antennas");
        const Index M2 = static_cast<Index>(d.M) * d.M;
        std::vector<CMatrix> J(static_cast<std::size_t>(d.K), CMatrix::Zero(d.U * d.N, M2));
        for (const Group& g : groups_) {
            CMatrix Y(static_cast<Index>(g.instants.size()), d.N);
            for (std::size_t i = 0; i < g.instants.size(); ++i) {
                if (g.instants[i] >= rx.y.cols())
                    throw Error(ErrorCode::DimensionMismatch, "record shorter than schedule");
                Y.row(static_cast<Index>(i)) = rx.y.col(g.instants[i]).transpose();
            }
            const CMatrix X = g.pinv * Y;
            for (std::size_t gi = 0; gi < g.users.size(); ++gi) {
                CMatrix& Jk = J[static_cast<std::size_t>(g.users[gi])];
                const Index off = static_cast<Index>(gi) * d.U * M2;
                for (int u = 0; u < d.U; ++u)
                    for (int n = 0; n < d.N; ++n)
                        Jk.row(u * d.N + n) = X.block(off + u * M2, n, M2, 1).transpose();
            }
        }
        return J;
    }

    bool orthogonal() const { return orthogonal_; }

private:
    struct Group {
        std::vector<int> users;
        std::vector<Index> instants;
        CMatrix pinv;
    };
    Dimensions dims_;
    bool orthogonal_ = true;
    std::vector<Group> groups_;
};

inline std::vector<CMatrix> ls_baseline(const RxRecord& rx, const PilotSchedule& s, double tx_power)
{
    return LsBaselineSolver(s, tx_power).solve(rx);
}

// ---------------------------------------------------------------------------
// Two-phase pipelines

/// Exact recovery from noise-free observations: pseudo-inverse solves in both phases.
inline EstimationResult estimate_two_phase_noisefree(const RxRecord& rx, const PilotSchedule& s, double tx_power)
{
    EstimationResult r;
    const DiffRecord diff = pair_difference(rx, s.delta());
    r.Q_hat = estimate_q_noisefree(diff, psi1_matrix(s.phase1_first()), s.theta, tx_power);
    const CVector ytilde = strip_reference(rx, r.Q_hat, s, tx_power);
    r.beta11_hat = estimate_beta_phase1_noisefree(ytilde, theta1_matrix(s.phase1_first(), r.Q_hat, tx_power));
    r.b_hat = estimate_b_phase2_noisefree(phase2_observations(rx, s), theta2_matrix(s.phase2(), r.Q_hat, tx_power));
    r.J_hat = reconstruct_j(r.Q_hat, r.beta11_hat, r.b_hat, Dimensions{static_cast<int>(rx.y.rows()), s.dims.M, s.dims.K, s.dims.U});
    return r;
}

/// Noisy-case pipeline: LMMSE for Q, then LMMSE for the scaling coefficients of both phases with
/// the measurement matrices rebuilt from Qhat.
inline EstimationResult estimate_two_phase_lmmse(const RxRecord& rx, const PilotSchedule& s, double tx_power,
                                                 const PriorCovariances& priors)
{
    EstimationResult r;
    const DiffRecord diff = pair_difference(rx, s.delta());
    r.Q_hat = estimate_q_lmmse(diff, psi1_matrix(s.phase1_first()), s.theta, tx_power, priors.C_Q, diff.noise_variance);
    const CVector ytilde = strip_reference(rx, r.Q_hat, s, tx_power);
    r.beta11_hat = estimate_beta_phase1_lmmse(ytilde, theta1_matrix(s.phase1_first(), r.Q_hat, tx_power), priors.C_beta1,
                                              rx.noise_variance);
    const CVector y2 = phase2_observations(rx, s);
    r.b_hat = estimate_b_phase2_lmmse(phase2_normal_equations(s.phase2(), r.Q_hat, tx_power, y2), priors.C_b,
                                      rx.noise_variance);
    r.J_hat = reconstruct_j(r.Q_hat, r.beta11_hat, r.b_hat, Dimensions{static_cast<int>(rx.y.rows()), s.dims.M, s.dims.K, s.dims.U});
    return r;
}

}  // namespace bdris
