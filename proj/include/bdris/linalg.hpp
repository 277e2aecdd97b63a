// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <random>

namespace bdris {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

/// Relative tolerance used by every numerical-rank decision in the library.
inline constexpr double kRankTolerance = 1e-9;

inline RVector singular_values(const CMatrix& a)
{
    if (a.size() == 0)
        return RVector();
    Eigen::BDCSVD<CMatrix> svd(a);
    return svd.singularValues();
}

/// Number of singular values strictly above `rel_tol` times the largest one.
inline Index numerical_rank(const CMatrix& a, double rel_tol = kRankTolerance)
{
    const RVector s = singular_values(a);
    if (s.size() == 0 || s(0) == 0.0)
        return 0;
    const double cut = rel_tol * s(0);
    return static_cast<Index>(std::count_if(s.begin(), s.end(), [cut](double v) { return v > cut; }));
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Column-major vectorization.
inline CVector vec(const CMatrix& a)
{
    return Eigen::Map<const CVector>(a.data(), a.size());
}

inline CMatrix unvec(const CVector& v, Index rows, Index cols)
{
    return Eigen::Map<const CMatrix>(v.data(), rows, cols);
}

/// Minimum-norm pseudo-inverse; singular values at or below `rel_tol * s_max` are dropped.
inline CMatrix pseudo_inverse(const CMatrix& a, double rel_tol = kRankTolerance)
{
    if (a.size() == 0)
        return CMatrix::Zero(a.cols(), a.rows());
    Eigen::BDCSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector& s = svd.singularValues();
    const double cut = s.size() > 0 ? rel_tol * s(0) : 0.0;
    RVector inv = RVector::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > cut)
            inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

/// ||A^H A - I||_F
inline double unitarity_defect(const CMatrix& a)
{
    return (a.adjoint() * a - CMatrix::Identity(a.cols(), a.cols())).norm();
}

// ---------------------------------------------------------------------------
// Seeded randomness

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept
{
    return mix_seed(mix_seed(mix_seed(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

/// CN(0, variance): real and imaginary parts independent, each of variance `variance / 2`.
inline cplx complex_normal(Rng& rng, double variance = 1.0)
{
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

inline CMatrix complex_gaussian(Index rows, Index cols, double variance, Rng& rng)
{
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    CMatrix out(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
            const double re = n(rng);
            const double im = n(rng);
            out(i, j) = {re, im};
        }
    return out;
}

}  // namespace bdris
