// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/error.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace bdris {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return db_to_linear(dbm - 30.0); }

constexpr int ceil_div(int num, int den) { return (num + den - 1) / den; }

/// Distance-based large-scale gain l(d) = l0 * (d / d0)^-alpha.
struct PathLossModel {
    double ref_gain_db = -30.0;
    double ref_distance_m = 1.0;
    double ur_distance_m = 10.0;
    double ur_exponent = 2.8;
    double rb_distance_m = 50.0;
    double rb_exponent = 2.2;
    double direct_distance_m = 55.0;
    double direct_exponent = 3.5;

    double gain(double distance_m, double exponent) const
    {
        return db_to_linear(ref_gain_db) * std::pow(distance_m / ref_distance_m, -exponent);
    }
    double user_ris() const { return gain(ur_distance_m, ur_exponent); }
    double ris_bs() const { return gain(rb_distance_m, rb_exponent); }
    double direct() const { return gain(direct_distance_m, direct_exponent); }
};

struct Dimensions {
    int N = 1;  // BS antennas
    int M = 1;  // BD-RIS elements
    int K = 1;  // users
    int U = 1;  // antennas per user

    int q() const { return N < M ? N : M; }
    /// Number of transmit antennas other than antenna 1 of user 1.
    int reduced_antennas() const { return K * U - 1; }
    /// Length of the Phase II unknown vector.
    int phase2_unknowns() const { return M * reduced_antennas(); }
};

struct SystemConfig {
    Dimensions dims;
    double tx_power = 1.0;        // W, per user
    double noise_variance = 0.0;  // W
    double theta = std::numbers::pi;
    int tau1 = 2;
    int tau2 = 0;
    std::vector<double> pathloss_ur{1.0};  // one entry per user
    double pathloss_rb = 1.0;
    double pathloss_direct = 1.0;
    std::uint64_t rng_seed = 0;

    int tau() const { return tau1 + tau2; }
    int delta() const { return tau1 / 2; }

    /// Per-antenna receive SNR of the reflected link of user 1, p * l_UR * l_RB * M^2 / sigma^2.
    double receive_snr() const
    {
        const double m = dims.M;
        return tx_power * pathloss_ur.front() * pathloss_rb * m * m / noise_variance;
    }

    void validate() const
    {
        auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
        if (dims.N < 1 || dims.M < 1 || dims.K < 1 || dims.U < 1)
            fail("all dimensions must be positive");
        if (tau1 <= 0 || tau1 % 2 != 0)
            fail("tau1 must be a positive even integer");
        if (tau1 < 2 * dims.M)
            fail("tau1 must be at least 2M");
        if (tau2 < ceil_div(dims.phase2_unknowns(), dims.q()))
            fail("tau2 below ceil(M(KU-1)/q)");
        if (!(theta > 0.0 && theta < 2.0 * std::numbers::pi))
            fail("theta must lie in (0, 2pi)");
        if (!(tx_power > 0.0) || !(noise_variance >= 0.0))
            fail("power must be positive and noise variance non-negative");
        if (static_cast<int>(pathloss_ur.size()) != dims.K)
            fail("one user-RIS path loss per user is required");
        for (double g : pathloss_ur)
            if (!(g > 0.0))
                fail("path losses must be positive");
        if (!(pathloss_rb > 0.0) || !(pathloss_direct > 0.0))
            fail("path losses must be positive");
    }
};

/// Defaults used across the experiments: 33 dBm transmit power, -169 dBm/Hz noise over
/// 1 MHz, theta = pi, minimum pilot split and distance-based path loss.
inline SystemConfig default_config(Dimensions dims, const PathLossModel& pl = {})
{
    SystemConfig cfg;
    cfg.dims = dims;
    cfg.tx_power = dbm_to_watt(33.0);
    cfg.noise_variance = dbm_to_watt(-169.0 + linear_to_db(1e6));
    cfg.theta = std::numbers::pi;
    cfg.tau1 = 2 * dims.M;
    cfg.tau2 = ceil_div(dims.phase2_unknowns(), dims.q());
    cfg.pathloss_ur.assign(static_cast<std::size_t>(dims.K), pl.user_ris());
    cfg.pathloss_rb = pl.ris_bs();
    cfg.pathloss_direct = pl.direct();
    return cfg;
}

}  // namespace bdris
