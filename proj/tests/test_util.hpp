// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/config.hpp"
#include "bdris/schedule.hpp"

#include <cstdint>

namespace bdris::testing {

/// Unit gains, unit power, minimal pilot split.
inline SystemConfig unit_config(int M, int N, int K, int U, double noise_variance = 0.0)
{
    SystemConfig cfg;
    cfg.dims = Dimensions{N, M, K, U};
    cfg.tx_power = 1.0;
    cfg.noise_variance = noise_variance;
    const Overhead o = min_overhead(M, N, K, U);
    cfg.tau1 = o.tau1;
    cfg.tau2 = o.tau2;
    cfg.pathloss_ur.assign(static_cast<std::size_t>(K), 1.0);
    cfg.pathloss_rb = 1.0;
    cfg.pathloss_direct = 1.0;
    return cfg;
}

inline double rel_err(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace bdris::testing
