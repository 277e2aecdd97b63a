// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bdris/channel.hpp"
#include "bdris/config.hpp"
#include "bdris/error.hpp"
#include "bdris/estimate.hpp"
#include "bdris/linalg.hpp"
#include "bdris/schedule.hpp"
#include "bdris/sim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace bdris {

enum class EstimatorKind { ProposedLmmse, ProposedNoiseFree, LsBaseline };

constexpr std::string_view to_string(EstimatorKind e) noexcept
{
    switch (e) {
    case EstimatorKind::ProposedLmmse: return "proposed_lmmse";
    case EstimatorKind::ProposedNoiseFree: return "proposed_noisefree";
    case EstimatorKind::LsBaseline: return "ls_baseline";
    }
    return "unknown";
}

inline EstimatorKind parse_estimator(std::string_view s)
{
    for (auto e : {EstimatorKind::ProposedLmmse, EstimatorKind::ProposedNoiseFree, EstimatorKind::LsBaseline})
        if (to_string(e) == s)
            return e;
    throw Error(ErrorCode::ParseError, "unknown estimator '" + std::string(s) + "'");
}

enum class SweepAxis { None, TotalTau, M, K, Rho };

constexpr std::string_view to_string(SweepAxis a) noexcept
{
    switch (a) {
    case SweepAxis::None: return "none";
    case SweepAxis::TotalTau: return "tau";
    case SweepAxis::M: return "M";
    case SweepAxis::K: return "K";
    case SweepAxis::Rho: return "rho";
    }
    return "unknown";
}

inline SweepAxis parse_axis(std::string_view s)
{
    if (s == "total_tau" || s == "tau")
        return SweepAxis::TotalTau;
    if (s == "M")
        return SweepAxis::M;
    if (s == "K")
        return SweepAxis::K;
    if (s == "rho")
        return SweepAxis::Rho;
    if (s == "none")
        return SweepAxis::None;
    throw Error(ErrorCode::ParseError, "unknown sweep axis '" + std::string(s) + "'");
}

inline std::vector<double> default_rho_grid() { return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

struct ExperimentSpec {
    std::string name = "experiment";
    SystemConfig base;  // dimensions, powers and path losses; the pilot split is derived per scenario
    SweepAxis axis = SweepAxis::None;
    std::vector<double> values;
    int tau = 0;  // total pilot length when tau is not swept; 0 selects the minimum overhead
    int trials = 200;
    std::vector<EstimatorKind> estimators{EstimatorKind::ProposedLmmse, EstimatorKind::LsBaseline};
    std::optional<double> rho;  // empty: chosen per scenario from rho_grid on a calibration stream
    std::vector<double> rho_grid = default_rho_grid();
    int rho_calibration_trials = 32;
    std::uint64_t seed = 1;
    bool timing = false;
    int workers = 0;  // 0: BDRIS_WORKERS or hardware concurrency

    void validate() const
    {
        auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
        if (trials < 1)
            fail("trials must be positive");
        if (estimators.empty())
            fail("at least one estimator is required");
        if (axis != SweepAxis::None && values.empty())
            fail("sweep axis given without values");
        if (rho && !(*rho >= 0.0 && *rho <= 1.0))
            fail("rho must lie in [0, 1]");
        if (!rho && (rho_grid.empty() || rho_calibration_trials < 1))
            fail("automatic rho needs a grid and calibration trials");
        for (double r : rho_grid)
            if (!(r >= 0.0 && r <= 1.0))
                fail("rho grid values must lie in [0, 1]");
        if (tau < 0)
            fail("tau must be non-negative");
        for (double v : values) {
            if (axis == SweepAxis::Rho && !(v >= 0.0 && v <= 1.0))
                fail("rho sweep values must lie in [0, 1]");
            if ((axis == SweepAxis::M || axis == SweepAxis::K || axis == SweepAxis::TotalTau) &&
                (v < 1.0 || v != std::floor(v)))
                fail("integer sweep values must be positive integers");
        }
    }
};

struct ResultRow {
    std::string scenario;
    int M = 0;
    int N = 0;
    int K = 0;
    int U = 0;
    int tau = 0;
    int tau1 = 0;
    int tau2 = 0;
    double rho = 0.0;
    EstimatorKind estimator = EstimatorKind::ProposedLmmse;
    int trial = 0;
    std::uint64_t seed = 0;
    double nmse = std::numeric_limits<double>::quiet_NaN();
    std::optional<ErrorCode> error;
    double ms = 0.0;
};

// ---------------------------------------------------------------------------
// Formatting

inline std::string format_shortest(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string format_17(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr std::string_view kCsvHeader = "scenario,M,N,K,U,tau,tau1,tau2,rho,estimator,trial,seed,nmse,ms";

inline void write_csv_row(std::ostream& os, const ResultRow& r)
{
    os << r.scenario << ',' << r.M << ',' << r.N << ',' << r.K << ',' << r.U << ',' << r.tau << ',' << r.tau1 << ','
       << r.tau2 << ',' << format_shortest(r.rho) << ',' << to_string(r.estimator) << ',' << r.trial << ',' << r.seed
       << ',';
    if (r.error)
        os << "error:" << to_string(*r.error);
    else
        os << format_17(r.nmse);
    os << ',' << format_shortest(r.ms) << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows)
{
    os << kCsvHeader << '\n';
    for (const auto& r : rows)
        write_csv_row(os, r);
}

// ---------------------------------------------------------------------------
// Worker pool

inline int worker_count(int requested = 0)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("BDRIS_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<int>(std::min<long>(v, 1024));
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n) on a bounded set of threads. Results must be written to
/// per-index slots so completion order never matters. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn)
{
    const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t)
        pool.emplace_back(body);
    pool.clear();
    if (first_error)
        std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Scenarios

/// tau1 = 2(M + floor(rho tau_res / 2)) with tau_res = tau - (minimum overhead); tau2 = tau - tau1.
inline std::pair<int, int> split_pilots(const Dimensions& d, int tau, double rho)
{
    const Overhead o = min_overhead(d.M, d.N, d.K, d.U);
    if (tau < o.tau)
        throw Error(ErrorCode::InvalidConfig, "total pilot length below the minimum overhead");
    const int res = tau - o.tau;
    const int extra_pairs = static_cast<int>(std::floor(rho * res / 2.0 + 1e-9));
    const int tau1 = 2 * (d.M + extra_pairs);
    return {tau1, tau - tau1};
}

struct Scenario {
    std::string id;
    SystemConfig cfg;  // tau1 / tau2 valid only when `feasible`
    int tau = 0;
    double rho = 0.0;
    bool calibrate = false;
    std::optional<ErrorCode> infeasible;
};

namespace harness_detail {

// Seed streams; channel draws depend on the trial only, so every scenario of a sweep sees the
// same channel sequence.
inline constexpr std::uint64_t kChannelStream = 0x43;
inline constexpr std::uint64_t kNoiseStream = 0x4e;
inline constexpr std::uint64_t kBaselineNoiseStream = 0x4c;
inline constexpr std::uint64_t kScheduleStream = 0x53;
inline constexpr std::uint64_t kCalibrationOffset = 0x5ca1ab1e;

inline bool uses_proposed(const ExperimentSpec& spec)
{
    return std::any_of(spec.estimators.begin(), spec.estimators.end(),
                       [](EstimatorKind e) { return e != EstimatorKind::LsBaseline; });
}

inline bool has(const ExperimentSpec& spec, EstimatorKind e)
{
    return std::find(spec.estimators.begin(), spec.estimators.end(), e) != spec.estimators.end();
}

}  // namespace harness_detail

inline std::vector<Scenario> build_scenarios(const ExperimentSpec& spec)
{
    spec.validate();
    std::vector<double> values = spec.values;
    if (spec.axis == SweepAxis::None)
        values = {0.0};
    std::vector<Scenario> out;
    for (double v : values) {
        Scenario sc;
        sc.cfg = spec.base;
        sc.id = spec.name;
        if (spec.axis != SweepAxis::None)
            sc.id += "/" + std::string(to_string(spec.axis)) + "=" + format_shortest(v);
        if (spec.axis == SweepAxis::M)
            sc.cfg.dims.M = static_cast<int>(v);
        if (spec.axis == SweepAxis::K) {
            sc.cfg.dims.K = static_cast<int>(v);
            sc.cfg.pathloss_ur.resize(static_cast<std::size_t>(sc.cfg.dims.K), spec.base.pathloss_ur.front());
        }
        const Dimensions& d = sc.cfg.dims;
        const Overhead o = min_overhead(d.M, d.N, d.K, d.U);
        sc.tau = spec.axis == SweepAxis::TotalTau ? static_cast<int>(v) : (spec.tau > 0 ? spec.tau : o.tau);
        if (spec.axis == SweepAxis::Rho)
            sc.rho = v;
        else if (spec.rho)
            sc.rho = *spec.rho;
        else
            sc.calibrate = harness_detail::has(spec, EstimatorKind::ProposedLmmse) && spec.base.noise_variance > 0.0;
        if (sc.tau < o.tau) {
            sc.infeasible = ErrorCode::InvalidConfig;
            sc.calibrate = false;
        } else {
            std::tie(sc.cfg.tau1, sc.cfg.tau2) = split_pilots(d, sc.tau, sc.rho);
            sc.cfg.validate();
        }
        out.push_back(std::move(sc));
    }
    return out;
}

namespace harness_detail {

struct TrialSeeds {
    std::uint64_t channel;
    std::uint64_t noise;
    std::uint64_t baseline_noise;
};

inline TrialSeeds trial_seeds(std::uint64_t master, std::size_t scenario, int trial)
{
    const auto t = static_cast<std::uint64_t>(trial);
    const auto s = static_cast<std::uint64_t>(scenario);
    return {derive_seed(master, kChannelStream, t), derive_seed(master, kNoiseStream + (s << 8), t),
            derive_seed(master, kBaselineNoiseStream + (s << 8), t)};
}

/// Everything that depends on the scenario but not on the trial.
struct Prepared {
    std::optional<PilotSchedule> schedule;
    std::optional<ErrorCode> schedule_error;
    std::optional<PriorCovariances> priors;
    std::optional<PilotSchedule> baseline_schedule;
    std::optional<LsBaselineSolver> baseline;
};

inline Prepared prepare(const ExperimentSpec& spec, const Scenario& sc, std::size_t index, std::uint64_t master)
{
    Prepared p;
    if (uses_proposed(spec)) {
        if (sc.infeasible) {
            p.schedule_error = sc.infeasible;
        } else {
            try {
                Rng rng(derive_seed(master, kScheduleStream, index));
                p.schedule = build_schedule(sc.cfg, rng);
                if (has(spec, EstimatorKind::ProposedLmmse))
                    p.priors = compute_priors(sc.cfg);
            } catch (const Error& e) {
                p.schedule_error = e.code();
            }
        }
    }
    if (has(spec, EstimatorKind::LsBaseline)) {
        Rng rng(derive_seed(master, kScheduleStream + 1, index));
        p.baseline_schedule = ls_baseline_schedule(sc.cfg.dims, sc.tau, rng);
        p.baseline.emplace(*p.baseline_schedule, sc.cfg.tx_power);
    }
    return p;
}

/// One trial of one scenario; fills one row per estimator in spec order.
inline void run_trial(const ExperimentSpec& spec, const Scenario& sc, const Prepared& prep, std::uint64_t master,
                      std::size_t index, int trial, ResultRow* out)
{
    const TrialSeeds seeds = trial_seeds(master, index, trial);
    const Dimensions& d = sc.cfg.dims;
    for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
        ResultRow& r = out[e];
        r.scenario = sc.id;
        r.M = d.M;
        r.N = d.N;
        r.K = d.K;
        r.U = d.U;
        r.tau = sc.tau;
        r.tau1 = sc.cfg.tau1;
        r.tau2 = sc.cfg.tau2;
        r.rho = sc.rho;
        r.estimator = spec.estimators[e];
        r.trial = trial;
        r.seed = seeds.channel;
        if (sc.infeasible) {
            r.tau1 = 0;
            r.tau2 = 0;
        }
    }

    std::optional<ChannelSet> ch;
    std::vector<CMatrix> J;
    try {
        ch = generate_channel_set(sc.cfg, seeds.channel);
        J = build_cascaded(*ch).J;
    } catch (const Error& err) {
        for (std::size_t e = 0; e < spec.estimators.size(); ++e)
            out[e].error = err.code();
        return;
    }

    std::optional<RxRecord> rx;
    std::optional<RxRecord> rx_base;
    for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
        ResultRow& r = out[e];
        const auto start = std::chrono::steady_clock::now();
        try {
            std::vector<CMatrix> J_hat;
            if (r.estimator == EstimatorKind::LsBaseline) {
                if (!rx_base)
                    rx_base = synthesize_rx(*ch, *prep.baseline_schedule, sc.cfg, seeds.baseline_noise);
                J_hat = prep.baseline->solve(*rx_base);
            } else {
                if (prep.schedule_error)
                    throw Error(*prep.schedule_error, "scenario has no valid schedule");
                if (!rx)
                    rx = synthesize_rx(*ch, *prep.schedule, sc.cfg, seeds.noise);
                J_hat = r.estimator == EstimatorKind::ProposedLmmse
                            ? estimate_two_phase_lmmse(*rx, *prep.schedule, sc.cfg.tx_power, *prep.priors).J_hat
                            : estimate_two_phase_noisefree(*rx, *prep.schedule, sc.cfg.tx_power).J_hat;
            }
            r.nmse = nmse(J_hat, J);
            if (!std::isfinite(r.nmse))
                r.error = ErrorCode::SingularRegularizedMatrix;
        } catch (const Error& err) {
            r.error = err.code();
        }
        if (spec.timing)
            r.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
}

/// Picks rho from the grid by the mean LMMSE NMSE over a calibration stream that is disjoint
/// from the reported trials. Ties go to the smaller rho.
inline double calibrate_rho(const ExperimentSpec& spec, const Scenario& sc, std::size_t index, int workers)
{
    const std::uint64_t master = spec.seed ^ kCalibrationOffset;
    ExperimentSpec probe = spec;
    probe.estimators = {EstimatorKind::ProposedLmmse};
    probe.timing = false;

    std::vector<Scenario> grid;
    std::vector<Prepared> prepared;
    for (double r : spec.rho_grid) {
        Scenario g = sc;
        g.rho = r;
        std::tie(g.cfg.tau1, g.cfg.tau2) = split_pilots(g.cfg.dims, g.tau, r);
        grid.push_back(g);
        prepared.push_back(prepare(probe, g, index, master));
    }
    const std::size_t n = grid.size() * static_cast<std::size_t>(spec.rho_calibration_trials);
    std::vector<ResultRow> rows(n);
    parallel_for(n, workers, [&](std::size_t i) {
        const std::size_t g = i / static_cast<std::size_t>(spec.rho_calibration_trials);
        const int t = static_cast<int>(i % static_cast<std::size_t>(spec.rho_calibration_trials));
        run_trial(probe, grid[g], prepared[g], master, index, t, &rows[i]);
    });
    double best = std::numeric_limits<double>::infinity();
    double best_rho = spec.rho_grid.front();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        int ok = 0;
        for (int t = 0; t < spec.rho_calibration_trials; ++t) {
            const ResultRow& r = rows[g * static_cast<std::size_t>(spec.rho_calibration_trials) + static_cast<std::size_t>(t)];
            if (!r.error) {
                acc += r.nmse;
                ++ok;
            }
        }
        const double mean = ok > 0 ? acc / ok : std::numeric_limits<double>::infinity();
        if (mean < best) {
            best = mean;
            best_rho = grid[g].rho;
        }
    }
    return best_rho;
}

}  // namespace harness_detail

/// Monte-Carlo sweep: one row per (scenario, estimator, trial), ordered by scenario, then
/// trial, then estimator. Deterministic in spec.seed regardless of the worker count.
inline std::vector<ResultRow> run_experiment(const ExperimentSpec& spec)
{
    using namespace harness_detail;
    std::vector<Scenario> scenarios = build_scenarios(spec);
    const int workers = worker_count(spec.workers);

    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        Scenario& sc = scenarios[s];
        if (!sc.calibrate)
            continue;
        sc.rho = calibrate_rho(spec, sc, s, workers);
        std::tie(sc.cfg.tau1, sc.cfg.tau2) = split_pilots(sc.cfg.dims, sc.tau, sc.rho);
    }

    std::vector<Prepared> prepared;
    prepared.reserve(scenarios.size());
    for (std::size_t s = 0; s < scenarios.size(); ++s)
        prepared.push_back(prepare(spec, scenarios[s], s, spec.seed));

    const std::size_t per_trial = spec.estimators.size();
    const std::size_t trials = static_cast<std::size_t>(spec.trials);
    std::vector<ResultRow> rows(scenarios.size() * trials * per_trial);
    parallel_for(scenarios.size() * trials, workers, [&](std::size_t i) {
        const std::size_t s = i / trials;
        const int t = static_cast<int>(i % trials);
        run_trial(spec, scenarios[s], prepared[s], spec.seed, s, t, &rows[i * per_trial]);
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Summaries

struct PointSummary {
    std::string scenario;
    EstimatorKind estimator = EstimatorKind::ProposedLmmse;
    int M = 0;
    int K = 0;
    int tau = 0;
    double rho = 0.0;
    int count = 0;
    int failures = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double lo95 = std::numeric_limits<double>::quiet_NaN();
    double hi95 = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr int kBootstrapResamples = 1000;
inline constexpr std::uint64_t kBootstrapSeed = 0xb0075742ULL;

/// Percentile bootstrap interval of the mean.
inline std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& x, double level = 0.95)
{
    if (x.empty())
        return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    Rng rng(kBootstrapSeed);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> means(kBootstrapResamples);
    for (auto& m : means) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            acc += x[pick(rng)];
        m = acc / static_cast<double>(x.size());
    }
    std::sort(means.begin(), means.end());
    const double a = (1.0 - level) / 2.0;
    const auto at = [&](double q) {
        const auto i = static_cast<std::size_t>(std::clamp(q * (kBootstrapResamples - 1), 0.0, kBootstrapResamples - 1.0));
        return means[i];
    };
    return {at(a), at(1.0 - a)};
}

/// Groups rows by (scenario, estimator), preserving first-appearance order.
inline std::vector<PointSummary> summarize(const std::vector<ResultRow>& rows)
{
    std::vector<PointSummary> out;
    std::vector<std::vector<double>> samples;
    std::map<std::pair<std::string, EstimatorKind>, std::size_t> where;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.scenario, r.estimator);
        auto it = where.find(key);
        if (it == where.end()) {
            PointSummary p;
            p.scenario = r.scenario;
            p.estimator = r.estimator;
            p.M = r.M;
            p.K = r.K;
            p.tau = r.tau;
            p.rho = r.rho;
            it = where.emplace(key, out.size()).first;
            out.push_back(p);
            samples.emplace_back();
        }
        PointSummary& p = out[it->second];
        if (r.error)
            ++p.failures;
        else
            samples[it->second].push_back(r.nmse);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& x = samples[i];
        out[i].count = static_cast<int>(x.size());
        if (x.empty())
            continue;
        double acc = 0.0;
        for (double v : x)
            acc += v;
        out[i].mean = acc / static_cast<double>(x.size());
        std::tie(out[i].lo95, out[i].hi95) = bootstrap_mean_ci(x);
    }
    return out;
}

inline std::vector<PointSummary> select(const std::vector<PointSummary>& all, EstimatorKind e)
{
    std::vector<PointSummary> out;
    for (const auto& p : all)
        if (p.estimator == e)
            out.push_back(p);
    return out;
}

inline void write_summary(std::ostream& os, const std::vector<PointSummary>& points)
{
    os << "scenario,estimator,rho,count,failures,mean_nmse,lo95,hi95\n";
    for (const auto& p : points)
        os << p.scenario << ',' << to_string(p.estimator) << ',' << format_shortest(p.rho) << ',' << p.count << ','
           << p.failures << ',' << format_17(p.mean) << ',' << format_17(p.lo95) << ',' << format_17(p.hi95) << '\n';
}

// ---------------------------------------------------------------------------
// Rank-condition verification

struct CheckResult {
    Dimensions dims;
    std::string check;
    bool pass = false;
    bool vacuous = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;

    bool all_pass() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    }
    std::size_t failures() const
    {
        return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.pass; }));
    }
};

inline std::vector<Dimensions> dimension_grid(const std::vector<int>& Ms, const std::vector<int>& Ns,
                                              const std::vector<int>& Ks, const std::vector<int>& Us)
{
    std::vector<Dimensions> out;
    for (int M : Ms)
        for (int N : Ns)
            for (int K : Ks)
                for (int U : Us)
                    out.push_back(Dimensions{N, M, K, U});
    return out;
}

inline std::vector<Dimensions> default_verify_grid()
{
    return dimension_grid({2, 3, 4, 5, 6, 7, 8, 9, 10}, {1, 2, 3, 4, 5, 6, 7, 8}, {1, 2}, {1, 2});
}

/// Rank checks of both minimal designs against random rank-q probes, the sharpness of the
/// Phase II length, allocation invariants, and exact noise-free recovery at the minimum
/// overhead.
inline VerifyReport verify_theorems(const std::vector<Dimensions>& grid, std::uint64_t seed = 7)
{
    VerifyReport rep;
    for (const Dimensions& d : grid) {
        auto add = [&](std::string name, bool pass, std::string detail = {}, bool vacuous = false) {
            rep.checks.push_back(CheckResult{d, std::move(name), pass, vacuous, std::move(detail)});
        };
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d.M), static_cast<std::uint64_t>(d.N * 100 + d.K * 10 + d.U)));
        const int q = d.q();
        const Index M = d.M;
        const Index cols2 = static_cast<Index>(d.phase2_unknowns());
        try {
            const auto p1 = phase1_schedule(d, q, std::numbers::pi, d.M, rng);
            const std::span<const Instant> first(p1.data(), static_cast<std::size_t>(d.M));
            const CMatrix probe = complex_gaussian(d.N, d.M, 1.0, rng);
            const Index r_psi = numerical_rank(psi1_matrix(first));
            add("rank_psi1", r_psi == M, "rank " + std::to_string(r_psi) + " of " + std::to_string(M));
            const Index r_t1 = numerical_rank(theta1_matrix(first, probe, 1.0));
            add("rank_theta1", r_t1 == M - 1, "rank " + std::to_string(r_t1) + " of " + std::to_string(M - 1));

            const int tbar2 = ceil_div(d.phase2_unknowns(), q);
            if (d.reduced_antennas() == 0) {
                add("rank_theta2_min", true, "no Phase II unknowns", true);
                add("rank_theta2_short", true, "no Phase II unknowns", true);
                add("allocation", true, "no Phase II unknowns", true);
            } else {
                const auto p2 = phase2_schedule(d, q, tbar2, rng);
                const CMatrix t2 = theta2_matrix(p2, probe, 1.0);
                const Index r_t2 = numerical_rank(t2);
                bool solved = true;
                try {
                    (void)estimate_b_phase2_noisefree(CVector::Zero(t2.rows()), t2);
                } catch (const Error&) {
                    solved = false;
                }
                add("rank_theta2_min", r_t2 == cols2 && solved,
                    "rank " + std::to_string(r_t2) + " of " + std::to_string(cols2) + " at tau2=" + std::to_string(tbar2));

                const std::span<const Instant> shorter(p2.data(), p2.size() - 1);
                const CMatrix t2s = shorter.empty() ? CMatrix(0, cols2) : theta2_matrix(shorter, probe, 1.0);
                bool deficient = false;
                try {
                    (void)estimate_b_phase2_noisefree(CVector::Zero(t2s.rows()), t2s);
                } catch (const Error& e) {
                    deficient = e.code() == ErrorCode::RankDeficientTheta2;
                }
                add("rank_theta2_short", deficient, "tau2=" + std::to_string(tbar2 - 1));

                const Eigen::MatrixXi pi = northwest_corner(tbar2, q, d.M, d.reduced_antennas());
                bool ok = true;
                for (Index j = 0; j < pi.cols(); ++j)
                    ok = ok && pi.col(j).sum() == d.M;
                for (Index i = 0; i < pi.rows(); ++i)
                    ok = ok && pi.row(i).sum() <= q;
                Index last = 0;
                for (Index i = 0; i < pi.rows() && ok; ++i)
                    for (Index j = 0; j < pi.cols(); ++j)
                        if (pi(i, j) != 0) {
                            ok = ok && j >= last;
                            last = j;
                        }
                add("allocation", ok, "column sums M, row sums <= q, staircase support");
            }

            SystemConfig cfg;
            cfg.dims = d;
            cfg.tau1 = 2 * d.M;
            cfg.tau2 = tbar2;
            cfg.pathloss_ur.assign(static_cast<std::size_t>(d.K), 1.0);
            const ChannelSet ch = generate_channel_set(cfg, rng());
            const PilotSchedule s = build_schedule(cfg, rng);
            const RxRecord rx = synthesize_rx(ch, s, cfg, 0);
            const double err = nmse(estimate_two_phase_noisefree(rx, s, 1.0).J_hat, build_cascaded(ch).J);
            add("exact_recovery", err <= 1e-16, "nmse " + format_17(err));
        } catch (const Error& e) {
            add("construction", false, e.what());
        }
    }
    return rep;
}

inline void write_report(std::ostream& os, const VerifyReport& rep)
{
    for (const auto& c : rep.checks)
        os << (c.pass ? (c.vacuous ? "VACUOUS" : "PASS") : "FAIL") << " M=" << c.dims.M << " N=" << c.dims.N
           << " K=" << c.dims.K << " U=" << c.dims.U << ' ' << c.check << (c.detail.empty() ? "" : ": ") << c.detail
           << '\n';
    os << (rep.all_pass() ? "all checks passed" : std::to_string(rep.failures()) + " checks failed") << " ("
       << rep.checks.size() << " total)\n";
}

// ---------------------------------------------------------------------------
// Figures

inline const std::vector<std::string>& figure_names()
{
    static const std::vector<std::string> names{"fig3", "fig4", "fig5", "fig6", "fig7", "fig8"};
    return names;
}

inline std::vector<double> int_range(int first, int last, int step)
{
    std::vector<double> v;
    for (int x = first; x <= last; x += step)
        v.push_back(x);
    return v;
}

/// Desk-scale sweeps with default power, noise and path loss. fig3 expands to one rho sweep
/// per total pilot length.
inline std::vector<ExperimentSpec> figure_specs(const std::string& name, int trials = 200)
{
    auto base = [&](int M, int N, int K, int U, std::uint64_t seed) {
        ExperimentSpec s;
        s.name = name;
        s.base = default_config(Dimensions{N, M, K, U});
        s.trials = trials;
        s.seed = seed;
        s.estimators = {EstimatorKind::ProposedLmmse, EstimatorKind::LsBaseline};
        return s;
    };
    std::vector<ExperimentSpec> out;
    if (name == "fig3") {
        for (int tau : {30, 50, 80, 130}) {
            ExperimentSpec s = base(8, 4, 1, 2, 3003);
            s.name = "fig3/tau=" + std::to_string(tau);
            s.tau = tau;
            s.axis = SweepAxis::Rho;
            s.values = default_rho_grid();
            s.estimators = {EstimatorKind::ProposedLmmse};
            out.push_back(s);
        }
    } else if (name == "fig4") {
        ExperimentSpec s = base(8, 4, 1, 2, 4004);
        s.axis = SweepAxis::TotalTau;
        s.values = int_range(20, 120, 10);
        out.push_back(s);
    } else if (name == "fig5") {
        ExperimentSpec s = base(16, 12, 1, 4, 5005);
        s.axis = SweepAxis::TotalTau;
        s.values = int_range(40, 140, 20);
        out.push_back(s);
    } else if (name == "fig6") {
        ExperimentSpec s = base(4, 8, 1, 4, 6006);
        s.tau = 160;
        s.axis = SweepAxis::M;
        s.values = int_range(4, 16, 2);
        out.push_back(s);
    } else if (name == "fig7") {
        ExperimentSpec s = base(16, 8, 3, 4, 7007);
        s.axis = SweepAxis::TotalTau;
        s.values = int_range(100, 400, 50);
        out.push_back(s);
    } else if (name == "fig8") {
        ExperimentSpec s = base(16, 8, 1, 2, 8008);
        s.tau = 64;
        s.axis = SweepAxis::K;
        s.values = int_range(1, 6, 1);
        out.push_back(s);
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown figure '" + name + "'");
    }
    return out;
}

inline std::vector<ResultRow> reproduce_figure(const std::string& name, int trials = 200, int workers = 0,
                                               bool timing = false)
{
    std::vector<ResultRow> rows;
    for (ExperimentSpec s : figure_specs(name, trials)) {
        s.workers = workers;
        s.timing = timing;
        auto part = run_experiment(s);
        rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return rows;
}

}  // namespace bdris
