// SPDX-License-Identifier: Apache-2.0
//
// bdris: command-line front end for the BD-RIS two-phase channel-estimation simulator.
//   bdris run <spec.yaml> [--out FILE] [--timing]
//   bdris verify [--grid FILE]
//   bdris figure <name> [--trials N] [--out FILE] [--summary FILE] [--timing]
//   bdris min-overhead --m M --n N --k K --u U
//   bdris dump channel|schedule --m M --n N --k K --u U [--seed S] [--tau T]
// Exit codes: 0 success, 1 usage error, 2 verification failure.

#include "bdris/harness.hpp"
#include "bdris/io.hpp"
#include "bdris/spec_file.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;

void emit(const std::string& path, const auto& write)
{
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw bdris::Error(bdris::ErrorCode::InvalidConfig, "cannot open '" + path + "' for writing");
    write(os);
}

}  // namespace

int main(int argc, char** argv)
{
    using namespace bdris;
    CLI::App app{"BD-RIS two-phase channel estimation simulator"};
    app.require_subcommand(1);

    std::string spec_path;
    std::string out_path;
    std::string summary_path;
    bool timing = false;
    auto* run = app.add_subcommand("run", "Run an experiment spec and write CSV rows");
    run->add_option("spec", spec_path, "YAML experiment spec")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_path, "Output CSV (default stdout)");
    run->add_flag("--timing", timing, "Record per-estimator wall time in the ms column");

    std::string grid_path;
    auto* verify = app.add_subcommand("verify", "Check the rank conditions on a grid of dimensions");
    verify->add_option("--grid", grid_path, "YAML grid (lists M, N, K, U)")->check(CLI::ExistingFile);

    std::string figure;
    int trials = 200;
    auto* fig = app.add_subcommand("figure", "Reproduce one of the desk-scale figure sweeps");
    fig->add_option("name", figure, "fig3 .. fig8")->required()->check(CLI::IsMember(figure_names()));
    fig->add_option("--trials", trials, "Trials per point")->check(CLI::PositiveNumber);
    fig->add_option("--out", out_path, "Output CSV (default stdout)");
    fig->add_option("--summary", summary_path, "Per-point mean and bootstrap interval CSV");
    fig->add_flag("--timing", timing, "Record per-estimator wall time in the ms column");

    int m = 0, n = 0, k = 0, u = 0;
    auto* mo = app.add_subcommand("min-overhead", "Minimum pilot overhead for given dimensions");
    auto add_dims = [&](CLI::App* sub) {
        sub->add_option("--m", m, "RIS elements")->required()->check(CLI::PositiveNumber);
        sub->add_option("--n", n, "BS antennas")->required()->check(CLI::PositiveNumber);
        sub->add_option("--k", k, "Users")->required()->check(CLI::PositiveNumber);
        sub->add_option("--u", u, "Antennas per user")->required()->check(CLI::PositiveNumber);
    };
    add_dims(mo);

    std::string what;
    std::uint64_t seed = 1;
    int tau = 0;
    auto* dump = app.add_subcommand("dump", "Write a channel or schedule text dump");
    dump->add_option("what", what, "channel or schedule")->required()->check(CLI::IsMember({"channel", "schedule"}));
    add_dims(dump);
    dump->add_option("--seed", seed, "Seed");
    dump->add_option("--tau", tau, "Total pilot length (default minimum)");
    dump->add_option("--out", out_path, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*run) {
            ExperimentSpec spec = load_experiment_spec(spec_path);
            spec.timing = spec.timing || timing;
            const auto rows = run_experiment(spec);
            emit(out_path, [&](std::ostream& os) { write_csv(os, rows); });
        } else if (*verify) {
            const auto grid = grid_path.empty() ? default_verify_grid() : load_verify_grid(grid_path);
            const VerifyReport rep = verify_theorems(grid);
            write_report(std::cout, rep);
            return rep.all_pass() ? 0 : kExitVerify;
        } else if (*fig) {
            const auto rows = reproduce_figure(figure, trials, 0, timing);
            emit(out_path, [&](std::ostream& os) { write_csv(os, rows); });
            const auto summary = summarize(rows);
            if (!summary_path.empty())
                emit(summary_path, [&](std::ostream& os) { write_summary(os, summary); });
            else
                write_summary(std::cerr, summary);
        } else if (*mo) {
            const Overhead o = min_overhead(m, n, k, u);
            std::cout << "q=" << o.q << " tau1=" << o.tau1 << " tau2=" << o.tau2 << " tau=" << o.tau << '\n';
        } else if (*dump) {
            SystemConfig cfg = default_config(Dimensions{n, m, k, u});
            if (tau > 0)
                std::tie(cfg.tau1, cfg.tau2) = split_pilots(cfg.dims, tau, 0.0);
            if (what == "channel") {
                const ChannelSet ch = generate_channel_set(cfg, seed);
                emit(out_path, [&](std::ostream& os) { write_channel_dump(os, ch); });
            } else {
                Rng rng(seed);
                const PilotSchedule s = build_schedule(cfg, rng);
                emit(out_path, [&](std::ostream& os) { write_schedule(os, s); });
            }
        }
    } catch (const Error& e) {
        std::cerr << "bdris: " << e.what() << '\n';
        return kExitUsage;
    }
    return 0;
}
