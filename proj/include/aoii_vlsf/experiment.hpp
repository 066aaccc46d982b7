#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace aoii {

/// Grid of comparison points for one experiment. Every combination of
/// snr_db, k and beta is solved and simulated once per method. Methods are
/// named "aoii-optimal", "delay-optimal" and "periodic". fidelity is
/// "ideal-ack" or "epsilon-error"; the latter delivers a wrong value with
/// probability epsilon on each decode.
struct ExperimentConfig {
    double alpha = 0.995;
    double epsilon = 1e-3;
    std::vector<int> k_values;
    std::vector<int> beta_values;
    std::vector<double> snr_db_values;
    std::vector<std::string> methods;
    std::uint64_t trials = 100000;  // channel trials for the length distribution
    std::int64_t horizon = 10000;   // slots per simulation run
    int runs = 50;                  // simulation runs per point
    std::uint64_t seed = 1;
    int d_max = -1;                 // counter cap, -1 selects 4 * (max_len + beta)
    double tol = 1e-8;
    std::uint64_t max_iter = 100000;
    std::size_t state_cap = 60000000;
    std::string fidelity = "ideal-ack";
    int threads = 0;
    std::string out_dir = ".";
    std::function<void(const std::string&)> log; // optional progress sink
};

/// One line of results.csv.
struct ExperimentRow {
    std::string method;
    double snr_db = 0.0;
    int k = 0;
    int beta = 0;
    double alpha = 0.0;
    double epsilon = 0.0;
    double avg_aoii = 0.0;
    double aoii_ci95 = 0.0;
    double avg_delay = 0.0;
    double delay_ci95 = 0.0;
    double fraction_error = 0.0;
    int runs = 0;
    std::int64_t horizon = 0;
    std::uint64_t seed = 0;
    double stage_cost_avg = 0.0;
    double stage_cost_ci95 = 0.0;
    bool from_cache = false; // reused from an earlier results.csv, not in the file
};

/// Run the grid and write out_dir/results.csv and out_dir/plot_results.py.
/// Rows found in an existing results.csv are reused instead of recomputed
/// when the file's settings hash matches the current configuration, so an
/// interrupted run picks up where it stopped and extending the grid keeps
/// finished points. The returned rows are in file order. Throws
/// std::invalid_argument on bad settings, std::runtime_error on I/O
/// failures and ConvergenceError when a solve does not converge.
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg);

} // namespace aoii
