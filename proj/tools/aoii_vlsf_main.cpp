#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aoii_vlsf/aoii_dynamics.hpp"
#include "aoii_vlsf/channel.hpp"
#include "aoii_vlsf/csv_io.hpp"
#include "aoii_vlsf/experiment.hpp"
#include "aoii_vlsf/mdp.hpp"
#include "aoii_vlsf/source.hpp"

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

struct PmfArgs {
    int k = 1;
    double epsilon = 1e-3;
    double snr_db = 0.0;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 1;
    int threads = 0;
    std::uint64_t max_symbols = 1000000;
    std::string out;
};

int do_pmf(const PmfArgs& args) {
    aoii::EstimateConfig cfg;
    cfg.k = args.k;
    cfg.epsilon = args.epsilon;
    cfg.snr_db = args.snr_db;
    cfg.trials = args.trials;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    cfg.max_symbols = args.max_symbols;
    aoii::DecodePmf pmf = aoii::estimate_pmf(cfg);
    double mean = 0.0;
    for (int m = 1; m <= pmf.max_len(); ++m)
        mean += m * pmf.prob(m);
    std::printf("decode threshold %s bits\n", fmt(aoii::decode_threshold(args.k, args.epsilon)).c_str());
    std::printf("max decode length %d\n", pmf.max_len());
    std::printf("mean decode length %s\n", fmt(mean).c_str());
    aoii::save_pmf(pmf, args.out);
    std::printf("wrote %s\n", args.out.c_str());
    return 0;
}

struct SolveArgs {
    std::string pmf_path;
    std::string objective = "aoii";
    double alpha = 0.0;
    bool alpha_set = false;
    int k = 0;
    bool k_set = false;
    int beta = 0;
    int d_max = -1;
    double tol = 1e-9;
    std::uint64_t max_iter = 100000;
    std::uint64_t state_cap = 60000000;
    std::string out_seq;
    std::string out_policy;
};

void write_sequence(const std::string& path, const aoii::FeedbackSequence& seq) {
    std::string text = "nu\n";
    for (int nu : seq)
        text += std::to_string(nu) + "\n";
    aoii::csv::write_file(path, text);
}

void write_policy(const std::string& path, const aoii::MdpModel& model,
                  const aoii::SolveResult& sol) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out << "d,b,l,action,value\n";
    model.for_each_state([&](std::size_t i, int d, int b, int l) {
        out << d << ',' << b << ',' << l << ',' << int(sol.policy[i]) << ','
            << aoii::csv::format_double(sol.value[i]) << '\n';
    });
    if (!out.flush())
        throw std::runtime_error("failed to write " + path);
}

int do_solve(const SolveArgs& args) {
    aoii::DecodePmf pmf = aoii::load_pmf(args.pmf_path);
    aoii::MdpBuildConfig build_cfg;
    build_cfg.beta = args.beta;
    build_cfg.d_max = args.d_max;
    build_cfg.state_cap = args.state_cap;

    double constant = 0.0;
    std::unique_ptr<aoii::MdpModel> model;
    if (args.objective == "aoii") {
        int k = args.k_set ? args.k : pmf.meta().k;
        if (k < 1)
            throw std::invalid_argument(
                "solve: --k is required when the distribution file carries no k");
        if (!args.alpha_set)
            throw std::invalid_argument("solve: --alpha is required for the aoii objective");
        aoii::SourceModel source(k, args.alpha);
        constant = aoii::feedback_penalty(source, args.beta);
        model = std::make_unique<aoii::MdpModel>(aoii::build_aoii_mdp(source, pmf, build_cfg));
    } else {
        model = std::make_unique<aoii::MdpModel>(aoii::build_delay_mdp(pmf, build_cfg));
    }

    aoii::SolveOptions opts;
    opts.tol = args.tol;
    opts.max_iter = args.max_iter;
    aoii::SolveResult sol = aoii::rvi_solve(*model, opts);

    std::printf("states %zu\n", model->state_count());
    std::printf("iterations %llu\n", static_cast<unsigned long long>(sol.iterations));
    std::printf("average cost %s\n", fmt(sol.average_cost).c_str());
    std::printf("feedback constant %s\n", fmt(constant).c_str());
    std::printf("average cost without feedback constant %s\n",
                fmt(sol.average_cost - constant).c_str());

    if (!args.out_seq.empty()) {
        aoii::FeedbackSequence seq = aoii::extract_feedback_sequence(*model, sol.policy);
        write_sequence(args.out_seq, seq);
        std::printf("wrote %s\n", args.out_seq.c_str());
    }
    if (!args.out_policy.empty()) {
        write_policy(args.out_policy, *model, sol);
        std::printf("wrote %s\n", args.out_policy.c_str());
    }
    return 0;
}

struct RunArgs {
    std::string config_path;
    std::string out_dir;
    bool out_dir_set = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool threads_set = false;
    std::int64_t horizon = 0;
    bool horizon_set = false;
    int runs = 0;
    bool runs_set = false;
    std::uint64_t trials = 0;
    bool trials_set = false;
};

template <typename T>
std::vector<T> as_list(const nlohmann::json& value) {
    if (value.is_array())
        return value.get<std::vector<T>>();
    return {value.get<T>()};
}

aoii::ExperimentConfig parse_run_config(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text);
    if (!doc.is_object())
        throw std::invalid_argument("config: the top level must be an object");
    static const std::vector<std::string> known = {
        "alpha",   "k",       "epsilon", "beta",    "snr_db",    "methods",
        "trials",  "horizon", "runs",    "seed",    "d_max",     "out_dir",
        "tol",     "max_iter", "state_cap", "fidelity", "threads"};
    for (const auto& item : doc.items()) {
        bool ok = false;
        for (const std::string& key : known)
            ok = ok || key == item.key();
        if (!ok)
            throw std::invalid_argument("config: unknown key \"" + item.key() + "\"");
    }
    aoii::ExperimentConfig cfg;
    cfg.alpha = doc.at("alpha").get<double>();
    cfg.k_values = as_list<int>(doc.at("k"));
    cfg.epsilon = doc.at("epsilon").get<double>();
    cfg.beta_values = as_list<int>(doc.at("beta"));
    cfg.snr_db_values = as_list<double>(doc.at("snr_db"));
    cfg.methods = doc.at("methods").get<std::vector<std::string>>();
    cfg.trials = doc.at("trials").get<std::uint64_t>();
    cfg.horizon = doc.at("horizon").get<std::int64_t>();
    cfg.runs = doc.at("runs").get<int>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    cfg.d_max = doc.at("d_max").get<int>();
    cfg.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("tol"))
        cfg.tol = doc.at("tol").get<double>();
    if (doc.contains("max_iter"))
        cfg.max_iter = doc.at("max_iter").get<std::uint64_t>();
    if (doc.contains("state_cap"))
        cfg.state_cap = doc.at("state_cap").get<std::size_t>();
    if (doc.contains("fidelity"))
        cfg.fidelity = doc.at("fidelity").get<std::string>();
    if (doc.contains("threads"))
        cfg.threads = doc.at("threads").get<int>();
    return cfg;
}

int do_run(const RunArgs& args) {
    std::string text = aoii::csv::read_file(args.config_path);
    aoii::ExperimentConfig cfg;
    try {
        cfg = parse_run_config(text);
    } catch (const nlohmann::json::exception& err) {
        throw std::invalid_argument(std::string("config: ") + err.what());
    }
    if (args.out_dir_set)
        cfg.out_dir = args.out_dir;
    if (args.seed_set)
        cfg.seed = args.seed;
    if (args.threads_set)
        cfg.threads = args.threads;
    if (args.horizon_set)
        cfg.horizon = args.horizon;
    if (args.runs_set)
        cfg.runs = args.runs;
    if (args.trials_set)
        cfg.trials = args.trials;
    cfg.log = [](const std::string& line) {
        std::fprintf(stderr, "%s\n", line.c_str());
    };
    std::vector<aoii::ExperimentRow> rows = aoii::run_experiment(cfg);
    std::printf("wrote %s/results.csv (%zu rows)\n", cfg.out_dir.c_str(), rows.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feedback sequence optimization for short packet links: estimate decode\n"
                 "length distributions, solve the freshness and delay decision processes,\n"
                 "and compare scheduling methods in simulation."};
    app.require_subcommand(1);

    PmfArgs pmf_args;
    CLI::App* pmf_cmd = app.add_subcommand(
        "pmf", "Estimate the decode length distribution and write it as CSV");
    pmf_cmd->add_option("--k", pmf_args.k, "payload bits per packet")->capture_default_str();
    pmf_cmd->add_option("--epsilon", pmf_args.epsilon, "decode error tolerance")
        ->capture_default_str();
    pmf_cmd->add_option("--snr-db", pmf_args.snr_db, "channel SNR in dB")->capture_default_str();
    pmf_cmd->add_option("--trials", pmf_args.trials, "Monte Carlo trials")->capture_default_str();
    pmf_cmd->add_option("--seed", pmf_args.seed, "random seed")->capture_default_str();
    pmf_cmd->add_option("--threads", pmf_args.threads, "worker threads, 0 = all")
        ->capture_default_str();
    pmf_cmd->add_option("--max-symbols", pmf_args.max_symbols,
                        "abort threshold per trial")->capture_default_str();
    pmf_cmd->add_option("--out", pmf_args.out, "output CSV path")->required();

    SolveArgs solve_args;
    CLI::App* solve_cmd = app.add_subcommand(
        "solve", "Solve a decision process for the optimal feedback schedule");
    solve_cmd->add_option("--pmf", solve_args.pmf_path, "decode length distribution CSV")
        ->required();
    solve_cmd->add_option("--objective", solve_args.objective, "aoii or delay")
        ->check(CLI::IsMember({"aoii", "delay"}))
        ->capture_default_str();
    CLI::Option* alpha_opt =
        solve_cmd->add_option("--alpha", solve_args.alpha, "source self transition probability");
    CLI::Option* k_opt = solve_cmd->add_option(
        "--k", solve_args.k, "payload bits, defaults to the value stored in the CSV");
    solve_cmd->add_option("--beta", solve_args.beta, "feedback delay in slots")
        ->capture_default_str();
    solve_cmd->add_option("--d-max", solve_args.d_max,
                          "counter cap, -1 selects 4 * (max length + beta)")
        ->capture_default_str();
    solve_cmd->add_option("--tol", solve_args.tol, "span tolerance")->capture_default_str();
    solve_cmd->add_option("--max-iter", solve_args.max_iter, "iteration budget")
        ->capture_default_str();
    solve_cmd->add_option("--state-cap", solve_args.state_cap, "largest allowed state count")
        ->capture_default_str();
    solve_cmd->add_option("--out-seq", solve_args.out_seq,
                          "write the optimal feedback sequence to this CSV");
    solve_cmd->add_option("--out-policy", solve_args.out_policy,
                          "write the full policy table to this CSV");

    RunArgs run_args;
    CLI::App* run_cmd = app.add_subcommand(
        "run", "Run a comparison grid from a JSON config and write results.csv");
    run_cmd->add_option("--config", run_args.config_path, "JSON config path")->required();
    CLI::Option* out_dir_opt = run_cmd->add_option("--out-dir", run_args.out_dir,
                                                   "override the config's out_dir");
    CLI::Option* seed_opt = run_cmd->add_option("--seed", run_args.seed,
                                                "override the config's seed");
    CLI::Option* threads_opt = run_cmd->add_option("--threads", run_args.threads,
                                                   "override the config's threads");
    CLI::Option* horizon_opt = run_cmd->add_option("--horizon", run_args.horizon,
                                                   "override the config's horizon");
    CLI::Option* runs_opt = run_cmd->add_option("--runs", run_args.runs,
                                                "override the config's runs");
    CLI::Option* trials_opt = run_cmd->add_option("--trials", run_args.trials,
                                                  "override the config's trials");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    solve_args.alpha_set = alpha_opt->count() > 0;
    solve_args.k_set = k_opt->count() > 0;
    run_args.out_dir_set = out_dir_opt->count() > 0;
    run_args.seed_set = seed_opt->count() > 0;
    run_args.threads_set = threads_opt->count() > 0;
    run_args.horizon_set = horizon_opt->count() > 0;
    run_args.runs_set = runs_opt->count() > 0;
    run_args.trials_set = trials_opt->count() > 0;

    try {
        if (pmf_cmd->parsed())
            return do_pmf(pmf_args);
        if (solve_cmd->parsed())
            return do_solve(solve_args);
        if (run_cmd->parsed())
            return do_run(run_args);
        std::fprintf(stderr, "error: no subcommand selected\n");
        return 2;
    } catch (const aoii::ConvergenceError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 3;
    } catch (const std::invalid_argument& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 2;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 4;
    }
}
