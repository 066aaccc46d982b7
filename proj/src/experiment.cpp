#include "aoii_vlsf/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "aoii_vlsf/baseline.hpp"
#include "aoii_vlsf/channel.hpp"
#include "aoii_vlsf/csv_io.hpp"
#include "aoii_vlsf/mdp.hpp"
#include "aoii_vlsf/rng.hpp"
#include "aoii_vlsf/simulator.hpp"
#include "aoii_vlsf/source.hpp"

namespace aoii {

namespace {

constexpr const char* kToolVersion = "0.1.0";

constexpr const char* kHeader =
    "method,snr_db,k,beta,alpha,epsilon,avg_aoii,aoii_ci95,avg_delay,delay_ci95,"
    "fraction_error,runs,horizon,seed,stage_cost_avg,stage_cost_ci95";

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Plot the results.csv written by the aoii_vlsf run command.

Usage: plot_results.py [path/to/results.csv]

Writes aoii_vs_snr.png and delay_vs_snr.png next to the input file, one
panel per (k, beta) combination and one line per method.
"""
import collections
import csv
import pathlib
import sys

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("plot_results.py needs matplotlib")


def load(path):
    rows = []
    with open(path, newline="") as fh:
        data = [line for line in fh if not line.startswith("#")]
    for rec in csv.DictReader(data):
        rows.append(rec)
    return rows


def panels(rows):
    by_panel = collections.defaultdict(lambda: collections.defaultdict(list))
    for rec in rows:
        panel = (int(rec["k"]), int(rec["beta"]))
        by_panel[panel][rec["method"]].append(rec)
    return by_panel


def draw(rows, value_col, err_col, ylabel, out_path):
    by_panel = panels(rows)
    keys = sorted(by_panel)
    fig, axes = plt.subplots(1, len(keys), figsize=(5.0 * len(keys), 4.0),
                             squeeze=False, sharey=False)
    for ax, key in zip(axes[0], keys):
        k, beta = key
        for method, recs in sorted(by_panel[key].items()):
            recs = sorted(recs, key=lambda rec: float(rec["snr_db"]))
            snr = [float(rec["snr_db"]) for rec in recs]
            val = [float(rec[value_col]) for rec in recs]
            err = [float(rec[err_col]) for rec in recs]
            ax.errorbar(snr, val, yerr=err, marker="o", capsize=3, label=method)
        ax.set_title(f"k={k}, beta={beta}")
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel(ylabel)
        ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    print(f"wrote {out_path}")


def main():
    here = pathlib.Path(__file__).resolve().parent
    path = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else here / "results.csv"
    rows = load(path)
    if not rows:
        sys.exit(f"no data rows in {path}")
    out_dir = path.resolve().parent
    draw(rows, "avg_aoii", "aoii_ci95", "average age of incorrect information",
         out_dir / "aoii_vs_snr.png")
    draw(rows, "avg_delay", "delay_ci95", "average delivery delay (slots)",
         out_dir / "delay_vs_snr.png")


if __name__ == "__main__":
    main()
)PY";

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Fingerprint of every setting that influences the numbers in a row. The
/// grid lists, the output directory and the thread count are excluded, so
/// cached rows survive grid extensions and machine changes.
std::string settings_digest(const ExperimentConfig& cfg) {
    std::string text = "alpha=" + csv::format_double(cfg.alpha);
    text += ";epsilon=" + csv::format_double(cfg.epsilon);
    text += ";trials=" + std::to_string(cfg.trials);
    text += ";horizon=" + std::to_string(cfg.horizon);
    text += ";runs=" + std::to_string(cfg.runs);
    text += ";seed=" + std::to_string(cfg.seed);
    text += ";d_max=" + std::to_string(cfg.d_max);
    text += ";tol=" + csv::format_double(cfg.tol);
    text += ";max_iter=" + std::to_string(cfg.max_iter);
    text += ";state_cap=" + std::to_string(cfg.state_cap);
    text += ";fidelity=" + cfg.fidelity;
    return hex16(csv::fnv1a(text));
}

std::string point_key(const std::string& method, double snr_db, int k, int beta) {
    return method + "|" + csv::format_double(snr_db) + "|" + std::to_string(k) + "|" +
           std::to_string(beta);
}

struct CachedMetrics {
    double avg_aoii = 0.0;
    double aoii_ci95 = 0.0;
    double avg_delay = 0.0;
    double delay_ci95 = 0.0;
    double fraction_error = 0.0;
    double stage_cost_avg = 0.0;
    double stage_cost_ci95 = 0.0;
};

/// Metrics of an earlier run keyed by point, empty unless the file's
/// settings digest matches the current configuration.
std::map<std::string, CachedMetrics> load_cache(const std::string& path, const std::string& digest) {
    std::map<std::string, CachedMetrics> cache;
    if (!std::filesystem::exists(path))
        return cache;
    std::string text = csv::read_file(path);
    bool digest_ok = false;
    bool header_ok = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos)
            eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const std::string tag = "# config=";
            if (line.rfind(tag, 0) == 0)
                digest_ok = csv::trim(line.substr(tag.size())) == digest;
            continue;
        }
        if (!header_ok) {
            if (line != kHeader)
                return {};
            header_ok = true;
            continue;
        }
        if (!digest_ok)
            return {};
        std::vector<std::string> fields = csv::split(line, ',');
        if (fields.size() != 16)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed results row");
        try {
            std::string key = point_key(fields[0], csv::parse_double(fields[1]),
                                        static_cast<int>(csv::parse_int(fields[2])),
                                        static_cast<int>(csv::parse_int(fields[3])));
            CachedMetrics m;
            m.avg_aoii = csv::parse_double(fields[6]);
            m.aoii_ci95 = csv::parse_double(fields[7]);
            m.avg_delay = csv::parse_double(fields[8]);
            m.delay_ci95 = csv::parse_double(fields[9]);
            m.fraction_error = csv::parse_double(fields[10]);
            m.stage_cost_avg = csv::parse_double(fields[14]);
            m.stage_cost_ci95 = csv::parse_double(fields[15]);
            cache[key] = m;
        } catch (const std::invalid_argument& err) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + err.what());
        }
    }
    return cache;
}

std::string render_csv(const std::vector<ExperimentRow>& rows, const std::string& digest,
                       std::uint64_t seed) {
    std::string out = "# results v1\n";
    out += "# version=";
    out += kToolVersion;
    out += "\n# config=" + digest + "\n";
    out += "# seed=" + std::to_string(seed) + "\n";
    out += kHeader;
    out += "\n";
    for (const ExperimentRow& r : rows) {
        out += r.method;
        out += ',' + csv::format_double(r.snr_db);
        out += ',' + std::to_string(r.k);
        out += ',' + std::to_string(r.beta);
        out += ',' + csv::format_double(r.alpha);
        out += ',' + csv::format_double(r.epsilon);
        out += ',' + csv::format_double(r.avg_aoii);
        out += ',' + csv::format_double(r.aoii_ci95);
        out += ',' + csv::format_double(r.avg_delay);
        out += ',' + csv::format_double(r.delay_ci95);
        out += ',' + csv::format_double(r.fraction_error);
        out += ',' + std::to_string(r.runs);
        out += ',' + std::to_string(r.horizon);
        out += ',' + std::to_string(r.seed);
        out += ',' + csv::format_double(r.stage_cost_avg);
        out += ',' + csv::format_double(r.stage_cost_ci95);
        out += '\n';
    }
    return out;
}

Fidelity parse_fidelity(const std::string& name) {
    if (name == "ideal-ack")
        return Fidelity::IdealAck;
    if (name == "epsilon-error")
        return Fidelity::EpsilonError;
    throw std::invalid_argument("fidelity must be ideal-ack or epsilon-error, got " + name);
}

void validate_method(const std::string& method) {
    if (method != "aoii-optimal" && method != "delay-optimal" && method != "periodic")
        throw std::invalid_argument(
            "method must be aoii-optimal, delay-optimal or periodic, got " + method);
}

} // namespace

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.k_values.empty())
        throw std::invalid_argument("run_experiment: k list is empty");
    if (cfg.beta_values.empty())
        throw std::invalid_argument("run_experiment: beta list is empty");
    if (cfg.snr_db_values.empty())
        throw std::invalid_argument("run_experiment: snr_db list is empty");
    if (cfg.methods.empty())
        throw std::invalid_argument("run_experiment: method list is empty");
    if (cfg.trials < 1)
        throw std::invalid_argument("run_experiment: trials must be >= 1");
    for (const std::string& method : cfg.methods)
        validate_method(method);
    Fidelity fidelity = parse_fidelity(cfg.fidelity);

    auto log = [&cfg](const std::string& line) {
        if (cfg.log)
            cfg.log(line);
    };

    std::filesystem::create_directories(cfg.out_dir);
    std::string results_path = (std::filesystem::path(cfg.out_dir) / "results.csv").string();
    std::string digest = settings_digest(cfg);
    std::map<std::string, CachedMetrics> cache = load_cache(results_path, digest);
    if (!cache.empty())
        log("reusing " + std::to_string(cache.size()) + " rows from " + results_path);

    std::vector<ExperimentRow> rows;
    for (int k : cfg.k_values) {
        SourceModel source(k, cfg.alpha);
        for (double snr_db : cfg.snr_db_values) {
            std::optional<DecodePmf> pmf;
            auto ensure_pmf = [&]() -> const DecodePmf& {
                if (!pmf) {
                    log("estimating length distribution for k=" + std::to_string(k) +
                        " snr_db=" + csv::format_double(snr_db));
                    EstimateConfig ec;
                    ec.k = k;
                    ec.epsilon = cfg.epsilon;
                    ec.snr_db = snr_db;
                    ec.trials = cfg.trials;
                    ec.seed = substream_seed(
                        cfg.seed, csv::fnv1a("pmf|" + std::to_string(k) + "|" +
                                             csv::format_double(snr_db)));
                    ec.threads = cfg.threads;
                    pmf = estimate_pmf(ec);
                }
                return *pmf;
            };
            for (int beta : cfg.beta_values) {
                MdpBuildConfig build_cfg;
                build_cfg.beta = beta;
                build_cfg.d_max = cfg.d_max;
                build_cfg.state_cap = cfg.state_cap;
                std::optional<MdpModel> aoii_model;
                std::optional<MdpModel> delay_model;
                auto ensure_aoii_model = [&]() -> const MdpModel& {
                    if (!aoii_model)
                        aoii_model = build_aoii_mdp(source, ensure_pmf(), build_cfg);
                    return *aoii_model;
                };
                auto ensure_delay_model = [&]() -> const MdpModel& {
                    if (!delay_model)
                        delay_model = build_delay_mdp(ensure_pmf(), build_cfg);
                    return *delay_model;
                };
                for (const std::string& method : cfg.methods) {
                    std::string key = point_key(method, snr_db, k, beta);
                    ExperimentRow row;
                    row.method = method;
                    row.snr_db = snr_db;
                    row.k = k;
                    row.beta = beta;
                    row.alpha = cfg.alpha;
                    row.epsilon = cfg.epsilon;
                    row.runs = cfg.runs;
                    row.horizon = cfg.horizon;
                    row.seed = cfg.seed;
                    if (auto hit = cache.find(key); hit != cache.end()) {
                        const CachedMetrics& m = hit->second;
                        row.avg_aoii = m.avg_aoii;
                        row.aoii_ci95 = m.aoii_ci95;
                        row.avg_delay = m.avg_delay;
                        row.delay_ci95 = m.delay_ci95;
                        row.fraction_error = m.fraction_error;
                        row.stage_cost_avg = m.stage_cost_avg;
                        row.stage_cost_ci95 = m.stage_cost_ci95;
                        row.from_cache = true;
                        rows.push_back(row);
                        log("cached " + key);
                        continue;
                    }
                    SolveOptions solve_opts;
                    solve_opts.tol = cfg.tol;
                    solve_opts.max_iter = cfg.max_iter;
                    SimConfig sim_cfg;
                    sim_cfg.horizon = cfg.horizon;
                    sim_cfg.runs = cfg.runs;
                    sim_cfg.seed = substream_seed(cfg.seed, csv::fnv1a("sim|" + key));
                    sim_cfg.fidelity = fidelity;
                    sim_cfg.epsilon = cfg.epsilon;
                    sim_cfg.threads = cfg.threads;
                    log("solving " + key);
                    SimReport report;
                    if (method == "aoii-optimal") {
                        const MdpModel& model = ensure_aoii_model();
                        SolveResult sol = rvi_solve(model, solve_opts);
                        report = simulate(source, ensure_pmf(), model, sol.policy, sim_cfg);
                    } else if (method == "delay-optimal") {
                        const MdpModel& model = ensure_delay_model();
                        SolveResult sol = rvi_solve(model, solve_opts);
                        report = simulate(source, ensure_pmf(), model, sol.policy, sim_cfg);
                    } else {
                        const MdpModel& model = ensure_aoii_model();
                        PeriodicBaseline best = best_periodic(ensure_pmf(), beta);
                        std::vector<std::uint8_t> policy = sequence_policy(model, best.sequence);
                        report = simulate(source, ensure_pmf(), model, policy, sim_cfg);
                    }
                    row.avg_aoii = report.avg_aoii;
                    row.aoii_ci95 = report.aoii_ci95;
                    row.avg_delay = report.avg_delay;
                    row.delay_ci95 = report.delay_ci95;
                    row.fraction_error = report.fraction_error;
                    row.stage_cost_avg = report.stage_cost_avg;
                    row.stage_cost_ci95 = report.stage_cost_ci95;
                    rows.push_back(row);
                    log("done " + key + " avg_aoii=" + csv::format_double(row.avg_aoii) +
                        " avg_delay=" + csv::format_double(row.avg_delay));
                    csv::write_file(results_path, render_csv(rows, digest, cfg.seed));
                }
            }
        }
    }

    csv::write_file(results_path, render_csv(rows, digest, cfg.seed));
    std::string plot_path = (std::filesystem::path(cfg.out_dir) / "plot_results.py").string();
    csv::write_file(plot_path, kPlotScript);
    return rows;
}

} // namespace aoii
