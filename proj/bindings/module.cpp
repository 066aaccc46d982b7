#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "aoii_vlsf/aoii_dynamics.hpp"
#include "aoii_vlsf/baseline.hpp"
#include "aoii_vlsf/channel.hpp"
#include "aoii_vlsf/experiment.hpp"
#include "aoii_vlsf/mdp.hpp"
#include "aoii_vlsf/simulator.hpp"
#include "aoii_vlsf/source.hpp"

namespace py = pybind11;
using namespace aoii;

namespace {

std::vector<std::uint8_t> policy_from_bytes(const py::bytes& raw) {
    std::string buffer = raw;
    return std::vector<std::uint8_t>(buffer.begin(), buffer.end());
}

py::bytes policy_to_bytes(const std::vector<std::uint8_t>& policy) {
    return py::bytes(reinterpret_cast<const char*>(policy.data()), policy.size());
}

Fidelity parse_fidelity(const std::string& name) {
    if (name == "ideal-ack")
        return Fidelity::IdealAck;
    if (name == "epsilon-error")
        return Fidelity::EpsilonError;
    throw std::invalid_argument("fidelity must be ideal-ack or epsilon-error, got " + name);
}

DecodeDraw parse_decode_draw(const std::string& name) {
    if (name == "conditional")
        return DecodeDraw::ConditionalBernoulli;
    if (name == "presampled")
        return DecodeDraw::PresampledLength;
    throw std::invalid_argument("decode_draw must be conditional or presampled, got " + name);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Feedback sequence optimization for stop feedback codes over "
              "Markov sources";

    py::class_<SourceModel>(m, "SourceModel",
                            "Symmetric Markov source over 2^k states; keeps its value "
                            "with probability alpha each slot.")
        .def(py::init<int, double>(), py::arg("k"), py::arg("alpha"))
        .def_property_readonly("k", &SourceModel::bits)
        .def_property_readonly("alpha", &SourceModel::alpha)
        .def_property_readonly("cross_prob", &SourceModel::cross_prob)
        .def("p_same", &SourceModel::p_same, py::arg("t"),
             "Probability the source holds the same value t slots apart.")
        .def("__repr__", [](const SourceModel& s) {
            return "SourceModel(k=" + std::to_string(s.bits()) +
                   ", alpha=" + std::to_string(s.alpha()) + ")";
        });

    m.def("feedback_penalty", &feedback_penalty, py::arg("source"), py::arg("beta"),
          "Expected age accumulated during one feedback flight after a "
          "synchronizing delivery.");

    py::class_<PmfMeta>(m, "PmfMeta")
        .def_readonly("k", &PmfMeta::k)
        .def_readonly("epsilon", &PmfMeta::epsilon)
        .def_readonly("snr_db", &PmfMeta::snr_db)
        .def_readonly("trials", &PmfMeta::trials)
        .def_readonly("seed", &PmfMeta::seed);

    py::class_<DecodePmf>(m, "DecodePmf",
                          "Distribution of the number of channel symbols needed to "
                          "decode one packet.")
        .def(py::init<const std::vector<double>&>(), py::arg("probs"),
             "probs[i] is the probability of decoding after exactly i + 1 symbols.")
        .def_property_readonly("max_len", &DecodePmf::max_len)
        .def_property_readonly("meta", &DecodePmf::meta)
        .def("prob", &DecodePmf::prob, py::arg("m"))
        .def("cdf", &DecodePmf::cdf, py::arg("b"))
        .def("tail", &DecodePmf::tail, py::arg("b"))
        .def("mean", &DecodePmf::mean)
        .def("conditional_success", &DecodePmf::conditional_success, py::arg("b"),
             py::arg("l"),
             "P(decode by symbol b | not decoded l symbols earlier).")
        .def_property_readonly("probs",
                               [](const DecodePmf& pmf) {
                                   std::vector<double> out;
                                   for (int i = 1; i <= pmf.max_len(); ++i)
                                       out.push_back(pmf.prob(i));
                                   return out;
                               })
        .def("__repr__", [](const DecodePmf& pmf) {
            return "DecodePmf(max_len=" + std::to_string(pmf.max_len()) + ")";
        });

    m.def("snr_linear", &snr_linear, py::arg("snr_db"));
    m.def("channel_capacity", &channel_capacity, py::arg("snr_db"));
    m.def("decode_threshold", &decode_threshold, py::arg("k"), py::arg("epsilon"));

    m.def(
        "estimate_pmf",
        [](int k, double epsilon, double snr_db, std::uint64_t trials, std::uint64_t seed,
           int threads, std::uint64_t max_symbols) {
            EstimateConfig cfg;
            cfg.k = k;
            cfg.epsilon = epsilon;
            cfg.snr_db = snr_db;
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.threads = threads;
            cfg.max_symbols = max_symbols;
            py::gil_scoped_release release;
            return estimate_pmf(cfg);
        },
        py::arg("k"), py::arg("epsilon"), py::arg("snr_db"), py::arg("trials") = 100000,
        py::arg("seed") = 1, py::arg("threads") = 0, py::arg("max_symbols") = 1000000,
        "Estimate the decode length distribution by Monte Carlo.");

    m.def("save_pmf", &save_pmf, py::arg("pmf"), py::arg("path"));
    m.def("load_pmf", &load_pmf, py::arg("path"));

    m.def("packet_success", &packet_success, py::arg("pmf"), py::arg("sequence"),
          "Probability the packet completes in each round of the sequence.");
    m.def("expected_delay", &expected_delay, py::arg("pmf"), py::arg("sequence"),
          py::arg("beta"), "Expected per packet delivery delay of a feedback sequence.");

    py::class_<PeriodicBaseline>(m, "PeriodicBaseline")
        .def_readonly("nu", &PeriodicBaseline::nu)
        .def_readonly("expected_delay", &PeriodicBaseline::expected_delay)
        .def_readonly("sequence", &PeriodicBaseline::sequence)
        .def("__repr__", [](const PeriodicBaseline& b) {
            return "PeriodicBaseline(nu=" + std::to_string(b.nu) + ")";
        });

    m.def("best_periodic", &best_periodic, py::arg("pmf"), py::arg("beta"),
          "Fixed round length minimizing the expected per packet delay.");

    py::class_<MdpModel>(m, "MdpModel",
                         "Average cost decision process over states (d, b, l).")
        .def_property_readonly("max_len", &MdpModel::max_len)
        .def_property_readonly("beta", &MdpModel::beta)
        .def_property_readonly("age_cap", &MdpModel::age_cap)
        .def_property_readonly("delay_objective", &MdpModel::delay_objective)
        .def_property_readonly("cost_offset", &MdpModel::cost_offset)
        .def_property_readonly("state_count", &MdpModel::state_count)
        .def("stage_cost", &MdpModel::stage_cost, py::arg("d"))
        .def("forced_action", &MdpModel::forced_action, py::arg("b"), py::arg("l"))
        .def("success_prob", &MdpModel::success_prob, py::arg("b"), py::arg("l"))
        .def("index", &MdpModel::index, py::arg("d"), py::arg("b"), py::arg("l"))
        .def("__repr__", [](const MdpModel& model) {
            return std::string("MdpModel(") +
                   (model.delay_objective() ? "delay" : "aoii") +
                   ", states=" + std::to_string(model.state_count()) + ")";
        });

    m.def(
        "build_aoii_mdp",
        [](const SourceModel& source, const DecodePmf& pmf, int beta, int d_max,
           std::size_t state_cap) {
            return build_aoii_mdp(source, pmf, MdpBuildConfig{beta, d_max, state_cap});
        },
        py::arg("source"), py::arg("pmf"), py::arg("beta"), py::arg("d_max") = -1,
        py::arg("state_cap") = 10000000,
        "Freshness objective process; the stage cost includes the feedback "
        "flight constant.");
    m.def(
        "build_delay_mdp",
        [](const DecodePmf& pmf, int beta, int d_max, std::size_t state_cap) {
            return build_delay_mdp(pmf, MdpBuildConfig{beta, d_max, state_cap});
        },
        py::arg("pmf"), py::arg("beta"), py::arg("d_max") = -1,
        py::arg("state_cap") = 10000000, "Delivery delay objective process.");

    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    py::class_<SolveResult>(m, "SolveResult")
        .def_readonly("average_cost", &SolveResult::average_cost)
        .def_readonly("span", &SolveResult::span)
        .def_readonly("iterations", &SolveResult::iterations)
        .def_readonly("improvements", &SolveResult::improvements)
        .def_property_readonly("policy",
                               [](const SolveResult& r) { return policy_to_bytes(r.policy); },
                               "One action byte per state index.")
        .def("__repr__", [](const SolveResult& r) {
            return "SolveResult(average_cost=" + std::to_string(r.average_cost) + ")";
        });

    m.def(
        "rvi_solve",
        [](const MdpModel& model, double tol, std::uint64_t max_iter, double damping,
           int warm_start) {
            SolveOptions opts;
            opts.tol = tol;
            opts.max_iter = max_iter;
            opts.damping = damping;
            opts.warm_start = warm_start;
            py::gil_scoped_release release;
            return rvi_solve(model, opts);
        },
        py::arg("model"), py::arg("tol") = 1e-9, py::arg("max_iter") = 100000,
        py::arg("damping") = 0.95, py::arg("warm_start") = -1,
        "Minimum average cost policy by relative value iteration.");

    m.def(
        "policy_average_cost",
        [](const MdpModel& model, const py::bytes& policy) {
            std::vector<std::uint8_t> p = policy_from_bytes(policy);
            py::gil_scoped_release release;
            return policy_average_cost(model, p);
        },
        py::arg("model"), py::arg("policy"),
        "Exact average cost per stage of a fixed policy.");

    m.def(
        "extract_feedback_sequence",
        [](const MdpModel& model, const py::bytes& policy) {
            return extract_feedback_sequence(model, policy_from_bytes(policy));
        },
        py::arg("model"), py::arg("policy"),
        "Round lengths the policy uses when every feedback request fails.");

    m.def(
        "sequence_policy",
        [](const MdpModel& model, const FeedbackSequence& sequence) {
            return policy_to_bytes(sequence_policy(model, sequence));
        },
        py::arg("model"), py::arg("sequence"),
        "Policy that requests feedback at the sequence's round boundaries.");

    py::class_<SimReport>(m, "SimReport")
        .def_readonly("avg_aoii", &SimReport::avg_aoii)
        .def_readonly("aoii_ci95", &SimReport::aoii_ci95)
        .def_readonly("avg_delay", &SimReport::avg_delay)
        .def_readonly("delay_ci95", &SimReport::delay_ci95)
        .def_readonly("fraction_error", &SimReport::fraction_error)
        .def_readonly("stage_cost_avg", &SimReport::stage_cost_avg)
        .def_readonly("stage_cost_ci95", &SimReport::stage_cost_ci95)
        .def_readonly("runs_used", &SimReport::runs_used)
        .def("__repr__", [](const SimReport& r) {
            return "SimReport(avg_aoii=" + std::to_string(r.avg_aoii) +
                   ", avg_delay=" + std::to_string(r.avg_delay) + ")";
        });

    m.def(
        "simulate",
        [](const SourceModel& source, const DecodePmf& pmf, const MdpModel& model,
           const py::bytes& policy, std::int64_t horizon, int runs, std::uint64_t seed,
           const std::string& fidelity, const std::string& decode_draw, double epsilon,
           int threads, bool start_mismatched) {
            SimConfig cfg;
            cfg.horizon = horizon;
            cfg.runs = runs;
            cfg.seed = seed;
            cfg.fidelity = parse_fidelity(fidelity);
            cfg.decode_draw = parse_decode_draw(decode_draw);
            cfg.epsilon = epsilon;
            cfg.threads = threads;
            cfg.start_mismatched = start_mismatched;
            std::vector<std::uint8_t> p = policy_from_bytes(policy);
            py::gil_scoped_release release;
            return simulate(source, pmf, model, p, cfg);
        },
        py::arg("source"), py::arg("pmf"), py::arg("model"), py::arg("policy"),
        py::arg("horizon") = 100000, py::arg("runs") = 100, py::arg("seed") = 1,
        py::arg("fidelity") = "ideal-ack", py::arg("decode_draw") = "conditional",
        py::arg("epsilon") = 0.0, py::arg("threads") = 0,
        py::arg("start_mismatched") = false,
        "Slot level simulation of the transmission loop a policy induces.");

    py::class_<ExperimentRow>(m, "ExperimentRow")
        .def_readonly("method", &ExperimentRow::method)
        .def_readonly("snr_db", &ExperimentRow::snr_db)
        .def_readonly("k", &ExperimentRow::k)
        .def_readonly("beta", &ExperimentRow::beta)
        .def_readonly("alpha", &ExperimentRow::alpha)
        .def_readonly("epsilon", &ExperimentRow::epsilon)
        .def_readonly("avg_aoii", &ExperimentRow::avg_aoii)
        .def_readonly("aoii_ci95", &ExperimentRow::aoii_ci95)
        .def_readonly("avg_delay", &ExperimentRow::avg_delay)
        .def_readonly("delay_ci95", &ExperimentRow::delay_ci95)
        .def_readonly("fraction_error", &ExperimentRow::fraction_error)
        .def_readonly("runs", &ExperimentRow::runs)
        .def_readonly("horizon", &ExperimentRow::horizon)
        .def_readonly("seed", &ExperimentRow::seed)
        .def_readonly("stage_cost_avg", &ExperimentRow::stage_cost_avg)
        .def_readonly("stage_cost_ci95", &ExperimentRow::stage_cost_ci95)
        .def_readonly("from_cache", &ExperimentRow::from_cache)
        .def("__repr__", [](const ExperimentRow& r) {
            return "ExperimentRow(" + r.method + ", k=" + std::to_string(r.k) +
                   ", snr_db=" + std::to_string(r.snr_db) + ")";
        });

    m.def(
        "run_experiment",
        [](double alpha, double epsilon, const std::vector<int>& k,
           const std::vector<int>& beta, const std::vector<double>& snr_db,
           const std::vector<std::string>& methods, std::uint64_t trials,
           std::int64_t horizon, int runs, std::uint64_t seed, int d_max, double tol,
           std::uint64_t max_iter, std::size_t state_cap, const std::string& fidelity,
           int threads, const std::string& out_dir,
           const std::function<void(const std::string&)>& log) {
            ExperimentConfig cfg;
            cfg.alpha = alpha;
            cfg.epsilon = epsilon;
            cfg.k_values = k;
            cfg.beta_values = beta;
            cfg.snr_db_values = snr_db;
            cfg.methods = methods;
            cfg.trials = trials;
            cfg.horizon = horizon;
            cfg.runs = runs;
            cfg.seed = seed;
            cfg.d_max = d_max;
            cfg.tol = tol;
            cfg.max_iter = max_iter;
            cfg.state_cap = state_cap;
            cfg.fidelity = fidelity;
            cfg.threads = threads;
            cfg.out_dir = out_dir;
            cfg.log = log;
            return run_experiment(cfg);
        },
        py::arg("alpha"), py::arg("epsilon"), py::arg("k"), py::arg("beta"),
        py::arg("snr_db"), py::arg("methods"), py::arg("trials") = 100000,
        py::arg("horizon") = 10000, py::arg("runs") = 50, py::arg("seed") = 1,
        py::arg("d_max") = -1, py::arg("tol") = 1e-8, py::arg("max_iter") = 100000,
        py::arg("state_cap") = 60000000, py::arg("fidelity") = "ideal-ack",
        py::arg("threads") = 0, py::arg("out_dir") = ".", py::arg("log") = nullptr,
        "Solve and simulate a grid of comparison points and write results.csv.");
}
