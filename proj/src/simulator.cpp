#include "aoii_vlsf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "aoii_vlsf/aoii_dynamics.hpp"
#include "aoii_vlsf/parallel.hpp"
#include "aoii_vlsf/rng.hpp"

namespace aoii {

namespace {

enum class Phase { Idle, Sending, Waiting };

struct RunTotals {
    double aoii_sum = 0.0;
    double err_slots = 0.0;
    double stage_sum = 0.0;
    std::int64_t stage_count = 0;
    double delay_sum = 0.0;
    std::int64_t deliveries = 0;
};

RunTotals run_one(const SourceModel& source, const DecodePmf& pmf, const MdpModel& model,
                  const std::vector<std::uint8_t>& policy, const SimConfig& cfg,
                  std::uint64_t run_index) {
    Rng rng = make_rng(cfg.seed, run_index);
    RunTotals totals;

    const int len = model.max_len();
    const int beta = model.beta();
    const int cap = model.age_cap();
    const bool delay_counter = model.delay_objective();
    const bool presampled = cfg.decode_draw == DecodeDraw::PresampledLength;
    const bool noisy = cfg.fidelity == Fidelity::EpsilonError && cfg.epsilon > 0.0;

    state_t x = 0;       // source
    state_t xhat = 0;    // receiver estimate
    state_t belief = 0;  // last acknowledged sample
    if (cfg.start_mismatched)
        x = 1;

    Phase phase = Phase::Idle;
    state_t sample = 0;
    int b = 0;        // symbols of the current packet already sent
    int l = 0;        // symbols since the last feedback opportunity
    int ctrl_d = 0;   // the model's counter, drives policy lookups
    int sd = 0;       // freshness counter of the stage machine
    int tau = 0;      // presampled decode length of the current packet
    int wait_left = 0;
    bool ack = false;
    state_t x_decode = 0;
    std::int64_t first_sym = 0;
    std::int64_t delta = 0; // consecutive slots the receiver estimate was wrong

    auto account = [&] {
        delta = (x == xhat) ? 0 : delta + 1;
        totals.aoii_sum += static_cast<double>(delta);
        if (x != xhat)
            totals.err_slots += 1.0;
    };

    auto start_packet = [&](std::int64_t t) {
        sample = x;
        first_sym = t + 1;
        b = 0;
        l = 0;
        if (presampled)
            tau = pmf.sample_len(rng);
        phase = Phase::Sending;
    };

    auto resolve = [&](std::int64_t t) {
        if (ack) {
            totals.deliveries += 1;
            totals.delay_sum += static_cast<double>(t - first_sym + 1);
            belief = sample;
            bool matched = x_decode == sample;
            sd = matched ? 0 : std::min(sd + beta, cap);
            if (delay_counter)
                ctrl_d = 0;
            else
                ctrl_d = matched ? 0 : std::min(ctrl_d + beta, cap);
            b = 0;
            l = 0;
            if (x != belief)
                start_packet(t);
            else
                phase = Phase::Idle;
            return;
        }
        sd = std::min(sd + beta, cap);
        ctrl_d = std::min(ctrl_d + beta, cap);
        if (b < len && x == sample) {
            l = 0;
            phase = Phase::Sending;
            return;
        }
        b = 0;
        l = 0;
        if (x != belief)
            start_packet(t);
        else
            phase = Phase::Idle;
    };

    for (std::int64_t t = 0; t < cfg.horizon; ++t) {
        x = source.step(x, rng);
        switch (phase) {
        case Phase::Idle:
            account();
            if (x != belief)
                start_packet(t);
            break;
        case Phase::Sending: {
            totals.stage_sum += static_cast<double>(sd);
            totals.stage_count += 1;
            sd = std::min(sd + 1, cap);
            ctrl_d = std::min(ctrl_d + 1, cap);
            b += 1;
            l += 1;
            int act = b == len ? 1 : policy[model.index(ctrl_d, b, l)];
            if (act == 0) {
                account();
                break;
            }
            bool success = presampled ? tau <= b
                                      : uniform01(rng) < pmf.conditional_success(b, l);
            if (success) {
                state_t delivered = sample;
                if (noisy && uniform01(rng) < cfg.epsilon)
                    delivered = source.random_other(sample, rng);
                xhat = delivered;
            }
            ack = success;
            x_decode = x;
            totals.stage_sum += static_cast<double>(sd);
            totals.stage_count += 1;
            account();
            wait_left = beta;
            if (wait_left == 0)
                resolve(t);
            else
                phase = Phase::Waiting;
            break;
        }
        case Phase::Waiting:
            account();
            wait_left -= 1;
            if (wait_left == 0)
                resolve(t);
            break;
        }
    }
    return totals;
}

struct MeanCi {
    double mean = 0.0;
    double ci95 = 0.0;
};

MeanCi mean_ci(const std::vector<double>& values) {
    MeanCi out;
    std::size_t n = values.size();
    if (n == 0)
        return out;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    out.mean = sum / static_cast<double>(n);
    if (n < 2)
        return out;
    double ss = 0.0;
    for (double v : values) {
        double d = v - out.mean;
        ss += d * d;
    }
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    out.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(n));
    return out;
}

} // namespace

SimReport simulate(const SourceModel& source, const DecodePmf& pmf, const MdpModel& model,
                   const std::vector<std::uint8_t>& policy, const SimConfig& cfg) {
    if (cfg.horizon < 1)
        throw std::invalid_argument("simulate: horizon must be >= 1");
    if (cfg.runs < 1)
        throw std::invalid_argument("simulate: runs must be >= 1");
    if (cfg.fidelity == Fidelity::EpsilonError && !(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0))
        throw std::invalid_argument("simulate: epsilon must be in [0, 1)");
    if (model.max_len() != pmf.max_len())
        throw std::invalid_argument(
            "simulate: model and length distribution disagree on the maximum decode length");
    check_policy(model, policy);

    std::vector<RunTotals> totals(static_cast<std::size_t>(cfg.runs));
    int workers = std::min(resolve_threads(cfg.threads), cfg.runs);
    run_workers(workers, [&](int worker) {
        auto [begin, end] = worker_range(static_cast<std::uint64_t>(cfg.runs), workers, worker);
        for (std::uint64_t r = begin; r < end; ++r)
            totals[static_cast<std::size_t>(r)] = run_one(source, pmf, model, policy, cfg, r);
    });

    double horizon = static_cast<double>(cfg.horizon);
    std::vector<double> aoii_means;
    std::vector<double> stage_means;
    std::vector<double> delay_means;
    aoii_means.reserve(totals.size());
    double err_frac_sum = 0.0;
    for (const RunTotals& run : totals) {
        aoii_means.push_back(run.aoii_sum / horizon);
        err_frac_sum += run.err_slots / horizon;
        if (run.stage_count > 0)
            stage_means.push_back(run.stage_sum / static_cast<double>(run.stage_count));
        if (run.deliveries > 0)
            delay_means.push_back(run.delay_sum / static_cast<double>(run.deliveries));
    }

    MeanCi aoii = mean_ci(aoii_means);
    MeanCi stage = mean_ci(stage_means);
    MeanCi delay = mean_ci(delay_means);

    SimReport report;
    report.avg_aoii = aoii.mean;
    report.aoii_ci95 = aoii.ci95;
    report.avg_delay = delay.mean;
    report.delay_ci95 = delay.ci95;
    report.fraction_error = err_frac_sum / static_cast<double>(totals.size());
    report.stage_cost_avg = stage.mean;
    if (!stage_means.empty())
        report.stage_cost_avg += feedback_penalty(source, model.beta());
    report.stage_cost_ci95 = stage.ci95;
    report.runs_used = static_cast<int>(delay_means.size());
    return report;
}

} // namespace aoii
