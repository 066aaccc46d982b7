#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoii_vlsf/channel.hpp"
#include "aoii_vlsf/source.hpp"

namespace aoii {

/// Thrown when value iteration does not reach its span tolerance within the
/// iteration budget. Carries the span that was achieved so callers can
/// report how far the solve got.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double span)
        : std::runtime_error(what), span_(span) {}

    double span() const { return span_; }

private:
    double span_;
};

/// Settings shared by the decision process builders.
struct MdpBuildConfig {
    int beta = 0;              // feedback delay in slots
    int d_max = -1;            // cap on the cost counter; -1 selects 4 * (max_len + beta)
    std::size_t state_cap = 10000000; // refuse to build models larger than this
};

/// Average cost decision process for scheduling the feedback requests of a
/// stop feedback code.
///
/// A state (d, b, l) describes one moment between slots: b symbols of the
/// current packet have been sent, the last l of them since the previous
/// feedback opportunity, and d is the running cost counter, capped at
/// age_cap(). For the freshness objective d is the number of consecutive
/// slots the receiver estimate has been wrong; for the delay objective it
/// is the number of slots since the pending sample was taken.
///
/// Action 0 sends one more symbol and moves to (d + 1, b + 1, l + 1).
/// Action 1 requests feedback; the packet decodes with the conditional
/// success probability q(b, l) and the process jumps after the feedback
/// flight of beta slots:
///   - to (0, 0, 0) when the packet decodes and the source still holds the
///     sampled value (success prob times success_match(l)),
///   - to (d + beta, b, 0) when it does not decode but the source still
///     holds the sampled value at the next decision (failure prob times
///     failure_match(l)), so the packet continues with a fresh round,
///   - to (d + beta, 0, 0) otherwise: the sample went stale and a new
///     packet starts.
/// The delay objective sets both match probabilities to 1, so a decoded
/// packet always resets the counter.
///
/// Action 0 is forced when l = 0 (there is nothing to acknowledge) and
/// action 1 is forced when b = max_len() (the packet is certain to decode,
/// so sending more symbols is pointless). States with b = max_len() and
/// l = 0 cannot occur and are excluded, as are states with d < b, which no
/// trajectory from (0, 0, 0) can reach.
///
/// Every stage costs d plus cost_offset(). The offset folds in the cost
/// accumulated during feedback flights that follow a synchronizing
/// delivery; it shifts the average of every policy equally.
class MdpModel {
public:
    struct State {
        int d;
        int b;
        int l;
    };

    struct Branch {
        State to;
        double prob;
    };

    int max_len() const { return len_; }
    int beta() const { return beta_; }
    int age_cap() const { return d_max_; }
    bool delay_objective() const { return delay_; }
    double cost_offset() const { return offset_; }
    std::size_t state_count() const { return count_; }

    /// Stage cost of a state with counter d.
    double stage_cost(int d) const { return d + offset_; }

    bool valid_state(int d, int b, int l) const;

    /// Dense index of a valid state; (0, 0, 0) is always index 0. Throws
    /// std::invalid_argument for invalid triples.
    std::size_t index(int d, int b, int l) const;

    /// 0 when only sending is allowed (l = 0), 1 when only stopping is
    /// allowed (b = max_len()), -1 when the policy may choose.
    int forced_action(int b, int l) const;

    /// Conditional decode probability q(b, l) used by action 1.
    double success_prob(int b, int l) const;

    /// Probability that the source still matches the sample when a round of
    /// l symbols decodes, and at the next decision after a failed round.
    double success_match(int l) const { return same_l_[static_cast<std::size_t>(l)]; }
    double failure_match(int l) const { return same_lb_[static_cast<std::size_t>(l)]; }

    /// Successor distribution of one action. Zero probability branches are
    /// omitted. Throws when the action is not admissible in the state.
    std::vector<Branch> branches(State s, int action) const;

    /// Call fn(index, d, b, l) for every state in index order.
    template <typename Fn>
    void for_each_state(Fn&& fn) const {
        std::size_t i = 0;
        for (int b = 0; b <= len_; ++b) {
            for (int l = (b == len_ ? 1 : 0); l <= b; ++l) {
                for (int d = b; d <= d_max_; ++d) {
                    fn(i, d, b, l);
                    ++i;
                }
            }
        }
    }

private:
    MdpModel() = default;

    std::size_t pair_id(int b, int l) const {
        return static_cast<std::size_t>(b) * (b + 1) / 2 + static_cast<std::size_t>(l);
    }

    std::size_t raw_index(int d, int b, int l) const {
        return pair_start_[pair_id(b, l)] + static_cast<std::size_t>(d - b);
    }

    int len_ = 0;
    int beta_ = 0;
    int d_max_ = 0;
    bool delay_ = false;
    double offset_ = 0.0;
    std::size_t count_ = 0;
    std::vector<std::size_t> pair_start_; // dense offset per (b, l) pair
    std::vector<double> q_;               // success prob per pair, l >= 1
    std::vector<double> same_l_;          // match prob after l symbols
    std::vector<double> same_lb_;         // match prob after l symbols + flight
    std::vector<double> sync_;            // action 1: reset branch prob per pair
    std::vector<double> cont_;            // action 1: continue branch prob per pair
    std::vector<double> stale_;           // action 1: new packet branch prob per pair

    friend MdpModel build_aoii_mdp(const SourceModel&, const DecodePmf&, const MdpBuildConfig&);
    friend MdpModel build_delay_mdp(const DecodePmf&, const MdpBuildConfig&);
    friend struct ModelOps;
};

/// Build the freshness objective process for a source and decode length
/// distribution. The cost offset is feedback_penalty(source, beta). Throws
/// std::invalid_argument on inconsistent settings and std::runtime_error
/// when the state space exceeds the cap.
MdpModel build_aoii_mdp(const SourceModel& source, const DecodePmf& pmf, const MdpBuildConfig& cfg);

/// Build the delivery delay objective process. The source never goes stale
/// and the cost offset is 0.
MdpModel build_delay_mdp(const DecodePmf& pmf, const MdpBuildConfig& cfg);

struct SolveOptions {
    double tol = 1e-9;            // span tolerance on the value change
    std::uint64_t max_iter = 100000;
    double damping = 0.95;        // weight on the one step update, in (0, 1]
    int warm_start = -1;          // 1 on, 0 off, -1 auto (on for large models)
};

struct SolveResult {
    double average_cost = 0.0;    // per stage, includes the model cost offset
    double span = 0.0;            // achieved span of the last value change
    std::uint64_t iterations = 0; // value iteration sweeps run
    std::uint64_t improvements = 0; // policy improvement rounds of the warm start
    std::vector<std::uint8_t> policy; // greedy action per state index
    std::vector<double> value;    // relative values, value[0] = 0
};

/// Solve for the minimum average cost by relative value iteration with an
/// aperiodicity damping. Large models are first brought near the optimum
/// by policy iteration with exact evaluations, after which value iteration
/// certifies the span tolerance. Throws ConvergenceError when max_iter
/// sweeps do not reach the tolerance.
SolveResult rvi_solve(const MdpModel& model, const SolveOptions& opts = {});

/// Throw std::invalid_argument unless policy has one entry of 0 or 1 per
/// state and takes the forced action wherever one applies.
void check_policy(const MdpModel& model, const std::vector<std::uint8_t>& policy);

/// Exact average cost per stage of a fixed policy, computed from expected
/// first passage costs and times to the reset state. The policy must take
/// the forced action wherever one applies.
double policy_average_cost(const MdpModel& model, const std::vector<std::uint8_t>& policy);

/// Round lengths a policy uses along the path where every feedback request
/// fails until the packet reaches the maximum decode length. Deterministic
/// policies of interest stop at fixed symbol counts, and this recovers
/// those counts as a feedback sequence summing to max_len().
FeedbackSequence extract_feedback_sequence(const MdpModel& model, const std::vector<std::uint8_t>& policy);

/// Policy that requests feedback exactly at the round boundaries of a
/// feedback sequence, regardless of the cost counter.
std::vector<std::uint8_t> sequence_policy(const MdpModel& model, const FeedbackSequence& seq);

} // namespace aoii
