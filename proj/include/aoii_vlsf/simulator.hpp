#pragma once

#include <cstdint>
#include <vector>

#include "aoii_vlsf/channel.hpp"
#include "aoii_vlsf/mdp.hpp"
#include "aoii_vlsf/source.hpp"

namespace aoii {

/// How decode outcomes are reported back to the transmitter.
///   IdealAck      a decoded packet always delivers the sampled value.
///   EpsilonError  a decoded packet delivers a uniformly random wrong value
///                 with probability SimConfig::epsilon. The receiver cannot
///                 tell, so the acknowledgement still goes out and the
///                 transmitter keeps believing the sample was delivered
///                 until a later packet overwrites it.
enum class Fidelity { IdealAck, EpsilonError };

/// How the per packet decode randomness is drawn.
///   ConditionalBernoulli  each feedback request succeeds with the
///                         conditional probability q(b, l).
///   PresampledLength      a decode length is drawn from the length
///                         distribution when the packet starts and each
///                         request succeeds once that many symbols are out.
/// Both produce the same law for every observable.
enum class DecodeDraw { ConditionalBernoulli, PresampledLength };

struct SimConfig {
    std::int64_t horizon = 100000;  // slots per run
    int runs = 100;                 // independent runs, each on its own stream
    std::uint64_t seed = 1;
    Fidelity fidelity = Fidelity::IdealAck;
    DecodeDraw decode_draw = DecodeDraw::ConditionalBernoulli;
    double epsilon = 0.0;           // wrong value probability under EpsilonError
    int threads = 0;                // worker threads, 0 picks the hardware count
    bool start_mismatched = false;  // start with the receiver estimate wrong
};

/// Aggregates over runs. Confidence intervals are 1.96 times the standard
/// error of the per run means; they are 0 when fewer than two runs
/// contribute. Delay statistics average over completed deliveries, so they
/// cover only the runs_used runs that delivered at least one packet.
struct SimReport {
    double avg_aoii = 0.0;        // mean over runs of the per slot age average
    double aoii_ci95 = 0.0;
    double avg_delay = 0.0;       // mean over delivering runs of the delivery delay
    double delay_ci95 = 0.0;
    double fraction_error = 0.0;  // fraction of slots with a wrong receiver estimate
    double stage_cost_avg = 0.0;  // decision stage average, includes the model cost offset
    double stage_cost_ci95 = 0.0;
    int runs_used = 0;            // runs with at least one delivery
};

/// Slot level simulation of the transmission loop a policy induces.
///
/// Per slot, in order: the source steps, the slot's activity happens, the
/// age and error counters update against the receiver estimate, and any
/// feedback that arrives this slot is resolved. The transmitter samples the
/// source at a decision slot s and the packet's symbols occupy slots s + 1
/// onward. A feedback request after symbol slot u resolves at slot u + beta;
/// a decoded packet updates the receiver estimate at slot u itself, where
/// the decode happens. Idle slots occur while the source agrees with the
/// transmitter's last acknowledged sample; the first disagreeing slot is the
/// next decision slot.
///
/// On an acknowledgement the transmitter records the delivery delay (from
/// the packet's first symbol slot through the arrival slot, feedback flights
/// included) and starts over. On a failure it continues the packet when the
/// source still holds the sample, abandons it when the packet already
/// reached the maximum decode length, and otherwise discards the stale
/// sample. Whenever the next step is a fresh packet, it is started only
/// from a slot where the source disagrees with the last acknowledged sample.
///
/// The policy is indexed through model, whose counter semantics (freshness
/// or delay) drive the transmitter's bookkeeping. Independently of that, a
/// stage machine replays the freshness counter updates of the decision
/// process along the trajectory: every symbol slot contributes a stage at
/// the current counter, every feedback request contributes the waiting
/// stage, and idle slots contribute nothing. stage_cost_avg averages those
/// stage costs plus the freshness cost offset, which makes it directly
/// comparable to policy_average_cost on the freshness process.
///
/// Throws std::invalid_argument on bad settings or an inadmissible policy.
SimReport simulate(const SourceModel& source, const DecodePmf& pmf, const MdpModel& model,
                   const std::vector<std::uint8_t>& policy, const SimConfig& cfg);

} // namespace aoii
