#pragma once

#include "aoii_vlsf/channel.hpp"

namespace aoii {

/// Best fixed round length baseline. Every round sends nu symbols (the last
/// round of a packet is truncated so the rounds cover the decode length
/// support exactly) and each round is charged nu + beta slots whether or
/// not it was truncated.
struct PeriodicBaseline {
    int nu = 0;                  // chosen round length
    double expected_delay = 0.0; // minimized per packet delay objective
    FeedbackSequence sequence;   // materialized rounds summing to max_len()
};

/// Scan all round lengths 1..max_len() and return the one minimizing the
/// expected per packet delay, counting nu + beta slots per round. Ties go
/// to the smaller round length.
PeriodicBaseline best_periodic(const DecodePmf& pmf, int beta);

} // namespace aoii
