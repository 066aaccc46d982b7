#pragma once

#include <cstdint>
#include <vector>

#include "aoii_vlsf/source.hpp"

namespace aoii {

/// Age of incorrect information chain truncated at a horizon of beta slots.
///
/// The age delta counts consecutive slots in which the receiver estimate
/// differs from the source. While the estimate is correct (delta = 0) the
/// age stays 0 with probability alpha and becomes 1 otherwise. While it is
/// wrong the source returns to the estimated value with probability mu
/// (age resets to 0) and keeps mismatching otherwise (age grows by one,
/// capped at beta). Only the first beta slots after a reset matter here,
/// so the cap never distorts the quantities computed from the chain.
struct TruncatedAoiiChain {
    int beta = 0;
    /// Row-major (beta + 1) x (beta + 1) transition matrix.
    std::vector<double> matrix;

    double at(int row, int col) const { return matrix[static_cast<std::size_t>(row) * (beta + 1) + col]; }
};

/// Build the age transition matrix for a source, truncated at age beta.
/// beta = 0 yields the trivial 1 x 1 chain [[1]].
TruncatedAoiiChain build_chain(const SourceModel& source, int beta);

/// Expected age accumulated over the beta slots following a reset to 0:
/// sum over t = 1..beta of E[delta_t | delta_0 = 0]. This is the fixed
/// penalty a transmission round pays while its feedback is in flight.
double feedback_penalty(const SourceModel& source, int beta);

} // namespace aoii
