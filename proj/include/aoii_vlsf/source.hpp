#pragma once

#include <cstdint>

#include "aoii_vlsf/rng.hpp"

namespace aoii {

/// Source state value. The process monitors a source with 2^k states and k
/// can be large (k = 100 in the reference experiments), so states are held
/// in a 128-bit integer. Values are 0-based: x in {0, ..., 2^k - 1}.
using state_t = unsigned __int128;

/// Symmetric Markov information source over 2^k states.
///
/// Every slot the source keeps its value with probability alpha and
/// otherwise jumps to one of the remaining 2^k - 1 values uniformly at
/// random, so every off-diagonal transition has probability
/// mu = (1 - alpha) / (2^k - 1). The model requires alpha > mu (staying is
/// more likely than any single move).
class SourceModel {
public:
    /// \param k     number of source bits, 1 <= k <= 120
    /// \param alpha self-transition probability, in (0, 1) and > mu
    SourceModel(int k, double alpha);

    int bits() const { return k_; }
    double alpha() const { return alpha_; }

    /// Off-diagonal transition probability mu = (1 - alpha) / (2^k - 1).
    double cross_prob() const { return mu_; }

    /// 1 / 2^k, the stationary probability of each state.
    double inv_states() const { return inv_m_; }

    /// Probability that the source holds the same value t slots apart,
    /// 1/2^k + (1 - 1/2^k) (alpha - mu)^t. Decreases monotonically from 1
    /// at t = 0 toward the stationary value 1/2^k.
    double p_same(std::int64_t t) const;

    /// Advance the source one slot from state x.
    state_t step(state_t x, Rng& rng) const;

    /// Uniform draw over the 2^k - 1 states different from x.
    state_t random_other(state_t x, Rng& rng) const;

private:
    int k_;
    double alpha_;
    double mu_;
    double inv_m_;
    state_t max_state_; // 2^k - 1
};

} // namespace aoii
