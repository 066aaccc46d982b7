#include "aoii_vlsf/source.hpp"

#include <cmath>
#include <stdexcept>

namespace aoii {

namespace {

/// k uniformly random bits as a 128-bit value.
state_t random_bits(Rng& rng, int k) {
    if (k <= 64) {
        std::uint64_t lo = rng();
        return static_cast<state_t>(k == 64 ? lo : lo >> (64 - k));
    }
    std::uint64_t hi = rng() >> (128 - k);
    std::uint64_t lo = rng();
    return (static_cast<state_t>(hi) << 64) | lo;
}

} // namespace

SourceModel::SourceModel(int k, double alpha) : k_(k), alpha_(alpha) {
    if (k < 1 || k > 120)
        throw std::invalid_argument("SourceModel: k must be in [1, 120]");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("SourceModel: alpha must be in (0, 1)");
    double states = std::exp2(static_cast<double>(k));
    inv_m_ = 1.0 / states;
    mu_ = (1.0 - alpha) / (states - 1.0);
    if (!(alpha > mu_))
        throw std::invalid_argument(
            "SourceModel: alpha must exceed the cross probability (1 - alpha) / (2^k - 1)");
    max_state_ = (static_cast<state_t>(1) << k) - 1;
}

double SourceModel::p_same(std::int64_t t) const {
    if (t < 0)
        throw std::invalid_argument("SourceModel::p_same: t must be >= 0");
    return inv_m_ + (1.0 - inv_m_) * std::pow(alpha_ - mu_, static_cast<double>(t));
}

state_t SourceModel::step(state_t x, Rng& rng) const {
    if (x > max_state_)
        throw std::invalid_argument("SourceModel::step: state out of range");
    if (uniform01(rng) < alpha_)
        return x;
    return random_other(x, rng);
}

state_t SourceModel::random_other(state_t x, Rng& rng) const {
    if (x > max_state_)
        throw std::invalid_argument("SourceModel::random_other: state out of range");
    if (k_ == 1)
        return x ^ 1;
    // Uniform draw over the 2^k - 1 values other than x: draw v uniform on
    // [0, 2^k - 2] by rejection, then skip over x.
    state_t v;
    do {
        v = random_bits(rng, k_);
    } while (v >= max_state_);
    return v >= x ? v + 1 : v;
}

} // namespace aoii
