#include "aoii_vlsf/baseline.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace aoii {

PeriodicBaseline best_periodic(const DecodePmf& pmf, int beta) {
    if (beta < 0) {
        throw std::invalid_argument("best_periodic: beta must be >= 0");
    }
    const int len = pmf.max_len();
    PeriodicBaseline best;
    best.expected_delay = std::numeric_limits<double>::infinity();
    for (int nu = 1; nu <= len; ++nu) {
        double objective = 0.0;
        FeedbackSequence seq;
        int boundary = 0;
        int round = 0;
        while (boundary < len) {
            int step = std::min(nu, len - boundary);
            int prev = boundary;
            boundary += step;
            ++round;
            seq.push_back(step);
            objective += static_cast<double>(round) * (nu + beta) * (pmf.cdf(boundary) - pmf.cdf(prev));
        }
        if (objective < best.expected_delay) {
            best.nu = nu;
            best.expected_delay = objective;
            best.sequence = std::move(seq);
        }
    }
    return best;
}

} // namespace aoii
