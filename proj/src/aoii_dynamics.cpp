#include "aoii_vlsf/aoii_dynamics.hpp"

#include <algorithm>
#include <stdexcept>

namespace aoii {

TruncatedAoiiChain build_chain(const SourceModel& source, int beta) {
    if (beta < 0) {
        throw std::invalid_argument("build_chain: beta must be >= 0");
    }
    TruncatedAoiiChain chain;
    chain.beta = beta;
    const int n = beta + 1;
    chain.matrix.assign(static_cast<std::size_t>(n) * n, 0.0);
    if (beta == 0) {
        chain.matrix[0] = 1.0;
        return chain;
    }
    const double alpha = source.alpha();
    const double mu = source.cross_prob();
    auto cell = [&](int row, int col) -> double& {
        return chain.matrix[static_cast<std::size_t>(row) * n + col];
    };
    cell(0, 0) = alpha;
    cell(0, 1) = 1.0 - alpha;
    for (int delta = 1; delta < beta; ++delta) {
        cell(delta, 0) = mu;
        cell(delta, delta + 1) = 1.0 - mu;
    }
    cell(beta, 0) = mu;
    cell(beta, beta) = 1.0 - mu;
    return chain;
}

double feedback_penalty(const SourceModel& source, int beta) {
    if (beta < 0) {
        throw std::invalid_argument("feedback_penalty: beta must be >= 0");
    }
    if (beta == 0) {
        return 0.0;
    }
    TruncatedAoiiChain chain = build_chain(source, beta);
    const int n = beta + 1;
    // Row vector v = e_0 * B^t, advanced one step per loop iteration.
    std::vector<double> v(n, 0.0);
    std::vector<double> next(n, 0.0);
    v[0] = 1.0;
    double total = 0.0;
    for (int t = 1; t <= beta; ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int row = 0; row < n; ++row) {
            if (v[row] == 0.0) {
                continue;
            }
            for (int col = 0; col < n; ++col) {
                next[col] += v[row] * chain.at(row, col);
            }
        }
        v.swap(next);
        for (int delta = 1; delta < n; ++delta) {
            total += delta * v[delta];
        }
    }
    return total;
}

} // namespace aoii
