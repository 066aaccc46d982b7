#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aoii_vlsf/rng.hpp"

namespace aoii {

/// How a decode length distribution was produced. Carried along so that
/// output files record their provenance and downstream stages can check
/// they were handed the distribution they expect.
struct PmfMeta {
    int k = 0;
    double epsilon = 0.0;
    double snr_db = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
};

/// Distribution of the number of channel symbols needed to decode one
/// packet. Entry m holds P(decode after exactly m symbols) for
/// m = 1..max_len(); the support is finite because the estimator caps the
/// symbol count. Prefix and suffix sums are cached so success probabilities
/// over symbol windows are O(1).
class DecodePmf {
public:
    DecodePmf() = default;

    /// probs[i] is the probability of decoding after exactly i + 1 symbols.
    /// Trailing zeros are trimmed. The entries must be nonnegative and sum
    /// to 1 within 1e-6; a deviation above 1e-12 is renormalized away,
    /// anything smaller is kept bit for bit.
    explicit DecodePmf(const std::vector<double>& probs, PmfMeta meta = {});

    bool empty() const { return p_.size() <= 1; }
    int max_len() const { return static_cast<int>(p_.size()) - 1; }

    /// P(decode length = m) for 1 <= m <= max_len().
    double prob(int m) const;

    /// P(decode length <= b), clamped to [0, 1] outside the support.
    double cdf(int b) const;

    /// P(decode length > b).
    double tail(int b) const;

    /// Mean decode length in symbols.
    double mean() const;

    /// Probability that a packet decodes by its b-th symbol given that it
    /// had not decoded l symbols earlier: P(len <= b | len > b - l) for
    /// 1 <= l <= b <= max_len(). Exactly 1 when b is the maximum length.
    double conditional_success(int b, int l) const;

    /// Draw a decode length from the distribution.
    int sample_len(Rng& rng) const;

    const PmfMeta& meta() const { return meta_; }

private:
    std::vector<double> p_; // p_[m] = P(len = m), p_[0] = 0
    std::vector<double> f_; // f_[b] = P(len <= b)
    std::vector<double> g_; // g_[b] = P(len > b)
    PmfMeta meta_;
};

/// Lengths of the transmission rounds of one packet: the transmitter sends
/// nu[0] symbols, waits for feedback, sends nu[1] more on a NACK, and so
/// on. A valid sequence has positive entries summing to the maximum decode
/// length, so the last round always succeeds.
using FeedbackSequence = std::vector<int>;

/// Linear SNR from its dB value.
double snr_linear(double snr_db);

/// Shannon capacity of the real AWGN channel at the given SNR, in bits per
/// symbol: 0.5 log2(1 + snr).
double channel_capacity(double snr_db);

/// Accumulated information density required before the receiver decodes:
/// log2(2^k - 1) - log2(epsilon) bits. Evaluated in a form that stays
/// accurate for large k.
double decode_threshold(int k, double epsilon);

/// Monte Carlo estimation settings for the decode length distribution.
struct EstimateConfig {
    int k = 1;
    double epsilon = 1e-3;
    double snr_db = 0.0;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 1;
    int threads = 0;                    // 0 = all hardware threads
    std::uint64_t max_symbols = 1000000; // abort threshold per trial
};

/// Estimate the decode length distribution by simulating the information
/// density random walk until it crosses the decode threshold. Each trial
/// uses its own random substream and trials are aggregated as integer
/// counts, so the result does not depend on the thread count. Throws when
/// a trial fails to decode within max_symbols.
DecodePmf estimate_pmf(const EstimateConfig& cfg);

/// Write a distribution as CSV with provenance comments. Columns: m,p_c.
void save_pmf(const DecodePmf& pmf, const std::string& path);

/// Read a distribution written by save_pmf. Metadata comments are picked
/// up when present. Throws std::runtime_error on I/O or format errors.
DecodePmf load_pmf(const std::string& path);

/// Probability that the packet completes in round r (1-based) under the
/// given feedback sequence: the decode length falls inside round r's
/// symbol window. Entries sum to 1 for a valid sequence.
std::vector<double> packet_success(const DecodePmf& pmf, const FeedbackSequence& seq);

/// Expected delivery delay in slots for one packet: symbols sent plus one
/// feedback wait of beta slots per round, weighted by the round in which
/// the packet completes.
double expected_delay(const DecodePmf& pmf, const FeedbackSequence& seq, int beta);

namespace detail {

/// Information density of one received symbol at linear SNR gamma, where
/// y is the channel output and z the noise realization.
double info_density(double gamma, double y, double z);

/// Number of symbols until the accumulated information density reaches
/// theta. Throws when max_symbols is exceeded.
std::uint64_t stopping_time(double gamma, double theta, std::uint64_t max_symbols, Rng& rng);

} // namespace detail

} // namespace aoii
