#include "aoii_vlsf/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "aoii_vlsf/csv_io.hpp"
#include "aoii_vlsf/parallel.hpp"

namespace aoii {

namespace {

constexpr double kSumRejectTol = 1e-6;
constexpr double kSumKeepTol = 1e-12;

void check_sequence(const DecodePmf& pmf, const FeedbackSequence& seq) {
    if (seq.empty()) {
        throw std::invalid_argument("feedback sequence must not be empty");
    }
    long long total = 0;
    for (int nu : seq) {
        if (nu < 1) {
            throw std::invalid_argument("feedback sequence entries must be >= 1");
        }
        total += nu;
    }
    if (total != pmf.max_len()) {
        std::ostringstream msg;
        msg << "feedback sequence covers " << total << " symbols but the decode length support is "
            << pmf.max_len();
        throw std::invalid_argument(msg.str());
    }
}

} // namespace

DecodePmf::DecodePmf(const std::vector<double>& probs, PmfMeta meta) : meta_(meta) {
    std::size_t len = probs.size();
    while (len > 0 && probs[len - 1] == 0.0) {
        --len;
    }
    if (len == 0) {
        throw std::invalid_argument("decode length distribution has no positive entry");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        if (!(probs[i] >= 0.0)) {
            throw std::invalid_argument("decode length distribution has a negative entry");
        }
        sum += probs[i];
    }
    if (std::abs(sum - 1.0) > kSumRejectTol) {
        throw std::invalid_argument("decode length distribution sums to " + csv::format_double(sum) +
                                    ", expected 1 within 1e-6");
    }
    p_.assign(len + 1, 0.0);
    if (std::abs(sum - 1.0) > kSumKeepTol) {
        for (std::size_t i = 0; i < len; ++i) {
            p_[i + 1] = probs[i] / sum;
        }
    } else {
        for (std::size_t i = 0; i < len; ++i) {
            p_[i + 1] = probs[i];
        }
    }
    f_.assign(len + 1, 0.0);
    for (std::size_t b = 1; b <= len; ++b) {
        f_[b] = f_[b - 1] + p_[b];
    }
    g_.assign(len + 1, 0.0);
    for (std::size_t b = len; b-- > 0;) {
        g_[b] = g_[b + 1] + p_[b + 1];
    }
}

double DecodePmf::prob(int m) const {
    if (m < 1 || m > max_len()) {
        throw std::out_of_range("decode length out of range");
    }
    return p_[static_cast<std::size_t>(m)];
}

double DecodePmf::cdf(int b) const {
    if (b <= 0) {
        return 0.0;
    }
    if (b >= max_len()) {
        return 1.0;
    }
    return f_[static_cast<std::size_t>(b)];
}

double DecodePmf::tail(int b) const {
    if (b <= 0) {
        return 1.0;
    }
    if (b >= max_len()) {
        return 0.0;
    }
    return g_[static_cast<std::size_t>(b)];
}

double DecodePmf::mean() const {
    double m = 0.0;
    for (int i = 1; i <= max_len(); ++i) {
        m += static_cast<double>(i) * p_[static_cast<std::size_t>(i)];
    }
    return m;
}

double DecodePmf::conditional_success(int b, int l) const {
    if (l < 1 || l > b || b > max_len()) {
        throw std::invalid_argument("conditional_success: need 1 <= l <= b <= max_len()");
    }
    if (b == max_len()) {
        return 1.0;
    }
    double before = tail(b - l);
    return (before - tail(b)) / before;
}

int DecodePmf::sample_len(Rng& rng) const {
    double u = uniform01(rng);
    auto it = std::upper_bound(f_.begin() + 1, f_.end(), u);
    if (it == f_.end()) {
        return max_len();
    }
    return static_cast<int>(it - f_.begin());
}

double snr_linear(double snr_db) {
    return std::pow(10.0, snr_db / 10.0);
}

double channel_capacity(double snr_db) {
    return 0.5 * std::log2(1.0 + snr_linear(snr_db));
}

double decode_threshold(int k, double epsilon) {
    if (k < 1 || k > 120) {
        throw std::invalid_argument("decode_threshold: k must be in [1, 120]");
    }
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
        throw std::invalid_argument("decode_threshold: epsilon must be in (0, 1)");
    }
    // log2(2^k - 1) = k + log(1 - 2^-k) / log 2, stable for any k.
    double states_bits = k + std::log1p(-std::exp2(static_cast<double>(-k))) / std::numbers::ln2;
    return states_bits - std::log2(epsilon);
}

namespace detail {

double info_density(double gamma, double y, double z) {
    static const double half_log2e = 0.5 / std::numbers::ln2;
    double capacity = 0.5 * std::log2(1.0 + gamma);
    return capacity + half_log2e * (y * y / (1.0 + gamma) - z * z);
}

std::uint64_t stopping_time(double gamma, double theta, std::uint64_t max_symbols, Rng& rng) {
    const double capacity = 0.5 * std::log2(1.0 + gamma);
    const double half_log2e = 0.5 / std::numbers::ln2;
    const double inv_one_plus_gamma = 1.0 / (1.0 + gamma);
    const double sqrt_gamma = std::sqrt(gamma);
    double sum = 0.0;
    for (std::uint64_t m = 1; m <= max_symbols; ++m) {
        auto [z, xn] = normal_pair(rng);
        double y = sqrt_gamma * xn + z;
        sum += capacity + half_log2e * (y * y * inv_one_plus_gamma - z * z);
        if (sum >= theta) {
            return m;
        }
    }
    throw std::runtime_error("decode simulation exceeded the max_symbols cap");
}

} // namespace detail

DecodePmf estimate_pmf(const EstimateConfig& cfg) {
    if (cfg.trials < 1) {
        throw std::invalid_argument("estimate_pmf: trials must be >= 1");
    }
    if (cfg.max_symbols < 1) {
        throw std::invalid_argument("estimate_pmf: max_symbols must be >= 1");
    }
    const double gamma = snr_linear(cfg.snr_db);
    const double theta = decode_threshold(cfg.k, cfg.epsilon);
    int workers = resolve_threads(cfg.threads);
    if (static_cast<std::uint64_t>(workers) > cfg.trials) {
        workers = static_cast<int>(cfg.trials);
    }
    std::vector<std::vector<std::uint64_t>> histograms(static_cast<std::size_t>(workers));
    run_workers(workers, [&](int w) {
        auto [begin, end] = worker_range(cfg.trials, workers, w);
        auto& hist = histograms[static_cast<std::size_t>(w)];
        for (std::uint64_t trial = begin; trial < end; ++trial) {
            Rng rng = make_rng(cfg.seed, trial);
            std::uint64_t len = detail::stopping_time(gamma, theta, cfg.max_symbols, rng);
            if (len >= hist.size()) {
                hist.resize(len + 1, 0);
            }
            ++hist[len];
        }
    });
    std::size_t support = 0;
    for (const auto& hist : histograms) {
        support = std::max(support, hist.size());
    }
    std::vector<std::uint64_t> counts(support, 0);
    for (const auto& hist : histograms) {
        for (std::size_t m = 0; m < hist.size(); ++m) {
            counts[m] += hist[m];
        }
    }
    std::vector<double> probs(support > 0 ? support - 1 : 0, 0.0);
    const double inv_trials = 1.0 / static_cast<double>(cfg.trials);
    for (std::size_t m = 1; m < support; ++m) {
        probs[m - 1] = static_cast<double>(counts[m]) * inv_trials;
    }
    PmfMeta meta;
    meta.k = cfg.k;
    meta.epsilon = cfg.epsilon;
    meta.snr_db = cfg.snr_db;
    meta.trials = cfg.trials;
    meta.seed = cfg.seed;
    return DecodePmf(probs, meta);
}

void save_pmf(const DecodePmf& pmf, const std::string& path) {
    std::ostringstream out;
    out << "# decode length distribution v1\n";
    out << "# k=" << pmf.meta().k << "\n";
    out << "# epsilon=" << csv::format_double(pmf.meta().epsilon) << "\n";
    out << "# snr_db=" << csv::format_double(pmf.meta().snr_db) << "\n";
    out << "# trials=" << pmf.meta().trials << "\n";
    out << "# seed=" << pmf.meta().seed << "\n";
    out << "m,p_c\n";
    for (int m = 1; m <= pmf.max_len(); ++m) {
        out << m << "," << csv::format_double(pmf.prob(m)) << "\n";
    }
    csv::write_file(path, out.str());
}

DecodePmf load_pmf(const std::string& path) {
    std::istringstream in(csv::read_file(path));
    PmfMeta meta;
    std::vector<double> probs;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            std::string t = csv::trim(line);
            if (t.empty()) {
                continue;
            }
            if (t[0] == '#') {
                std::string body = csv::trim(t.substr(1));
                std::string::size_type eq = body.find('=');
                if (eq != std::string::npos) {
                    std::string key = csv::trim(body.substr(0, eq));
                    std::string value = csv::trim(body.substr(eq + 1));
                    if (key == "k") {
                        meta.k = static_cast<int>(csv::parse_int(value));
                    } else if (key == "epsilon") {
                        meta.epsilon = csv::parse_double(value);
                    } else if (key == "snr_db") {
                        meta.snr_db = csv::parse_double(value);
                    } else if (key == "trials") {
                        meta.trials = static_cast<std::uint64_t>(csv::parse_int(value));
                    } else if (key == "seed") {
                        meta.seed = static_cast<std::uint64_t>(csv::parse_int(value));
                    }
                }
                continue;
            }
            if (!header_seen && t == "m,p_c") {
                header_seen = true;
                continue;
            }
            std::vector<std::string> fields = csv::split(t, ',');
            if (fields.size() != 2) {
                throw std::invalid_argument("expected two fields");
            }
            std::int64_t m = csv::parse_int(fields[0]);
            if (m != static_cast<std::int64_t>(probs.size()) + 1) {
                throw std::invalid_argument("length column must count up from 1 without gaps");
            }
            probs.push_back(csv::parse_double(fields[1]));
        }
        return DecodePmf(probs, meta);
    } catch (const std::invalid_argument& e) {
        std::ostringstream msg;
        msg << path << ":" << line_no << ": " << e.what();
        throw std::runtime_error(msg.str());
    }
}

std::vector<double> packet_success(const DecodePmf& pmf, const FeedbackSequence& seq) {
    check_sequence(pmf, seq);
    std::vector<double> out(seq.size(), 0.0);
    int boundary = 0;
    for (std::size_t r = 0; r < seq.size(); ++r) {
        int prev = boundary;
        boundary += seq[r];
        out[r] = pmf.cdf(boundary) - pmf.cdf(prev);
    }
    return out;
}

double expected_delay(const DecodePmf& pmf, const FeedbackSequence& seq, int beta) {
    if (beta < 0) {
        throw std::invalid_argument("expected_delay: beta must be >= 0");
    }
    std::vector<double> success = packet_success(pmf, seq);
    double delay = 0.0;
    int boundary = 0;
    for (std::size_t r = 0; r < seq.size(); ++r) {
        boundary += seq[r];
        double rounds = static_cast<double>(r + 1);
        delay += (boundary + rounds * beta) * success[r];
    }
    return delay;
}

} // namespace aoii
