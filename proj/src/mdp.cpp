#include "aoii_vlsf/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "aoii_vlsf/aoii_dynamics.hpp"

namespace aoii {

namespace {

constexpr std::size_t kWarmStartThreshold = 200000;

} // namespace

bool MdpModel::valid_state(int d, int b, int l) const {
    if (l < 0 || b < l || b > len_) {
        return false;
    }
    if (b == len_ && l == 0) {
        return false;
    }
    return d >= b && d <= d_max_;
}

std::size_t MdpModel::index(int d, int b, int l) const {
    if (!valid_state(d, b, l)) {
        std::ostringstream msg;
        msg << "invalid state (" << d << ", " << b << ", " << l << ")";
        throw std::invalid_argument(msg.str());
    }
    return raw_index(d, b, l);
}

int MdpModel::forced_action(int b, int l) const {
    if (l == 0) {
        return 0;
    }
    if (b == len_) {
        return 1;
    }
    return -1;
}

double MdpModel::success_prob(int b, int l) const {
    if (l < 1 || b < l || b > len_) {
        throw std::invalid_argument("success_prob: need 1 <= l <= b <= max_len()");
    }
    return q_[pair_id(b, l)];
}

std::vector<MdpModel::Branch> MdpModel::branches(State s, int action) const {
    if (!valid_state(s.d, s.b, s.l)) {
        throw std::invalid_argument("branches: invalid state");
    }
    int forced = forced_action(s.b, s.l);
    if (forced >= 0 && forced != action) {
        throw std::invalid_argument("branches: action not admissible in this state");
    }
    if (action != 0 && action != 1) {
        throw std::invalid_argument("branches: action must be 0 or 1");
    }
    std::vector<Branch> out;
    if (action == 0) {
        out.push_back({State{std::min(s.d + 1, d_max_), s.b + 1, s.l + 1}, 1.0});
        return out;
    }
    std::size_t pid = pair_id(s.b, s.l);
    int dp = std::min(s.d + beta_, d_max_);
    if (sync_[pid] > 0.0) {
        out.push_back({State{0, 0, 0}, sync_[pid]});
    }
    if (stale_[pid] > 0.0) {
        out.push_back({State{dp, 0, 0}, stale_[pid]});
    }
    if (cont_[pid] > 0.0) {
        out.push_back({State{dp, s.b, 0}, cont_[pid]});
    }
    return out;
}

/// Solver internals with direct access to the model layout.
struct ModelOps {
    static MdpModel make(const DecodePmf& pmf, const MdpBuildConfig& cfg,
                         std::vector<double> same_l, std::vector<double> same_lb,
                         double offset, bool delay);
    static void check_unichain(const MdpModel& m);
    static void validate_policy(const MdpModel& m, const std::vector<std::uint8_t>& policy);
    static void evaluate_policy(const MdpModel& m, const std::vector<std::uint8_t>& policy,
                                std::vector<double>& cost_to_reset, std::vector<double>& time_to_reset);
    static double gain(const MdpModel& m, const std::vector<double>& cost_to_reset,
                       const std::vector<double>& time_to_reset);
    static std::size_t improve(const MdpModel& m, const std::vector<double>& h,
                               std::vector<std::uint8_t>& policy);
    static std::pair<double, double> sweep(const MdpModel& m, const std::vector<double>& value,
                                           std::vector<double>& next, std::vector<std::uint8_t>& policy,
                                           double damping);
};

MdpModel ModelOps::make(const DecodePmf& pmf, const MdpBuildConfig& cfg,
                        std::vector<double> same_l, std::vector<double> same_lb,
                        double offset, bool delay) {
    if (cfg.beta < 0) {
        throw std::invalid_argument("beta must be >= 0");
    }
    const int len = pmf.max_len();
    const int d_max = cfg.d_max >= 0 ? cfg.d_max : 4 * (len + cfg.beta);
    if (d_max < len + cfg.beta) {
        std::ostringstream msg;
        msg << "d_max = " << d_max << " is below max_len + beta = " << (len + cfg.beta);
        throw std::invalid_argument(msg.str());
    }
    MdpModel m;
    m.len_ = len;
    m.beta_ = cfg.beta;
    m.d_max_ = d_max;
    m.delay_ = delay;
    m.offset_ = offset;
    m.same_l_ = std::move(same_l);
    m.same_lb_ = std::move(same_lb);
    const std::size_t pairs = static_cast<std::size_t>(len + 1) * (len + 2) / 2;
    m.pair_start_.assign(pairs, 0);
    std::size_t count = 0;
    for (int b = 0; b <= len; ++b) {
        for (int l = 0; l <= b; ++l) {
            m.pair_start_[m.pair_id(b, l)] = count;
            if (!(b == len && l == 0)) {
                count += static_cast<std::size_t>(d_max - b + 1);
            }
        }
    }
    if (count > cfg.state_cap) {
        std::ostringstream msg;
        msg << "state space needs " << count << " states, above the cap of " << cfg.state_cap
            << "; lower d_max or raise state_cap";
        throw std::runtime_error(msg.str());
    }
    m.count_ = count;
    m.q_.assign(pairs, 0.0);
    m.sync_.assign(pairs, 0.0);
    m.cont_.assign(pairs, 0.0);
    m.stale_.assign(pairs, 0.0);
    for (int b = 1; b <= len; ++b) {
        for (int l = 1; l <= b; ++l) {
            std::size_t pid = m.pair_id(b, l);
            double q = pmf.conditional_success(b, l);
            double s1 = m.same_l_[static_cast<std::size_t>(l)];
            double s2 = m.same_lb_[static_cast<std::size_t>(l)];
            m.q_[pid] = q;
            m.sync_[pid] = q * s1;
            if (b < len) {
                m.cont_[pid] = (1.0 - q) * s2;
                m.stale_[pid] = q * (1.0 - s1) + (1.0 - q) * (1.0 - s2);
            } else {
                m.cont_[pid] = 0.0;
                m.stale_[pid] = q * (1.0 - s1) + (1.0 - q);
            }
        }
    }
    check_unichain(m);
    return m;
}

void ModelOps::check_unichain(const MdpModel& m) {
    std::vector<std::uint8_t> reaches(m.count_, 0);
    reaches[0] = 1;
    std::size_t joined = 1;
    while (joined < m.count_) {
        std::size_t before = joined;
        for (int d = m.d_max_; d >= 0; --d) {
            for (int b = std::min(d, m.len_); b >= 0; --b) {
                for (int l = (b == m.len_ ? 1 : 0); l <= b; ++l) {
                    std::size_t idx = m.raw_index(d, b, l);
                    if (reaches[idx]) {
                        continue;
                    }
                    bool ok = true;
                    if (b < m.len_) {
                        std::size_t t = m.raw_index(std::min(d + 1, m.d_max_), b + 1, l + 1);
                        ok = reaches[t] != 0;
                    }
                    if (ok && l >= 1) {
                        std::size_t pid = m.pair_id(b, l);
                        int dp = std::min(d + m.beta_, m.d_max_);
                        bool hit = m.sync_[pid] > 0.0;
                        if (!hit && m.stale_[pid] > 0.0) {
                            hit = reaches[m.raw_index(dp, 0, 0)] != 0;
                        }
                        if (!hit && m.cont_[pid] > 0.0) {
                            hit = reaches[m.raw_index(dp, b, 0)] != 0;
                        }
                        ok = hit;
                    }
                    if (ok) {
                        reaches[idx] = 1;
                        ++joined;
                    }
                }
            }
        }
        if (joined == before) {
            throw std::runtime_error(
                "decision process is not unichain: some policy never returns to the reset state");
        }
    }
}

void ModelOps::validate_policy(const MdpModel& m, const std::vector<std::uint8_t>& policy) {
    if (policy.size() != m.count_) {
        throw std::invalid_argument("policy size does not match the state count");
    }
    std::size_t bad = m.count_;
    m.for_each_state([&](std::size_t i, int /*d*/, int b, int l) {
        if (policy[i] > 1) {
            bad = std::min(bad, i);
            return;
        }
        int forced = m.forced_action(b, l);
        if (forced >= 0 && policy[i] != forced) {
            bad = std::min(bad, i);
        }
    });
    if (bad != m.count_) {
        throw std::invalid_argument("policy takes an inadmissible action at state index " +
                                    std::to_string(bad));
    }
}

void ModelOps::evaluate_policy(const MdpModel& m, const std::vector<std::uint8_t>& policy,
                               std::vector<double>& cost_to_reset, std::vector<double>& time_to_reset) {
    const int len = m.len_;
    const int dm = m.d_max_;
    const int beta = m.beta_;
    cost_to_reset.assign(m.count_, 0.0);
    time_to_reset.assign(m.count_, 0.0);
    std::vector<double>& H = cost_to_reset;
    std::vector<double>& T = time_to_reset;

    // Top layer d = dm first. Transitions that stay in the layer can loop
    // through (dm, 0, 0), so values there are kept affine in
    // u = H(dm, 0, 0): value = a + coef * u, with the same coefficient for
    // costs and times. Processing b downward with l = 0 ahead of l >= 1
    // resolves every other in-layer dependency.
    std::vector<double> coef(m.pair_start_.size(), 0.0);
    const double top_cost = m.stage_cost(dm);
    for (int b = len; b >= 1; --b) {
        for (int l = (b == len ? 1 : 0); l <= b; ++l) {
            std::size_t idx = m.raw_index(dm, b, l);
            std::size_t pid = m.pair_id(b, l);
            if (policy[idx] == 0) {
                std::size_t t = m.raw_index(dm, b + 1, l + 1);
                H[idx] = top_cost + H[t];
                T[idx] = 1.0 + T[t];
                coef[pid] = coef[m.pair_id(b + 1, l + 1)];
            } else {
                double a_cost = top_cost;
                double a_time = 1.0;
                double a_coef = m.stale_[pid];
                if (m.cont_[pid] > 0.0) {
                    std::size_t t = m.raw_index(dm, b, 0);
                    a_cost += m.cont_[pid] * H[t];
                    a_time += m.cont_[pid] * T[t];
                    a_coef += m.cont_[pid] * coef[m.pair_id(b, 0)];
                }
                H[idx] = a_cost;
                T[idx] = a_time;
                coef[pid] = a_coef;
            }
        }
    }
    {
        std::size_t t = m.raw_index(dm, 1, 1);
        double loop = coef[m.pair_id(1, 1)];
        double u_cost = (top_cost + H[t]) / (1.0 - loop);
        double u_time = (1.0 + T[t]) / (1.0 - loop);
        H[m.raw_index(dm, 0, 0)] = u_cost;
        T[m.raw_index(dm, 0, 0)] = u_time;
        for (int b = len; b >= 1; --b) {
            for (int l = (b == len ? 1 : 0); l <= b; ++l) {
                std::size_t idx = m.raw_index(dm, b, l);
                double c = coef[m.pair_id(b, l)];
                H[idx] += c * u_cost;
                T[idx] += c * u_time;
            }
        }
    }

    // Lower layers only reference equal or higher d, with the in-layer
    // targets (d, 0, 0) and (d, b, 0) already processed when beta = 0.
    for (int d = dm - 1; d >= 1; --d) {
        const double cost = m.stage_cost(d);
        {
            std::size_t idx = m.raw_index(d, 0, 0);
            std::size_t t = m.raw_index(d + 1, 1, 1);
            H[idx] = cost + H[t];
            T[idx] = 1.0 + T[t];
        }
        for (int b = std::min(d, len); b >= 1; --b) {
            for (int l = (b == len ? 1 : 0); l <= b; ++l) {
                std::size_t idx = m.raw_index(d, b, l);
                if (policy[idx] == 0) {
                    std::size_t t = m.raw_index(d + 1, b + 1, l + 1);
                    H[idx] = cost + H[t];
                    T[idx] = 1.0 + T[t];
                } else {
                    std::size_t pid = m.pair_id(b, l);
                    int dp = std::min(d + beta, dm);
                    double h = cost;
                    double t_acc = 1.0;
                    if (m.stale_[pid] > 0.0) {
                        std::size_t t = m.raw_index(dp, 0, 0);
                        h += m.stale_[pid] * H[t];
                        t_acc += m.stale_[pid] * T[t];
                    }
                    if (m.cont_[pid] > 0.0) {
                        std::size_t t = m.raw_index(dp, b, 0);
                        h += m.cont_[pid] * H[t];
                        t_acc += m.cont_[pid] * T[t];
                    }
                    H[idx] = h;
                    T[idx] = t_acc;
                }
            }
        }
    }
}

double ModelOps::gain(const MdpModel& m, const std::vector<double>& cost_to_reset,
                      const std::vector<double>& time_to_reset) {
    std::size_t t = m.raw_index(std::min(1, m.d_max_), 1, 1);
    return (m.stage_cost(0) + cost_to_reset[t]) / (1.0 + time_to_reset[t]);
}

std::size_t ModelOps::improve(const MdpModel& m, const std::vector<double>& h,
                              std::vector<std::uint8_t>& policy) {
    const int len = m.len_;
    const int dm = m.d_max_;
    const int beta = m.beta_;
    std::size_t changed = 0;
    for (int b = 1; b < len; ++b) {
        for (int l = 1; l <= b; ++l) {
            std::size_t pid = m.pair_id(b, l);
            std::size_t base = m.pair_start_[pid];
            std::size_t send_base = m.pair_start_[m.pair_id(b + 1, l + 1)];
            std::size_t cont_base = m.pair_start_[m.pair_id(b, 0)];
            const double stale = m.stale_[pid];
            const double cont = m.cont_[pid];
            for (int d = b; d <= dm; ++d) {
                std::size_t idx = base + static_cast<std::size_t>(d - b);
                int dn = std::min(d + 1, dm);
                int dp = std::min(d + beta, dm);
                double q_send = h[send_base + static_cast<std::size_t>(dn - b - 1)];
                double q_stop = stale * h[static_cast<std::size_t>(dp)];
                if (cont > 0.0) {
                    q_stop += cont * h[cont_base + static_cast<std::size_t>(dp - b)];
                }
                if (policy[idx] == 0) {
                    if (q_stop < q_send) {
                        policy[idx] = 1;
                        ++changed;
                    }
                } else if (q_send < q_stop) {
                    policy[idx] = 0;
                    ++changed;
                }
            }
        }
    }
    return changed;
}

std::pair<double, double> ModelOps::sweep(const MdpModel& m, const std::vector<double>& value,
                                          std::vector<double>& next, std::vector<std::uint8_t>& policy,
                                          double damping) {
    const int len = m.len_;
    const int dm = m.d_max_;
    const int beta = m.beta_;
    const double keep = 1.0 - damping;
    double shift = 0.0;
    double diff_min = std::numeric_limits<double>::infinity();
    double diff_max = -std::numeric_limits<double>::infinity();
    double gain_at_reset = 0.0;
    for (int b = 0; b <= len; ++b) {
        for (int l = (b == len ? 1 : 0); l <= b; ++l) {
            std::size_t pid = m.pair_id(b, l);
            std::size_t base = m.pair_start_[pid];
            int forced = m.forced_action(b, l);
            std::size_t send_base = b < len ? m.pair_start_[m.pair_id(b + 1, l + 1)] : 0;
            std::size_t cont_base = l >= 1 ? m.pair_start_[m.pair_id(b, 0)] : 0;
            const double stale = m.stale_[pid];
            const double cont = m.cont_[pid];
            for (int d = b; d <= dm; ++d) {
                std::size_t idx = base + static_cast<std::size_t>(d - b);
                const double cost = m.stage_cost(d);
                double best;
                int act;
                if (forced == 0) {
                    int dn = std::min(d + 1, dm);
                    best = cost + value[send_base + static_cast<std::size_t>(dn - b - 1)];
                    act = 0;
                } else {
                    int dp = std::min(d + beta, dm);
                    double stop = cost + stale * value[static_cast<std::size_t>(dp)];
                    if (cont > 0.0) {
                        stop += cont * value[cont_base + static_cast<std::size_t>(dp - b)];
                    }
                    if (forced == 1) {
                        best = stop;
                        act = 1;
                    } else {
                        int dn = std::min(d + 1, dm);
                        double send = cost + value[send_base + static_cast<std::size_t>(dn - b - 1)];
                        if (stop < send) {
                            best = stop;
                            act = 1;
                        } else {
                            best = send;
                            act = 0;
                        }
                    }
                }
                double raw = keep * value[idx] + damping * best;
                if (idx == 0) {
                    shift = raw;
                    gain_at_reset = best;
                }
                double updated = raw - shift;
                next[idx] = updated;
                double diff = updated - value[idx];
                diff_min = std::min(diff_min, diff);
                diff_max = std::max(diff_max, diff);
                policy[idx] = static_cast<std::uint8_t>(act);
            }
        }
    }
    return {diff_max - diff_min, gain_at_reset};
}

MdpModel build_aoii_mdp(const SourceModel& source, const DecodePmf& pmf, const MdpBuildConfig& cfg) {
    const int len = pmf.max_len();
    std::vector<double> same_l(static_cast<std::size_t>(len) + 1);
    std::vector<double> same_lb(static_cast<std::size_t>(len) + 1);
    for (int l = 0; l <= len; ++l) {
        same_l[static_cast<std::size_t>(l)] = source.p_same(l);
        same_lb[static_cast<std::size_t>(l)] = source.p_same(static_cast<std::int64_t>(l) + cfg.beta);
    }
    double offset = feedback_penalty(source, cfg.beta);
    return ModelOps::make(pmf, cfg, std::move(same_l), std::move(same_lb), offset, false);
}

MdpModel build_delay_mdp(const DecodePmf& pmf, const MdpBuildConfig& cfg) {
    const int len = pmf.max_len();
    std::vector<double> ones(static_cast<std::size_t>(len) + 1, 1.0);
    return ModelOps::make(pmf, cfg, ones, ones, 0.0, true);
}

SolveResult rvi_solve(const MdpModel& model, const SolveOptions& opts) {
    if (!(opts.damping > 0.0) || opts.damping > 1.0) {
        throw std::invalid_argument("damping must be in (0, 1]");
    }
    if (!(opts.tol > 0.0)) {
        throw std::invalid_argument("tol must be positive");
    }
    if (opts.max_iter < 1) {
        throw std::invalid_argument("max_iter must be >= 1");
    }
    const std::size_t n = model.state_count();
    std::vector<double> value;
    std::vector<double> next;
    std::vector<std::uint8_t> policy(n, 0);
    std::uint64_t improvements = 0;
    bool warm = opts.warm_start == 1 || (opts.warm_start == -1 && n > kWarmStartThreshold);
    if (warm) {
        model.for_each_state([&](std::size_t i, int /*d*/, int b, int l) {
            policy[i] = model.forced_action(b, l) == 0 ? 0 : 1;
        });
        for (int round = 0; round < 100; ++round) {
            ModelOps::evaluate_policy(model, policy, value, next);
            double g = ModelOps::gain(model, value, next);
            for (std::size_t i = 0; i < n; ++i) {
                value[i] -= g * next[i];
            }
            ++improvements;
            if (ModelOps::improve(model, value, policy) == 0) {
                break;
            }
        }
    } else {
        value.assign(n, 0.0);
        next.assign(n, 0.0);
    }
    const double target = opts.tol * opts.damping;
    for (std::uint64_t iter = 1; iter <= opts.max_iter; ++iter) {
        auto [span, gain] = ModelOps::sweep(model, value, next, policy, opts.damping);
        value.swap(next);
        if (span <= target) {
            SolveResult result;
            result.average_cost = gain;
            result.span = span;
            result.iterations = iter;
            result.improvements = improvements;
            result.policy = std::move(policy);
            result.value = std::move(value);
            return result;
        }
        if (iter == opts.max_iter) {
            std::ostringstream msg;
            msg << "value iteration span " << span << " is above tolerance " << target << " after "
                << iter << " sweeps";
            throw ConvergenceError(msg.str(), span);
        }
    }
    throw ConvergenceError("value iteration ran zero sweeps", 0.0);
}

void check_policy(const MdpModel& model, const std::vector<std::uint8_t>& policy) {
    ModelOps::validate_policy(model, policy);
}

double policy_average_cost(const MdpModel& model, const std::vector<std::uint8_t>& policy) {
    ModelOps::validate_policy(model, policy);
    std::vector<double> cost_to_reset;
    std::vector<double> time_to_reset;
    ModelOps::evaluate_policy(model, policy, cost_to_reset, time_to_reset);
    return ModelOps::gain(model, cost_to_reset, time_to_reset);
}

FeedbackSequence extract_feedback_sequence(const MdpModel& model, const std::vector<std::uint8_t>& policy) {
    ModelOps::validate_policy(model, policy);
    FeedbackSequence seq;
    int d = 0;
    int b = 0;
    int l = 0;
    const int len = model.max_len();
    const int guard = 2 * len + 2;
    for (int step = 0; step < guard; ++step) {
        if (b == len) {
            seq.push_back(l);
            return seq;
        }
        if (policy[model.index(d, b, l)] == 0) {
            d = std::min(d + 1, model.age_cap());
            ++b;
            ++l;
        } else {
            seq.push_back(l);
            l = 0;
            d = std::min(d + model.beta(), model.age_cap());
        }
    }
    throw std::logic_error("feedback sequence walk did not terminate");
}

std::vector<std::uint8_t> sequence_policy(const MdpModel& model, const FeedbackSequence& seq) {
    if (seq.empty()) {
        throw std::invalid_argument("feedback sequence must not be empty");
    }
    std::vector<int> boundaries;
    int total = 0;
    for (int nu : seq) {
        if (nu < 1) {
            throw std::invalid_argument("feedback sequence entries must be >= 1");
        }
        total += nu;
        boundaries.push_back(total);
    }
    if (total != model.max_len()) {
        throw std::invalid_argument("feedback sequence must sum to max_len()");
    }
    std::vector<std::uint8_t> policy(model.state_count(), 0);
    model.for_each_state([&](std::size_t i, int /*d*/, int b, int l) {
        if (b == model.max_len()) {
            policy[i] = 1;
            return;
        }
        if (l == 0) {
            policy[i] = 0;
            return;
        }
        auto it = std::upper_bound(boundaries.begin(), boundaries.end(), b - l);
        policy[i] = (it != boundaries.end() && *it == b) ? 1 : 0;
    });
    return policy;
}

} // namespace aoii
