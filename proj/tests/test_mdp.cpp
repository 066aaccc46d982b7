#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "aoii_vlsf/channel.hpp"
#include "aoii_vlsf/mdp.hpp"
#include "aoii_vlsf/source.hpp"

using aoii::ConvergenceError;
using aoii::DecodePmf;
using aoii::FeedbackSequence;
using aoii::MdpBuildConfig;
using aoii::MdpModel;
using aoii::SolveOptions;
using aoii::SolveResult;
using aoii::SourceModel;
using aoii::build_aoii_mdp;
using aoii::build_delay_mdp;
using aoii::extract_feedback_sequence;
using aoii::policy_average_cost;
using aoii::rvi_solve;
using aoii::sequence_policy;

namespace {

MdpModel reference_model(int beta = 1, int d_max = 9) {
    SourceModel source(1, 0.995);
    DecodePmf pmf(std::vector<double>{0.2, 0.3, 0.5});
    MdpBuildConfig cfg;
    cfg.beta = beta;
    cfg.d_max = d_max;
    return build_aoii_mdp(source, pmf, cfg);
}

double branch_prob(const MdpModel& model, MdpModel::State from, int action, MdpModel::State to) {
    for (const auto& br : model.branches(from, action)) {
        if (br.to.d == to.d && br.to.b == to.b && br.to.l == to.l) {
            return br.prob;
        }
    }
    return 0.0;
}

// Policy with every free state's action given by choose(d, b, l); forced
// actions are kept.
template <typename Fn>
std::vector<std::uint8_t> policy_from_rule(const MdpModel& model, Fn&& choose) {
    std::vector<std::uint8_t> policy(model.state_count(), 0);
    model.for_each_state([&](std::size_t i, int d, int b, int l) {
        int forced = model.forced_action(b, l);
        policy[i] = forced >= 0 ? static_cast<std::uint8_t>(forced)
                                : static_cast<std::uint8_t>(choose(d, b, l) ? 1 : 0);
    });
    return policy;
}

// Exact average cost of a fixed policy from the stationary distribution of
// its chain, solved densely. Independent of the first passage machinery.
double stationary_average_cost(const MdpModel& model, const std::vector<std::uint8_t>& policy) {
    const std::size_t n = model.state_count();
    std::vector<double> p(n * n, 0.0);
    std::vector<double> cost(n, 0.0);
    model.for_each_state([&](std::size_t i, int d, int b, int l) {
        cost[i] = model.stage_cost(d);
        for (const auto& br : model.branches(MdpModel::State{d, b, l}, policy[i])) {
            std::size_t j = model.index(br.to.d, br.to.b, br.to.l);
            p[i * n + j] += br.prob;
        }
    });
    // Solve pi (P - I) = 0 with sum(pi) = 1, as the transposed system.
    std::vector<double> a(n * n, 0.0);
    std::vector<double> rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a[i * n + j] = p[j * n + i] - (i == j ? 1.0 : 0.0);
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        a[(n - 1) * n + j] = 1.0;
    }
    rhs[n - 1] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row) {
            if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col])) {
                pivot = row;
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            std::swap(a[col * n + j], a[pivot * n + j]);
        }
        std::swap(rhs[col], rhs[pivot]);
        REQUIRE(std::abs(a[col * n + col]) > 1e-13);
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col) {
                continue;
            }
            double factor = a[row * n + col] / a[col * n + col];
            if (factor == 0.0) {
                continue;
            }
            for (std::size_t j = col; j < n; ++j) {
                a[row * n + j] -= factor * a[col * n + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    double average = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        average += (rhs[i] / a[i * n + i]) * cost[i];
    }
    return average;
}

} // namespace

TEST_CASE("state layout indexes every state exactly once") {
    MdpModel model = reference_model();
    std::size_t expected = 0;
    model.for_each_state([&](std::size_t i, int d, int b, int l) {
        CHECK(i == expected);
        CHECK(model.valid_state(d, b, l));
        CHECK(model.index(d, b, l) == i);
        ++expected;
    });
    CHECK(expected == model.state_count());
    CHECK(model.index(0, 0, 0) == 0);
    CHECK_FALSE(model.valid_state(1, 2, 1));   // d below b
    CHECK_FALSE(model.valid_state(3, 3, 0));   // excluded boundary pair
    CHECK_FALSE(model.valid_state(10, 1, 1));  // d above the cap
    CHECK_FALSE(model.valid_state(2, 2, 3));   // l above b
    CHECK_THROWS_AS(model.index(1, 2, 1), std::invalid_argument);
}

TEST_CASE("forced actions cover the boundary states") {
    MdpModel model = reference_model();
    CHECK(model.forced_action(0, 0) == 0);
    CHECK(model.forced_action(2, 0) == 0);
    CHECK(model.forced_action(3, 1) == 1);
    CHECK(model.forced_action(3, 3) == 1);
    CHECK(model.forced_action(2, 1) == -1);
    CHECK(model.forced_action(1, 1) == -1);
}

TEST_CASE("feedback request branches carry hand computed probabilities") {
    MdpModel model = reference_model();
    CHECK(model.cost_offset() == doctest::Approx(0.005).epsilon(1e-12));

    // Stop at the final length: the packet always decodes and the age
    // resets iff the source kept the sampled value for the 3 round slots.
    auto full = model.branches(MdpModel::State{5, 3, 3}, 1);
    REQUIRE(full.size() == 2);
    CHECK(branch_prob(model, {5, 3, 3}, 1, {0, 0, 0}) == doctest::Approx(0.9851495).epsilon(1e-10));
    CHECK(branch_prob(model, {5, 3, 3}, 1, {6, 0, 0}) == doctest::Approx(0.0148505).epsilon(1e-10));
    CHECK(branch_prob(model, {5, 3, 3}, 1, {6, 3, 0}) == 0.0);

    // Stop midway: success probability 0.5, both match windows known.
    CHECK(branch_prob(model, {5, 2, 2}, 1, {0, 0, 0}) == doctest::Approx(0.495025).epsilon(1e-10));
    CHECK(branch_prob(model, {5, 2, 2}, 1, {6, 2, 0}) == doctest::Approx(0.49257475).epsilon(1e-10));
    CHECK(branch_prob(model, {5, 2, 2}, 1, {6, 0, 0}) == doctest::Approx(0.01240025).epsilon(1e-10));

    auto send = model.branches(MdpModel::State{5, 2, 2}, 0);
    REQUIRE(send.size() == 1);
    CHECK(send[0].prob == 1.0);
    CHECK(send[0].to.d == 6);
    CHECK(send[0].to.b == 3);
    CHECK(send[0].to.l == 3);

    CHECK_THROWS_AS(model.branches(MdpModel::State{5, 3, 3}, 0), std::invalid_argument);
    CHECK_THROWS_AS(model.branches(MdpModel::State{2, 2, 0}, 1), std::invalid_argument);
}

TEST_CASE("branch distributions are stochastic across the whole state space") {
    for (int beta : {0, 1, 2}) {
        MdpModel model = reference_model(beta, 8);
        model.for_each_state([&](std::size_t, int d, int b, int l) {
            for (int action : {0, 1}) {
                int forced = model.forced_action(b, l);
                if (forced >= 0 && forced != action) {
                    continue;
                }
                double sum = 0.0;
                for (const auto& br : model.branches(MdpModel::State{d, b, l}, action)) {
                    CHECK(br.prob > 0.0);
                    CHECK(model.valid_state(br.to.d, br.to.b, br.to.l));
                    sum += br.prob;
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            }
        });
    }
}

TEST_CASE("cost counter saturates at the cap") {
    MdpModel model = reference_model(2, 6);
    auto send = model.branches(MdpModel::State{6, 1, 1}, 0);
    REQUIRE(send.size() == 1);
    CHECK(send[0].to.d == 6);
    for (const auto& br : model.branches(MdpModel::State{6, 2, 2}, 1)) {
        CHECK(br.to.d <= 6);
    }
}

TEST_CASE("build rejects inconsistent settings") {
    SourceModel source(1, 0.995);
    DecodePmf pmf(std::vector<double>{0.2, 0.3, 0.5});
    MdpBuildConfig cfg;
    cfg.beta = -1;
    CHECK_THROWS_AS(build_aoii_mdp(source, pmf, cfg), std::invalid_argument);
    cfg.beta = 2;
    cfg.d_max = 4; // below max_len + beta = 5
    CHECK_THROWS_AS(build_aoii_mdp(source, pmf, cfg), std::invalid_argument);
    cfg.d_max = -1;
    cfg.state_cap = 10;
    CHECK_THROWS_AS(build_aoii_mdp(source, pmf, cfg), std::runtime_error);
}

TEST_CASE("deterministic single round packet halves the delay objective") {
    DecodePmf pmf(std::vector<double>{1.0});
    for (int beta : {0, 1, 3}) {
        MdpBuildConfig cfg;
        cfg.beta = beta;
        MdpModel model = build_delay_mdp(pmf, cfg);
        SolveResult result = rvi_solve(model);
        CHECK(result.average_cost == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(policy_average_cost(model, result.policy) == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("policy evaluation matches a dense stationary distribution solve") {
    SourceModel source(1, 0.9);
    DecodePmf pmf(std::vector<double>{0.4, 0.6});
    MdpBuildConfig cfg;
    cfg.beta = 1;
    cfg.d_max = 3;
    MdpModel model = build_aoii_mdp(source, pmf, cfg);
    REQUIRE(model.state_count() == 14);

    auto always_stop = policy_from_rule(model, [](int, int, int) { return true; });
    auto never_stop = policy_from_rule(model, [](int, int, int) { return false; });
    auto age_gated = policy_from_rule(model, [](int d, int, int) { return d >= 2; });
    for (const auto& policy : {always_stop, never_stop, age_gated}) {
        double exact = policy_average_cost(model, policy);
        double oracle = stationary_average_cost(model, policy);
        CHECK(exact == doctest::Approx(oracle).epsilon(1e-10));
    }

    MdpBuildConfig delay_cfg;
    delay_cfg.beta = 0;
    delay_cfg.d_max = 4;
    MdpModel delay_model = build_delay_mdp(pmf, delay_cfg);
    auto stop_all = policy_from_rule(delay_model, [](int, int, int) { return true; });
    CHECK(policy_average_cost(delay_model, stop_all) ==
          doctest::Approx(stationary_average_cost(delay_model, stop_all)).epsilon(1e-10));
}

TEST_CASE("value iteration finds the brute force optimum") {
    SourceModel source(1, 0.95);
    DecodePmf pmf(std::vector<double>{0.3, 0.7});
    MdpBuildConfig cfg;
    cfg.beta = 1;
    cfg.d_max = 4;
    MdpModel model = build_aoii_mdp(source, pmf, cfg);

    std::vector<std::size_t> free_states;
    model.for_each_state([&](std::size_t i, int, int b, int l) {
        if (model.forced_action(b, l) < 0) {
            free_states.push_back(i);
        }
    });
    REQUIRE(free_states.size() == 4);

    auto base = policy_from_rule(model, [](int, int, int) { return false; });
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << free_states.size()); ++mask) {
        auto policy = base;
        for (std::size_t bit = 0; bit < free_states.size(); ++bit) {
            policy[free_states[bit]] = (mask >> bit) & 1u;
        }
        best = std::min(best, policy_average_cost(model, policy));
    }

    SolveOptions opts;
    opts.tol = 1e-11;
    SolveResult result = rvi_solve(model, opts);
    CHECK(result.average_cost == doctest::Approx(best).epsilon(1e-8));
    CHECK(policy_average_cost(model, result.policy) == doctest::Approx(best).epsilon(1e-8));
}

TEST_CASE("solver output is well formed") {
    MdpModel model = reference_model();
    SolveResult result = rvi_solve(model);
    CHECK(result.value.size() == model.state_count());
    CHECK(result.policy.size() == model.state_count());
    CHECK(result.value[0] == 0.0);
    CHECK(result.span <= 1e-9);
    CHECK(result.iterations >= 1);
    model.for_each_state([&](std::size_t i, int, int b, int l) {
        int forced = model.forced_action(b, l);
        if (forced >= 0) {
            CHECK(result.policy[i] == static_cast<std::uint8_t>(forced));
        }
    });
    // The average cost can never fall below the per stage offset.
    CHECK(result.average_cost >= model.cost_offset());
}

TEST_CASE("warm started and cold solves agree") {
    SourceModel source(2, 0.99);
    std::vector<double> probs(12);
    double mass = 1.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        probs[i] = 0.3 * mass;
        mass -= probs[i];
    }
    probs.back() = mass;
    DecodePmf pmf(probs);
    MdpBuildConfig cfg;
    cfg.beta = 1;
    MdpModel model = build_aoii_mdp(source, pmf, cfg);

    SolveOptions cold;
    cold.warm_start = 0;
    cold.tol = 1e-10;
    SolveOptions warm;
    warm.warm_start = 1;
    warm.tol = 1e-10;
    SolveResult a = rvi_solve(model, cold);
    SolveResult b = rvi_solve(model, warm);
    CHECK(a.average_cost == doctest::Approx(b.average_cost).epsilon(1e-9));
    CHECK(b.improvements >= 1);
    CHECK(b.iterations < a.iterations);
    CHECK(policy_average_cost(model, a.policy) == doctest::Approx(policy_average_cost(model, b.policy)).epsilon(1e-9));
}

TEST_CASE("iteration budget violations raise a convergence error") {
    MdpModel model = reference_model();
    SolveOptions opts;
    opts.max_iter = 2;
    opts.warm_start = 0;
    CHECK_THROWS_AS(rvi_solve(model, opts), ConvergenceError);
    try {
        rvi_solve(model, opts);
    } catch (const ConvergenceError& e) {
        CHECK(e.span() > 0.0);
    }
}

TEST_CASE("solver rejects bad options") {
    MdpModel model = reference_model();
    SolveOptions opts;
    opts.damping = 0.0;
    CHECK_THROWS_AS(rvi_solve(model, opts), std::invalid_argument);
    opts.damping = 1.5;
    CHECK_THROWS_AS(rvi_solve(model, opts), std::invalid_argument);
    opts.damping = 0.95;
    opts.tol = 0.0;
    CHECK_THROWS_AS(rvi_solve(model, opts), std::invalid_argument);
    opts.tol = 1e-9;
    opts.max_iter = 0;
    CHECK_THROWS_AS(rvi_solve(model, opts), std::invalid_argument);
}

TEST_CASE("policies must respect forced actions") {
    MdpModel model = reference_model();
    std::vector<std::uint8_t> wrong_size(3, 0);
    CHECK_THROWS_AS(policy_average_cost(model, wrong_size), std::invalid_argument);
    auto policy = policy_from_rule(model, [](int, int, int) { return true; });
    policy[model.index(3, 3, 3)] = 0; // forced stop state
    CHECK_THROWS_AS(policy_average_cost(model, policy), std::invalid_argument);
    auto stray = policy_from_rule(model, [](int, int, int) { return true; });
    stray[model.index(2, 2, 2)] = 2;
    CHECK_THROWS_AS(policy_average_cost(model, stray), std::invalid_argument);
}

TEST_CASE("feedback sequences can be read off a policy") {
    SourceModel source(1, 0.995);
    DecodePmf uniform6(std::vector<double>(6, 1.0 / 6.0));
    MdpBuildConfig cfg;
    cfg.beta = 1;
    MdpModel model = build_aoii_mdp(source, uniform6, cfg);

    auto every_two = policy_from_rule(model, [](int, int, int l) { return l >= 2; });
    CHECK(extract_feedback_sequence(model, every_two) == FeedbackSequence{2, 2, 2});

    auto never = policy_from_rule(model, [](int, int, int) { return false; });
    CHECK(extract_feedback_sequence(model, never) == FeedbackSequence{6});

    auto ones = sequence_policy(model, FeedbackSequence{1, 1, 1, 1, 1, 1});
    CHECK(extract_feedback_sequence(model, ones) == FeedbackSequence{1, 1, 1, 1, 1, 1});

    DecodePmf uniform7(std::vector<double>(7, 1.0 / 7.0));
    MdpModel model7 = build_aoii_mdp(source, uniform7, cfg);
    auto mixed = sequence_policy(model7, FeedbackSequence{3, 3, 1});
    CHECK(extract_feedback_sequence(model7, mixed) == FeedbackSequence{3, 3, 1});

    CHECK_THROWS_AS(sequence_policy(model, FeedbackSequence{}), std::invalid_argument);
    CHECK_THROWS_AS(sequence_policy(model, FeedbackSequence{2, 2}), std::invalid_argument);
    CHECK_THROWS_AS(sequence_policy(model, FeedbackSequence{0, 6}), std::invalid_argument);
}

TEST_CASE("sequence policies cost the same under both evaluations") {
    SourceModel source(1, 0.99);
    DecodePmf pmf(std::vector<double>{0.1, 0.2, 0.3, 0.4});
    MdpBuildConfig cfg;
    cfg.beta = 1;
    cfg.d_max = 10;
    MdpModel model = build_aoii_mdp(source, pmf, cfg);
    for (const FeedbackSequence& seq :
         {FeedbackSequence{4}, FeedbackSequence{2, 2}, FeedbackSequence{1, 1, 1, 1}, FeedbackSequence{3, 1}}) {
        auto policy = sequence_policy(model, seq);
        double exact = policy_average_cost(model, policy);
        double oracle = stationary_average_cost(model, policy);
        CHECK(exact == doctest::Approx(oracle).epsilon(1e-10));
    }
}
