#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "rmab/examples.hpp"
#include "rmab/meanfield.hpp"
#include "rmab/policy.hpp"
#include "rmab/rng.hpp"

using namespace rmab;

namespace {

// Tiny deterministic instance: one cluster, chain 0 -> 1 -> 2 under the free
// action, rewards 0/1/2 by state, so the unique plan earns 3 at gamma = 1.
GeneratedInstance forced_chain() {
    gen::StationaryBuilder b(1, 3, 1, 3, 1.0);
    b.cluster_size(0, 1).budget(0.0);
    b.p(0, 0, 0, 1, 1.0).p(0, 0, 1, 2, 1.0).p(0, 0, 2, 2, 1.0);
    b.reward(0, 0, 0, 0.0).reward(0, 1, 0, 1.0).reward(0, 2, 0, 2.0);
    GeneratedInstance gi{std::move(b).build(), StateCount(1, 3)};
    gi.start.at(0, 0) = 1;
    return gi;
}

// Two states, two actions; action 1 pays 1 and moves 0 -> (0.3, 0.7).
GeneratedInstance binomial_fragment() {
    gen::StationaryBuilder b(1, 2, 2, 2, 1.0);
    b.cluster_size(0, 5).budget(5.0);
    b.p(0, 0, 0, 0, 1.0).p(0, 0, 1, 1, 1.0);
    b.p(0, 1, 0, 0, 0.3).p(0, 1, 0, 1, 0.7);
    b.p(0, 1, 1, 1, 1.0);
    b.reward(0, 0, 1, 1.0);
    b.cost(0, 0, 1, 1.0).cost(0, 1, 1, 1.0);
    GeneratedInstance gi{std::move(b).build(), StateCount(1, 2)};
    gi.start.at(0, 0) = 5;
    return gi;
}

}  // namespace

TEST_CASE("builder emits the expected variable and constraint counts") {
    // K=1, |S|=2, |A|=2, T=3: 3*(2 + 2*2) = 18 variables;
    // 2 init + 2*2 flow + 3 budget + 3*2 consistency = 15 rows.
    auto gi = synthetic_clustered(1, 2, 2, 4, 3, 11);
    LinearProgram lp = build_meanfield_lp(gi.instance, gi.start, 0);
    REQUIRE(lp.num_vars() == 18);
    REQUIRE(lp.rows.size() == 15);
    // Index map is a bijection onto columns.
    std::set<int> cols;
    for (const auto& [name, idx] : lp.var_index) {
        (void)name;
        cols.insert(idx);
    }
    REQUIRE(static_cast<int>(cols.size()) == lp.num_vars());
}

TEST_CASE("builder at the last step has no flow rows and one budget row") {
    auto gi = synthetic_clustered(1, 2, 2, 4, 3, 11);
    LinearProgram lp = build_meanfield_lp(gi.instance, gi.start, 2);
    REQUIRE(lp.num_vars() == 6);
    // 2 init + 0 flow + 1 budget + 2 consistency
    REQUIRE(lp.rows.size() == 5);
}

TEST_CASE("undiscounted objective weights are equal across steps") {
    auto gi = synthetic_clustered(1, 2, 2, 4, 3, 11);
    gi.instance.discount = 1.0;
    LinearProgram lp = build_meanfield_lp(gi.instance, gi.start, 0);
    double r = gi.instance.reward(0, 0, 0, 0);
    double w0 = lp.objective[lp.var_index.at("alpha[0][0][0][0]")];
    double w2 = lp.objective[lp.var_index.at("alpha[2][0][0][0]")];
    REQUIRE_THAT(w0, Catch::Matchers::WithinRel(r, 1e-12));
    REQUIRE(w0 == w2);
}

TEST_CASE("objective discount anchors at absolute time for sub-plans") {
    auto gi = synthetic_clustered(1, 2, 2, 4, 4, 11);
    gi.instance.discount = 0.5;
    LinearProgram lp = build_meanfield_lp(gi.instance, gi.start, 2);
    double w = lp.objective[lp.var_index.at("alpha[2][0][0][1]")];
    REQUIRE_THAT(w, Catch::Matchers::WithinRel(0.25 * gi.instance.reward(2, 0, 0, 1), 1e-12));
}

TEST_CASE("invalid start time is rejected") {
    auto gi = synthetic_clustered(1, 2, 2, 4, 3, 11);
    REQUIRE_THROWS_AS(build_meanfield_lp(gi.instance, gi.start, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(build_meanfield_lp(gi.instance, gi.start, -1), std::invalid_argument);
}

TEST_CASE("fluid step from five arms reproduces the expected split") {
    auto gi = binomial_fragment();
    auto [value, plan] = mean_field_value(gi.instance, gi.start, 0);
    // All five arms take the paying action; the fluid next state is (1.5, 3.5).
    REQUIRE_THAT(plan.alpha_at(0).at(0, 0, 1), Catch::Matchers::WithinAbs(5.0, 1e-7));
    REQUIRE_THAT(plan.mu_at(1).at(0, 0), Catch::Matchers::WithinAbs(1.5, 1e-7));
    REQUIRE_THAT(plan.mu_at(1).at(0, 1), Catch::Matchers::WithinAbs(3.5, 1e-7));
    REQUIRE(value >= 5.0 - 1e-7);
}

TEST_CASE("all-zero rewards give objective zero") {
    auto gi = synthetic_clustered(2, 2, 2, 10, 3, 5);
    for (auto& r : gi.instance.rewards) r = 0.0;
    auto [value, plan] = mean_field_value(gi.instance, gi.start, 0);
    (void)plan;
    REQUIRE_THAT(value, Catch::Matchers::WithinAbs(0.0, 1e-9));
}

TEST_CASE("deterministic forced chain is priced exactly") {
    auto gi = forced_chain();
    auto [value, plan] = mean_field_value(gi.instance, gi.start, 0);
    (void)plan;
    REQUIRE_THAT(value, Catch::Matchers::WithinAbs(3.0, 1e-8));
}

TEST_CASE("fluid value dominates any feasible hand-built plan") {
    // Playing active on the reliable arm forever earns (1-eps) * sum gamma^t.
    double eps = 0.1, gamma = 0.99;
    int horizon = 50;
    auto gi = example1(1, eps, gamma, horizon);
    auto [value, plan] = mean_field_value(gi.instance, gi.start, 0);
    (void)plan;
    double feasible = 0;
    for (int t = 1; t < horizon; ++t) feasible += (1 - eps) * std::pow(gamma, t);
    REQUIRE(value >= feasible - 1e-7);
}

TEST_CASE("fluid mass is conserved per cluster across time") {
    auto gi = synthetic_clustered(2, 3, 2, 17, 6, 3);
    auto [value, plan] = mean_field_value(gi.instance, gi.start, 0);
    (void)value;
    for (int t = 0; t < gi.instance.horizon; ++t)
        for (int i = 0; i < 2; ++i)
            REQUIRE_THAT(plan.mu_at(t).cluster_total(i),
                         Catch::Matchers::WithinAbs(
                             static_cast<double>(gi.instance.cluster_sizes[i]), 1e-6));
    REQUIRE(plan.flow_residual <= 1e-7);
}

TEST_CASE("value scales linearly when arms, start, and budgets scale") {
    auto gi = synthetic_clustered(2, 2, 2, 9, 4, 21);
    auto [v1, p1] = mean_field_value(gi.instance, gi.start, 0);
    (void)p1;
    const int m = 3;
    auto scaled = gi;
    for (auto& n : scaled.instance.cluster_sizes) n *= m;
    for (auto& b : scaled.instance.budgets) b *= m;
    for (auto& c : scaled.start.counts) c *= m;
    auto [v2, p2] = mean_field_value(scaled.instance, scaled.start, 0);
    (void)p2;
    REQUIRE_THAT(v2, Catch::Matchers::WithinRel(m * v1, 1e-7));
}

TEST_CASE("value is Lipschitz in the start state") {
    auto gi = synthetic_clustered(2, 3, 2, 12, 4, 13);
    const auto& inst = gi.instance;
    double rmax = inst.reward_max();
    RngStream rng(404);
    for (int trial = 0; trial < 25; ++trial) {
        StateCount a(2, 3), b(2, 3);
        for (int i = 0; i < 2; ++i) {
            std::int64_t left_a = inst.cluster_sizes[i], left_b = inst.cluster_sizes[i];
            for (int s = 0; s < 2; ++s) {
                a.at(i, s) = static_cast<std::int64_t>(rng.below(left_a + 1));
                b.at(i, s) = static_cast<std::int64_t>(rng.below(left_b + 1));
                left_a -= a.at(i, s);
                left_b -= b.at(i, s);
            }
            a.at(i, 2) = left_a;
            b.at(i, 2) = left_b;
        }
        double delta = 0;
        for (std::size_t j = 0; j < a.counts.size(); ++j)
            delta += std::abs(static_cast<double>(a.counts[j] - b.counts[j]));
        auto [va, pa] = mean_field_value(inst, a, 0);
        auto [vb, pb] = mean_field_value(inst, b, 0);
        (void)pa;
        (void)pb;
        REQUIRE(std::abs(va - vb) <= inst.horizon * rmax * delta / 2 + 1e-7);
    }
}

TEST_CASE("floor rounding matches the hand trace") {
    // Cell with 3 arms, fluid split (1.6, 1.4), second action free:
    // floors give (1, 1), the leftover arm joins the free action -> (1, 2).
    gen::StationaryBuilder b(1, 1, 2, 2, 1.0);
    b.cluster_size(0, 3).budget(10.0);
    b.p(0, 0, 0, 0, 1.0).p(0, 1, 0, 0, 1.0);
    b.cost(0, 0, 0, 1.0);  // action 0 costs, action 1 is free
    RmabInstance inst = std::move(b).build();
    inst.zero_cost_action[0] = 1;
    StateCount mu(1, 1);
    mu.at(0, 0) = 3;
    FluidAction alpha(1, 1, 2);
    alpha.at(0, 0, 0) = 1.6;
    alpha.at(0, 0, 1) = 1.4;
    ActionCount out = floor_action(inst, 0, mu, alpha);
    REQUIRE(out.at(0, 0, 0) == 1);
    REQUIRE(out.at(0, 0, 1) == 2);
}

TEST_CASE("integral fluid actions are played exactly") {
    auto gi = binomial_fragment();
    auto [value, plan] = mean_field_value(gi.instance, gi.start, 0);
    (void)value;
    ActionCount out = floor_action(gi.instance, 0, gi.start, plan.alpha.front());
    REQUIRE(out.at(0, 0, 1) == 5);
    REQUIRE(out.at(0, 0, 0) == 0);
}

TEST_CASE("one-shot scaling floors against the realized occupancy") {
    // Planned occupancy 10 with split (5, 5); realized occupancy 8; action 1
    // free. floor(5 * 8/10) = 4 active, the remaining 4 arms go free.
    gen::StationaryBuilder b(1, 2, 2, 3, 1.0);
    b.cluster_size(0, 10).budget(5.0);
    // Action 0 (paying) moves mass 0 -> 1 with p = 0.5 so realized counts can
    // undershoot the plan; both actions keep state 1 absorbed.
    b.p(0, 0, 0, 0, 1.0);
    b.p(0, 1, 0, 0, 0.5).p(0, 1, 0, 1, 0.5);
    b.p(0, 0, 1, 1, 1.0).p(0, 1, 1, 1, 1.0);
    b.reward(0, 0, 1, 1.0);
    b.cost(0, 0, 1, 1.0).cost(0, 1, 1, 1.0);
    RmabInstance inst = std::move(b).build();
    StateCount start(1, 2);
    start.at(0, 0) = 10;

    OneShotMfpPolicy policy;
    policy.reset(inst, start);
    // The plan at t=0 plays the paying action on 5 of the 10 arms in state 0.
    REQUIRE_THAT(policy.plan().alpha_at(0).at(0, 0, 1),
                 Catch::Matchers::WithinAbs(5.0, 1e-7));
    StateCount realized(1, 2);
    realized.at(0, 0) = 8;
    realized.at(0, 1) = 2;
    RngStream rng(1);
    ActionCount out = policy.act(inst, 0, realized, rng);
    REQUIRE(out.at(0, 0, 1) == 4);  // floor(5 * 8/10)
    REQUIRE(out.at(0, 0, 0) == 4);  // leftovers to the zero-cost action
}

TEST_CASE("one-shot zero planned occupancy sends the cell to the free action") {
    gen::StationaryBuilder b(1, 2, 2, 2, 1.0);
    b.cluster_size(0, 4).budget(4.0);
    b.p(0, 0, 0, 0, 1.0).p(0, 0, 1, 1, 1.0);
    b.p(0, 1, 0, 0, 1.0).p(0, 1, 1, 1, 1.0);
    b.reward(0, 0, 1, 1.0);
    b.cost(0, 0, 1, 1.0).cost(0, 1, 1, 1.0);
    RmabInstance inst = std::move(b).build();
    StateCount start(1, 2);
    start.at(0, 0) = 4;
    OneShotMfpPolicy policy;
    policy.reset(inst, start);
    // Realized mass appears in state 1, which the plan gave zero occupancy.
    StateCount realized(1, 2);
    realized.at(0, 0) = 2;
    realized.at(0, 1) = 2;
    RngStream rng(1);
    ActionCount out = policy.act(inst, 0, realized, rng);
    REQUIRE(out.at(0, 1, 0) == 2);
    REQUIRE(out.at(0, 1, 1) == 0);
}

TEST_CASE("round_counts is exact on integral input") {
    std::vector<double> x = {2.0, 0.0, 3.0};
    auto z = round_counts(x, 5);
    REQUIRE(z == std::vector<std::int64_t>{2, 0, 3});
}

TEST_CASE("round_counts satisfies the enumeration oracle") {
    auto check = [](const std::vector<double>& x, std::int64_t m) {
        auto z = round_counts(x, m);
        std::int64_t sum = 0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            sum += z[j];
            REQUIRE(std::abs(static_cast<double>(z[j]) - x[j]) <= 1.0 + 1e-9);
            bool is_floor = z[j] == static_cast<std::int64_t>(std::floor(x[j] + 1e-12));
            bool is_ceil = z[j] == static_cast<std::int64_t>(std::ceil(x[j] - 1e-12));
            REQUIRE((is_floor || is_ceil));
        }
        REQUIRE(sum == m);
        return z;
    };
    auto z1 = check({0.5, 0.5, 1.0}, 2);
    // Enumerated admissible outputs: (1,0,1) and (0,1,1).
    bool ok1 = (z1 == std::vector<std::int64_t>{1, 0, 1}) ||
               (z1 == std::vector<std::int64_t>{0, 1, 1});
    REQUIRE(ok1);
    check({1.2, 0.3, 0.5}, 2);
    RngStream rng(88);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng.below(6));
        std::vector<double> x(n, 0.0);
        auto m = static_cast<std::int64_t>(rng.below(8));
        double left = static_cast<double>(m);
        for (int j = 0; j + 1 < n; ++j) {
            x[j] = left * rng.u01();
            left -= x[j];
        }
        x[n - 1] = left;
        check(x, m);
    }
}

TEST_CASE("round_counts rejects bad input") {
    REQUIRE_THROWS_AS(round_counts({-0.5, 1.5}, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(round_counts({0.5, 0.7}, 1), std::invalid_argument);
}

TEST_CASE("round_counts L1 behavior is recorded, not asserted") {
    // Only the sum and L-inf guarantees are contractual; the L1 distance is
    // measured here for the record.
    RngStream rng(3141);
    double worst_l1_over_half_n = 0;
    for (int trial = 0; trial < 500; ++trial) {
        int n = 2 + static_cast<int>(rng.below(8));
        std::vector<double> x(n, 0.0);
        auto m = static_cast<std::int64_t>(1 + rng.below(10));
        double left = static_cast<double>(m);
        for (int j = 0; j + 1 < n; ++j) {
            x[j] = left * rng.u01();
            left -= x[j];
        }
        x[n - 1] = left;
        auto z = round_counts(x, m);
        double l1 = 0;
        for (int j = 0; j < n; ++j) l1 += std::abs(static_cast<double>(z[j]) - x[j]);
        worst_l1_over_half_n = std::max(worst_l1_over_half_n, l1 / (n / 2.0));
    }
    WARN("observed worst L1 / (n/2) ratio: " << worst_l1_over_half_n);
    SUCCEED();
}

TEST_CASE("bucket_sample on integral entries is deterministic") {
    for (double u : {0.0, 0.25, 0.5, 0.99}) {
        auto picked = bucket_sample({1.0, 0.0, 1.0}, u);
        REQUIRE(picked == std::vector<int>{0, 2});
    }
}

TEST_CASE("bucket_sample marginals match inclusion probabilities") {
    RngStream rng(7);
    const int draws = 100000;
    SECTION("symmetric half/half") {
        int count0 = 0;
        for (int d = 0; d < draws; ++d) {
            auto picked = bucket_sample({0.5, 0.5}, rng.u01());
            REQUIRE(picked.size() == 1);
            if (picked[0] == 0) ++count0;
        }
        double p = static_cast<double>(count0) / draws;
        REQUIRE_THAT(p, Catch::Matchers::WithinAbs(0.5, 3 * 0.5 / std::sqrt(draws)));
    }
    SECTION("asymmetric 0.3/0.7") {
        int count0 = 0;
        for (int d = 0; d < draws; ++d) {
            auto picked = bucket_sample({0.3, 0.7}, rng.u01());
            REQUIRE(picked.size() == 1);
            if (picked[0] == 0) ++count0;
        }
        double sigma = std::sqrt(0.3 * 0.7 / draws);
        REQUIRE_THAT(static_cast<double>(count0) / draws,
                     Catch::Matchers::WithinAbs(0.3, 3 * sigma));
    }
    SECTION("always exactly k picks") {
        for (int trial = 0; trial < 500; ++trial) {
            std::vector<double> x = {0.2, 0.8, 0.5, 0.5, 1.0};
            auto picked = bucket_sample(x, rng.u01());
            REQUIRE(picked.size() == 3);
        }
    }
}

TEST_CASE("bucket_sample rejects bad input") {
    REQUIRE_THROWS_AS(bucket_sample({1.5, 0.5}, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(bucket_sample({0.5, 0.25}, 0.1), std::invalid_argument);
}

TEST_CASE("bucket_action is unbiased and integral fluid stays deterministic") {
    gen::StationaryBuilder b(1, 1, 2, 2, 1.0);
    b.cluster_size(0, 10).budget(10.0);
    b.p(0, 0, 0, 0, 1.0).p(0, 1, 0, 0, 1.0);
    b.cost(0, 0, 1, 1.0);
    RmabInstance inst = std::move(b).build();
    StateCount mu(1, 1);
    mu.at(0, 0) = 10;

    SECTION("integral allocation") {
        FluidAction alpha(1, 1, 2);
        alpha.at(0, 0, 0) = 4.0;
        alpha.at(0, 0, 1) = 6.0;
        RngStream rng(5);
        ActionCount out = bucket_action(inst, 0, mu, alpha, rng);
        REQUIRE(out.at(0, 0, 0) == 4);
        REQUIRE(out.at(0, 0, 1) == 6);
    }
    SECTION("fractional leftovers average to the fluid action") {
        FluidAction alpha(1, 1, 2);
        alpha.at(0, 0, 0) = 4.4;
        alpha.at(0, 0, 1) = 5.6;
        const int reps = 40000;
        double mean0 = 0;
        RngStream rng(6);
        for (int r = 0; r < reps; ++r) {
            RngStream step(rng.next());
            ActionCount out = bucket_action(inst, 0, mu, alpha, step);
            REQUIRE(out.at(0, 0, 0) + out.at(0, 0, 1) == 10);
            mean0 += static_cast<double>(out.at(0, 0, 0));
        }
        mean0 /= reps;
        double se = std::sqrt(0.4 * 0.6 / reps);
        REQUIRE_THAT(mean0, Catch::Matchers::WithinAbs(4.4, 4 * se));
    }
}

TEST_CASE("truncation horizon formulas") {
    auto gi = synthetic_clustered(1, 2, 2, 100, 4, 9, 0.9);
    REQUIRE(truncation_horizon(gi.instance) == 16);

    auto tiny = synthetic_clustered(1, 2, 2, 2, 4, 9, 0.9);
    REQUIRE(truncation_horizon(tiny.instance) == 3);

    auto big = synthetic_clustered(4, 2, 2, 1000, 4, 9, 0.9);
    double expect = std::sqrt(2000.0) / std::sqrt(std::log(2.0) * 8 + std::log(1.0 / 0.05)) + 1.0;
    REQUIRE(truncation_horizon(big.instance, 0.05) == static_cast<int>(std::ceil(expect)));

    auto undiscounted = synthetic_clustered(1, 2, 2, 10, 4, 9, 1.0);
    REQUIRE_THROWS_AS(truncation_horizon(undiscounted.instance), std::invalid_argument);
}
