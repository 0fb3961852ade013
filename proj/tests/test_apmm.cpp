#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "clm/apmm.hpp"
#include "clm/markets.hpp"

using namespace clm;

TEST_CASE("LMSR quotes and prices") {
    Apmm a = lmsr(2);
    CHECK(std::fabs(bundle_cost(a, {1.0, 0.0}) - 0.6201145069582775) < 1e-12);
    Vec p0 = instantaneous_prices(a);
    CHECK(max_abs_diff(p0, {0.5, 0.5}) < 1e-12);
    execute_trade(a, {1.0, 0.0});
    Vec p1 = instantaneous_prices(a);
    CHECK(std::fabs(p1[0] - 0.7310585786300049) < 1e-12);
    CHECK(std::fabs(p1[1] - 0.2689414213699951) < 1e-12);
}

TEST_CASE("buy then sell round trip costs exactly zero") {
    Apmm a = lmsr(3);
    Rng rng = named_stream(8, "roundtrip");
    for (int trial = 0; trial < 100; ++trial) {
        Vec r(3);
        for (double& v : r) v = 4.0 * u01(rng) - 2.0;
        TradeResult buy = execute_trade(a, r);
        TradeResult sell = execute_trade(a, -1.0 * r);
        CHECK(buy.cost + sell.cost == 0.0);
    }
}

TEST_CASE("settle_shares pays rho(X) dot bundle") {
    Apmm a = lmsr(2);
    auto pay = settle_shares(a, {{"a", {2.0, 0.5}}, {"b", {0.0, 1.0}}}, Outcome{0});
    CHECK(pay["a"] == 2.0);
    CHECK(pay["b"] == 0.0);
    CHECK_THROWS_AS(settle_shares(a, {}, Outcome{5}), DomainError);
}

TEST_CASE("profit equals the divergence difference") {
    SECTION("lmsr") {
        Apmm a = lmsr(3, 2.0);
        Rng rng = named_stream(13, "dual");
        for (int trial = 0; trial < 500; ++trial) {
            Vec s(3), r(3);
            for (double& v : s) v = 2.0 * u01(rng) - 1.0;
            for (double& v : r) v = 2.0 * u01(rng) - 1.0;
            Vec sp = s + r;
            int X = static_cast<int>(uniform_index(rng, 3));
            double direct = dot(a.payoff(Outcome{X}), r) -
                            (a.cost_potential.value(sp) - a.cost_potential.value(s));
            double dual = profit_as_divergence(a, s, sp, Outcome{X});
            CHECK(std::fabs(direct - dual) < 1e-9);
        }
    }
    SECTION("quadratic") {
        Apmm a = quadratic_market({{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}});
        Rng rng = named_stream(14, "dual2");
        for (int trial = 0; trial < 500; ++trial) {
            Vec s(2), r(2);
            for (double& v : s) v = 2.0 * u01(rng) - 1.0;
            for (double& v : r) v = 2.0 * u01(rng) - 1.0;
            Vec sp = s + r;
            int X = static_cast<int>(uniform_index(rng, 3));
            double direct = dot(a.payoff(Outcome{X}), r) -
                            (a.cost_potential.value(sp) - a.cost_potential.value(s));
            double dual = profit_as_divergence(a, s, sp, Outcome{X});
            CHECK(std::fabs(direct - dual) < 1e-9);
        }
    }
}

TEST_CASE("frozen divergence profit value") {
    Apmm a = lmsr(2);
    double profit = profit_as_divergence(a, {0.0, 0.0}, {1.0, 0.0}, Outcome{0});
    CHECK(std::fabs(profit - 0.3798854930417225) < 1e-12);
}

TEST_CASE("gsr_of_apmm exposes the divergence loss on prices") {
    Apmm a = lmsr(2);
    DivergenceGsr L = gsr_of_apmm(a);
    // D_{C*}(e_0, p) with C* = negative entropy is -ln p_0
    Vec p = {0.25, 0.75};
    CHECK(std::fabs(L.loss(p, Outcome{0}) - (-std::log(0.25))) < 1e-9);
}

TEST_CASE("apmm_of_gsr implements the compression loss") {
    CompressionMarket m = CompressionMarket::make(2, 1.0, {0, 1}, 0);
    DivergenceGsr L = m.gsr();
    Apmm a = apmm_of_gsr(L);
    Rng rng = named_stream(23, "construct");
    for (int trial = 0; trial < 200; ++trial) {
        Vec s(2), sp(2);
        for (double& v : s) v = 2.0 * u01(rng) - 1.0;
        for (double& v : sp) v = 2.0 * u01(rng) - 1.0;
        Vec p = a.cost_potential.gradient(s);
        Vec pp = a.cost_potential.gradient(sp);
        int X = static_cast<int>(uniform_index(rng, 2));
        double profit = dot(a.payoff(Outcome{X}), sp - s) -
                        (a.cost_potential.value(sp) - a.cost_potential.value(s));
        double loss_diff = L.loss(p, Outcome{X}) - L.loss(pp, Outcome{X});
        CHECK(std::fabs(profit - loss_diff) < 1e-8);
    }
}

TEST_CASE("gsr_of_apmm round trip preserves the loss up to per-outcome constants") {
    CompressionMarket m = CompressionMarket::make(2, 1.0, {0}, 0);
    DivergenceGsr L = m.gsr();
    DivergenceGsr back = gsr_of_apmm(apmm_of_gsr(L));
    Rng rng = named_stream(29, "round");
    for (int X = 0; X < 2; ++X) {
        Vec q0 = {0.5, 0.5};
        double offset = back.loss(q0, Outcome{X}) - L.loss(q0, Outcome{X});
        for (int trial = 0; trial < 50; ++trial) {
            Vec q = L.base.hypothesis_space.sample(rng);
            CHECK(std::fabs(back.loss(q, Outcome{X}) - L.loss(q, Outcome{X}) - offset) < 1e-8);
        }
    }
}

TEST_CASE("as_clm_spec telescopes like any CLM") {
    Apmm a = lmsr(2);
    ClmSpec spec = as_clm_spec(a);
    Ledger ledger(spec);
    Accounts acc;
    acc.deposit("a", 100.0);
    post_bid(ledger, spec, acc, "a", {1.0, 0.0});
    post_bid(ledger, spec, acc, "a", {0.5, 1.5});
    Vec wT = ledger.current_hypothesis(spec);
    auto pay = settle(ledger, spec, Outcome{1});
    double profit = pay["a"];
    for (const TradeRecord& rec : ledger.records) profit -= rec.cost_charged;
    double expect = spec.loss(spec.w0, Outcome{1}) - spec.loss(wT, Outcome{1});
    CHECK(std::fabs(profit - expect) < 1e-12);
}

TEST_CASE("optimal_trade moves LMSR prices to the belief") {
    Apmm a = lmsr(2);
    Belief P = Belief::categorical({0.8, 0.2});
    Vec r = optimal_trade(a, P, 1e18, 2);
    Apmm after = a;
    after.quantity = a.quantity + r;
    CHECK(max_abs_diff(instantaneous_prices(after), {0.8, 0.2}) < 1e-5);
}

TEST_CASE("optimal_trade respects the budget on strictly convex costs") {
    Apmm a = quadratic_market({{1.0, 0.0}, {0.0, 1.0}});
    Belief P = Belief::categorical({0.6, 0.4});
    SECTION("zero budget from the minimum returns the null trade") {
        Vec r = optimal_trade(a, P, 0.0, 2);
        CHECK(norm2(r) < 1e-6);
    }
    SECTION("binding budget lands on the constraint") {
        Vec r = optimal_trade(a, P, 0.05, 2);
        CHECK(std::fabs(bundle_cost(a, r) - 0.05) < 1e-6);
    }
    SECTION("slack budget returns the unconstrained optimum") {
        Vec r = optimal_trade(a, P, 100.0, 2);
        // grad C(s) = s: optimum at s = E[rho] = (0.6, 0.4)
        CHECK(max_abs_diff(r, {0.6, 0.4}) < 1e-6);
    }
}
