#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "clm/markets.hpp"

using namespace clm;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/clm_test_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("compression cost is the exact escrow collateral") {
    CompressionMarket m = CompressionMarket::make(2, 1.0, {0}, 0);
    ClmSpec spec = compression_clm(m);
    CHECK(std::fabs(spec.cost({0.5, 0.5}, {0.75, 0.25}) - 0.6931471805599453) < 1e-12);
    // worst audit payout of a bid is exactly zero: minimal collateral
    double worst = 1e100;
    for (const Outcome& X : spec.outcomes.audit_outcomes())
        worst = std::min(worst, spec.payout({0.5, 0.5}, {0.75, 0.25}, X));
    CHECK(std::fabs(worst) < 1e-12);
}

TEST_CASE("compression profit implements the log loss differences") {
    CompressionMarket m = CompressionMarket::make(3, 2.0, {0, 1, 2}, 0, {}, 1e-6);
    ClmSpec spec = compression_clm(m);
    Rng rng = named_stream(41, "comp");
    for (int trial = 0; trial < 100; ++trial) {
        Vec q = spec.hypothesis_space.sample(rng);
        Vec qp = spec.hypothesis_space.sample(rng);
        for (int i = 0; i < 3; ++i) {
            double profit = spec.payout(q, qp, Outcome{i}) - spec.cost(q, qp);
            std::size_t k = static_cast<std::size_t>(i);
            double expect = 2.0 * (std::log(qp[k]) - std::log(q[k]));
            CHECK(std::fabs(profit - expect) < 1e-9);
        }
    }
}

TEST_CASE("empirical settlement equals the enumeration average of sampled settlement") {
    CompressionMarket m = CompressionMarket::make(2, 1.0, {0, 1, 1, 1}, 0);
    ClmSpec spec = compression_clm(m);
    auto build = [&](Ledger& ledger, Accounts& acc) {
        acc.deposit("a", 100.0);
        post_bid(ledger, spec, acc, "a", {0.3, 0.7});
        post_bid(ledger, spec, acc, "a", {0.2, 0.8});
    };
    Ledger emp(spec);
    Accounts acc1;
    build(emp, acc1);
    auto pay_emp = settle_by_empirical(m, emp, spec);
    double avg = 0.0;
    for (int c : m.stream) {
        Ledger one(spec);
        Accounts acc2;
        build(one, acc2);
        avg += settle(one, spec, Outcome{c})["a"];
    }
    avg /= static_cast<double>(m.stream.size());
    CHECK(std::fabs(pay_emp["a"] - avg) < 1e-12);
}

TEST_CASE("sampled settlement draws from the stream deterministically") {
    CompressionMarket m = CompressionMarket::make(2, 1.0, {1, 1, 1, 1}, 5);
    ClmSpec spec = compression_clm(m);
    Ledger ledger(spec);
    Accounts acc;
    acc.deposit("a", 100.0);
    post_bid(ledger, spec, acc, "a", {0.25, 0.75});
    auto pay = settle_by_sample(m, ledger, spec, m.sample_seed);
    // stream is all ones, so the draw is outcome 1 regardless of seed
    Ledger direct(spec);
    Accounts acc2;
    acc2.deposit("a", 100.0);
    post_bid(direct, spec, acc2, "a", {0.25, 0.75});
    CHECK(pay["a"] == settle(direct, spec, Outcome{1})["a"]);
}

TEST_CASE("total expected cost closed forms") {
    Belief p = Belief::categorical({0.25, 0.75});
    SECTION("alpha 1 collapses to H + KL(p;q0)") {
        CompressionMarket m = CompressionMarket::make(2, 1.0, {0}, 0);
        double v = total_expected_cost(m, {0.6, 0.4}, p);
        CHECK(std::fabs(v - 0.6931471805599453) < 1e-12);
        CHECK(std::fabs(total_expected_cost(m, {0.9, 0.1}, p) - v) < 1e-12);
    }
    SECTION("alpha 0.5 frozen value") {
        CompressionMarket m = CompressionMarket::make(2, 0.5, {0}, 0);
        CHECK(std::fabs(total_expected_cost(m, {0.6, 0.4}, p) - 0.7540358177035296) < 1e-12);
    }
    SECTION("support mismatch is a domain error") {
        CompressionMarket m = CompressionMarket::make(2, 1.0, {0}, 0);
        CHECK_THROWS_AS(total_expected_cost(m, {1.0, 0.0}, p), DomainError);
    }
}

TEST_CASE("insurance identity: alpha 1 cost is independent of qT") {
    Rng rng = named_stream(51, "insure");
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 2 + uniform_index(rng, 5);
        CompressionMarket m = CompressionMarket::make(n, 1.0, {0}, 0);
        Vec pv = random_simplex(rng, n);
        Belief p = Belief::categorical(pv);
        Vec qa = random_simplex(rng, n);
        Vec qb = random_simplex(rng, n);
        for (double& v : qa) v = std::max(v, 1e-6);
        for (double& v : qb) v = std::max(v, 1e-6);
        double a = total_expected_cost(m, qa, p);
        double b = total_expected_cost(m, qb, p);
        CHECK(std::fabs(a - b) < 1e-12);
        double H = 0.0, kl = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pv[i] <= 0.0) continue;
            H -= pv[i] * std::log(pv[i]);
            kl += pv[i] * std::log(pv[i] / m.q0[i]);
        }
        CHECK(std::fabs(a - (H + kl)) < 1e-12);
    }
}

TEST_CASE("regression market arithmetic") {
    RegressionMarket m = RegressionMarket::make(1, 1.0, {{{1.0}, 1.0}}, 0);
    ClmSpec spec = regression_clm(m);
    Outcome X = m.test_batch;
    CHECK(std::fabs(spec.loss({0.0}, X) - 0.5) < 1e-15);
    CHECK(spec.loss({1.0}, X) == 0.0);
    CHECK(std::fabs(spec.cost({0.0}, {1.0}) - 2.0) < 1e-12);
    double profit = spec.payout({0.0}, {1.0}, X) - spec.cost({0.0}, {1.0});
    CHECK(std::fabs(profit - 0.5) < 1e-12);
    CHECK(spec.cost({0.3}, {0.3}) == 0.0);
}

TEST_CASE("regression construction rejects bound violations") {
    CHECK_THROWS_AS(RegressionMarket::make(1, 1.0, {{{2.0}, 0.0}}, 0), ConstructionError);
    CHECK_THROWS_AS(RegressionMarket::make(1, 1.0, {{{0.5}, 3.0}}, 0), ConstructionError);
}

TEST_CASE("regression worst case is alpha over two") {
    for (double alpha : {0.5, 1.0, 2.0}) {
        RegressionMarket m = RegressionMarket::make(2, alpha, {{{1.0, 0.0}, 1.0}}, 0);
        ClmSpec spec = regression_clm(m);
        double wcl = worst_case_loss(spec, 0.05);
        CHECK(wcl <= alpha / 2.0 + 1e-9);
        CHECK(wcl >= alpha / 2.0 - 1e-3);
    }
}

TEST_CASE("label market arithmetic") {
    LabelMarket one = LabelMarket::make(1, 0.0, 1.0, 1.0, {1.0}, 0);
    ClmSpec spec = label_clm(one);
    Outcome y{Vec{1.0}};
    CHECK(std::fabs(spec.loss({0.0}, y) - 1.0) < 1e-15);
    CHECK(spec.loss({1.0}, y) == 0.0);
    CHECK(std::fabs(spec.cost({0.0}, {1.0}) - 2.0) < 1e-12);
    CHECK(std::fabs(spec.payout({0.0}, {1.0}, y) - 3.0) < 1e-12);
    LabelMarket two = LabelMarket::make(2, 0.0, 1.0, 1.0, {0.0, 1.0}, 0);
    ClmSpec spec2 = label_clm(two);
    CHECK(std::fabs(spec2.loss({0.5, 0.5}, Outcome{two.true_labels}) - 0.5) < 1e-15);
}

TEST_CASE("mini payout schedule matches one-shot settlement") {
    Rng rng = named_stream(61, "mini");
    for (int trial = 0; trial < 30; ++trial) {
        Vec labels = {0.2, 0.9, 0.5};
        auto build = [&](const LabelMarket& mk, const ClmSpec& spec, Ledger& ledger,
                         Accounts& acc, Rng bids) {
            acc.deposit("a", 1e6);
            acc.deposit("b", 1e6);
            for (int t = 0; t < 6; ++t)
                post_bid(ledger, spec, acc, t % 2 ? "a" : "b",
                         spec.hypothesis_space.sample(bids));
        };
        Rng bids = named_stream(100 + trial, "bids");
        Rng bids_copy = bids;

        LabelMarket mk1 = LabelMarket::make(3, 0.0, 1.0, 1.0, labels, 0);
        ClmSpec spec1 = label_clm(mk1);
        Ledger one(spec1);
        Accounts acc1;
        build(mk1, spec1, one, acc1, bids);
        auto oneshot = settle(one, spec1, Outcome{labels});

        LabelMarket mk2 = LabelMarket::make(3, 0.0, 1.0, 1.0, labels, 0);
        ClmSpec spec2 = label_clm(mk2);
        Ledger sched(spec2);
        Accounts acc2;
        build(mk2, spec2, sched, acc2, bids_copy);
        std::map<std::string, double> total;
        for (auto& [id, v] : mini_payout(mk2, sched, spec2, {0, 2}, {labels[0], labels[2]}))
            total[id] += v;
        for (auto& [id, v] : mini_payout(mk2, sched, spec2, {1}, {labels[1]})) total[id] += v;
        for (const auto& [id, v] : oneshot) {
            CHECK(std::fabs(total[id] - v) < 1e-9);
        }
        CHECK_FALSE(sched.open());
    }
}

TEST_CASE("mini payout per interval is non-negative in escrow terms") {
    LabelMarket mk = LabelMarket::make(2, 0.0, 1.0, 1.0, {0.3, 0.8}, 0);
    ClmSpec spec = label_clm(mk);
    Ledger ledger(spec);
    Accounts acc;
    acc.deposit("a", 100.0);
    post_bid(ledger, spec, acc, "a", {0.9, 0.1});
    auto paid = mini_payout(mk, ledger, spec, {0}, {0.3});
    // per-coordinate gain + escrow never dips below zero
    CHECK(paid["a"] >= -1e-12);
}

TEST_CASE("mini payout schedule errors and freezing") {
    LabelMarket mk = LabelMarket::make(2, 0.0, 1.0, 1.0, {0.3, 0.8}, 0);
    ClmSpec spec = label_clm(mk);
    Ledger ledger(spec);
    Accounts acc;
    acc.deposit("a", 100.0);
    post_bid(ledger, spec, acc, "a", {0.4, 0.6});
    auto none = mini_payout(mk, ledger, spec, {}, {});
    CHECK(none.empty());
    mini_payout(mk, ledger, spec, {0}, {0.3});
    CHECK_THROWS_AS(mini_payout(mk, ledger, spec, {0}, {0.3}), ScheduleError);
    CHECK_THROWS_AS(mini_payout(mk, ledger, spec, {5}, {0.3}), ScheduleError);
    // bids touching the frozen coordinate are rejected, others pass
    CHECK_THROWS_AS(post_bid(ledger, spec, acc, "a", {0.5, 0.6}), RejectedBidError);
    post_bid(ledger, spec, acc, "a", {0.4, 0.9});
}

TEST_CASE("batch csv ingestion") {
    TempFile good("batch.csv", "x1,x2,y\n0.6,0.8,0.5\n0.0,1.0,-1.0\n");
    Batch b = read_batch_csv(good.path, 2);
    REQUIRE(b.size() == 2);
    CHECK(b[0].x == Vec{0.6, 0.8});
    CHECK(b[1].y == -1.0);
    TempFile bad_norm("bad1.csv", "x1,x2,y\n3.0,0.0,0.5\n");
    CHECK_THROWS_MATCHES(read_batch_csv(bad_norm.path, 2), ParseError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("line 2")));
    TempFile bad_cols("bad2.csv", "x1,x2,y\n0.1,0.2,0.3\n0.1,0.2\n");
    CHECK_THROWS_MATCHES(read_batch_csv(bad_cols.path, 2), ParseError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("line 3")));
    TempFile empty("bad3.csv", "");
    CHECK_THROWS_AS(read_batch_csv(empty.path, 2), ParseError);
}

TEST_CASE("labels csv ingestion") {
    TempFile good("labels.csv", "y\n1.5\n4.0\n");
    Vec y = read_labels_csv(good.path, 2, 1.0, 5.0);
    CHECK(y == Vec{1.5, 4.0});
    TempFile bad("labels_bad.csv", "y\n1.5\n9.0\n");
    CHECK_THROWS_MATCHES(read_labels_csv(bad.path, 2, 1.0, 5.0), ParseError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("line 3")));
}
