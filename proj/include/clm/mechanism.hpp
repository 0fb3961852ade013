#ifndef CLM_MECHANISM_HPP
#define CLM_MECHANISM_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clm/errors.hpp"
#include "clm/gsr.hpp"
#include "clm/outcome.hpp"
#include "clm/vec.hpp"

#include "json.hpp"

namespace clm {

// A fully wired bid/settle market: cost charged on a hypothesis update and
// payout per trade once the outcome is revealed. Specs built from a loss L
// satisfy payout - cost = L(from;X) - L(to;X).
struct ClmSpec {
    FeasibleSet hypothesis_space = FeasibleSet::all_of(1);
    OutcomeSpace outcomes = OutcomeSpace::finite(1);
    std::function<double(const Vec&, const Vec&)> cost;
    std::function<double(const Vec&, const Vec&, const Outcome&)> payout;
    std::function<double(const Vec&, const Outcome&)> loss;  // alpha-scaled
    Vec w0;
    double alpha = 1.0;

    // Escrow is audited per bid for loss-built markets; the raw share-market
    // embedding legitimately pays negative on sells and opts out.
    bool enforce_escrow = true;

    // Optional extra bid validity (e.g. frozen label coordinates).
    std::function<void(const Vec&, const Vec&)> bid_validator;

    // Identity of the market for ledger digests and replay.
    std::string kind = "custom";
    nlohmann::json params = nlohmann::json::object();

    nlohmann::json header() const {
        return {{"market_kind", kind},
                {"params", params},
                {"w0", w0},
                {"alpha", alpha}};
    }

    std::uint64_t digest() const { return fnv1a(header().dump()); }
};

struct TradeRecord {
    std::uint64_t seq = 0;
    std::string participant;
    Vec from_hypothesis;
    Vec to_hypothesis;
    double cost_charged = 0.0;
    std::uint64_t timestamp = 0;  // logical, equals seq here
};

struct Settlement {
    nlohmann::json outcome;  // serialized outcome (or empirical marker)
    std::map<std::string, double> payouts;
};

// Append-only transcript of one market run.
struct Ledger {
    std::uint64_t spec_digest = 0;
    std::vector<TradeRecord> records;
    std::optional<Settlement> settlement;

    explicit Ledger(const ClmSpec& spec) : spec_digest(spec.digest()) {}
    Ledger() = default;

    bool open() const { return !settlement.has_value(); }

    Vec current_hypothesis(const ClmSpec& spec) const {
        return records.empty() ? spec.w0 : records.back().to_hypothesis;
    }
};

// Cash-plus-voucher balances per participant; vouchers are drawn first.
struct Accounts {
    struct Balance {
        double cash = 0.0;
        double voucher = 0.0;
    };
    std::map<std::string, Balance> by_id;

    double available(const std::string& id) const {
        auto it = by_id.find(id);
        return it == by_id.end() ? 0.0 : it->second.cash + it->second.voucher;
    }

    void deposit(const std::string& id, double amount) { by_id[id].cash += amount; }

    void debit(const std::string& id, double amount) {
        Balance& b = by_id[id];
        if (b.cash + b.voucher + 1e-12 < amount)
            throw RejectedBidError("insufficient funds for participant " + id);
        double from_voucher = std::min(b.voucher, amount);
        b.voucher -= from_voucher;
        b.cash -= amount - from_voucher;
    }

    void credit(const std::string& id, double amount) { by_id[id].cash += amount; }
};

struct VoucherPool {
    std::size_t count_m = 0;
    double amount_c = 0.0;
    std::map<std::string, double> issued;

    double total_liability() const {
        return static_cast<double>(issued.size()) * amount_c;
    }
};

inline void issue_voucher(VoucherPool& pool, Accounts& accounts, const std::string& participant) {
    if (pool.issued.size() >= pool.count_m)
        throw IssuanceError("voucher pool exhausted");
    if (pool.issued.count(participant))
        throw IssuanceError("participant already holds a voucher");
    pool.issued[participant] = pool.amount_c;
    accounts.by_id[participant].voucher += pool.amount_c;
}

// ---- construction ----

struct CostRule {
    enum class Kind { Lipschitz, WorstCaseGap, Custom };
    Kind kind = Kind::WorstCaseGap;
    double lambda = 0.0;  // Lipschitz constant of w -> L(w;X), uniform in X
    std::function<double(const Vec&, const Vec&)> custom;

    static CostRule lipschitz(double lam) { return {Kind::Lipschitz, lam, nullptr}; }
    static CostRule worst_case_gap() { return {Kind::WorstCaseGap, 0.0, nullptr}; }
    static CostRule custom_rule(std::function<double(const Vec&, const Vec&)> c) {
        return {Kind::Custom, 0.0, std::move(c)};
    }
};

// Builds an L-incentivized spec: payout(w,w',X) = L(w;X) - L(w';X) + cost(w,w').
// The loss is pre-scaled by alpha. Construction runs a sampled escrow audit
// and rejects with a witness on violation.
inline ClmSpec make_l_clm(const Gsr& L, const CostRule& rule, const Vec& w0, double alpha,
                          std::uint64_t audit_seed = 99, std::size_t audit_bids = 64) {
    if (alpha <= 0.0) throw ConstructionError("make_l_clm: alpha must be positive");
    if (!L.hypothesis_space.member(w0)) throw ConstructionError("make_l_clm: w0 outside H");

    ClmSpec spec;
    spec.hypothesis_space = L.hypothesis_space;
    spec.outcomes = L.outcomes;
    spec.w0 = w0;
    spec.alpha = alpha;
    spec.loss = [base = L.loss, alpha](const Vec& w, const Outcome& X) {
        return alpha * base(w, X);
    };

    switch (rule.kind) {
        case CostRule::Kind::Lipschitz:
            spec.cost = [lam = rule.lambda](const Vec& w, const Vec& wp) {
                return lam * norm2(wp - w);
            };
            break;
        case CostRule::Kind::WorstCaseGap:
            spec.cost = [loss = spec.loss, audit = L.outcomes.audit_outcomes()](
                            const Vec& w, const Vec& wp) {
                double worst = 0.0;
                for (const Outcome& X : audit)
                    worst = std::max(worst, loss(wp, X) - loss(w, X));
                return worst;
            };
            break;
        case CostRule::Kind::Custom:
            spec.cost = rule.custom;
            break;
    }
    spec.payout = [loss = spec.loss, cost = spec.cost](const Vec& w, const Vec& wp,
                                                       const Outcome& X) {
        return loss(w, X) - loss(wp, X) + cost(w, wp);
    };

    // Sampled escrow audit over random bids and all audit outcomes.
    Rng rng = named_stream(audit_seed, "escrow-audit");
    for (std::size_t b = 0; b < audit_bids; ++b) {
        Vec w = spec.hypothesis_space.sample(rng);
        Vec wp = spec.hypothesis_space.sample(rng);
        double c = spec.cost(w, wp);
        if (!std::isfinite(c)) continue;  // infinite-cost bids are rejected at post time
        for (const Outcome& X : spec.outcomes.audit_outcomes()) {
            if (spec.payout(w, wp, X) < -1e-12)
                throw ConstructionError("make_l_clm: escrow violated on sampled bid");
        }
    }
    return spec;
}

// ---- protocol ----

// Appends one chained trade. The participant is debited (vouchers first) and
// the published hypothesis becomes w_new. Returns the cost charged.
inline double post_bid(Ledger& ledger, const ClmSpec& spec, Accounts& accounts,
                       const std::string& participant, const Vec& w_new) {
    if (!ledger.open()) throw StateError("post_bid: ledger already settled");
    if (!spec.hypothesis_space.member(w_new))
        throw RejectedBidError("bid outside hypothesis space");
    Vec w_cur = ledger.current_hypothesis(spec);
    if (spec.bid_validator) spec.bid_validator(w_cur, w_new);
    double c = spec.cost(w_cur, w_new);
    if (!std::isfinite(c)) throw RejectedBidError("bid has non-finite cost");
    if (spec.enforce_escrow) {
        for (const Outcome& X : spec.outcomes.audit_outcomes())
            if (spec.payout(w_cur, w_new, X) < -1e-12)
                throw RejectedBidError("bid violates escrow on an audit outcome");
    }
    if (accounts.available(participant) + 1e-12 < c)
        throw RejectedBidError("insufficient funds for bid");
    accounts.debit(participant, c);

    TradeRecord rec;
    rec.seq = ledger.records.size();
    rec.participant = participant;
    rec.from_hypothesis = w_cur;
    rec.to_hypothesis = w_new;
    rec.cost_charged = c;
    rec.timestamp = rec.seq;
    ledger.records.push_back(std::move(rec));
    return c;
}

// Settlement against an arbitrary per-record payout map; the public settle()
// below instantiates it with the spec's payout at a realized outcome.
inline std::map<std::string, double> settle_with(
    Ledger& ledger, const std::function<double(const TradeRecord&)>& record_payout,
    nlohmann::json outcome_tag, Accounts* accounts = nullptr) {
    if (!ledger.open()) throw StateError("settle: ledger already settled");
    std::map<std::string, double> totals;
    for (const TradeRecord& rec : ledger.records) {
        double p = record_payout(rec);
        totals[rec.participant] += p;
        if (accounts) accounts->credit(rec.participant, p);
    }
    ledger.settlement = Settlement{std::move(outcome_tag), totals};
    return totals;
}

inline nlohmann::json outcome_to_json(const Outcome& X) {
    if (const int* i = std::get_if<int>(&X)) return {{"character", *i}};
    if (const Vec* v = std::get_if<Vec>(&X)) return {{"labels", *v}};
    const Batch& b = std::get<Batch>(X);
    nlohmann::json rows = nlohmann::json::array();
    for (const DataPoint& p : b) rows.push_back({{"x", p.x}, {"y", p.y}});
    return {{"batch", rows}};
}

inline Outcome outcome_from_json(const nlohmann::json& j) {
    if (j.contains("character")) return j.at("character").get<int>();
    if (j.contains("labels")) return j.at("labels").get<Vec>();
    if (j.contains("batch")) {
        Batch b;
        for (const auto& row : j.at("batch"))
            b.push_back({row.at("x").get<Vec>(), row.at("y").get<double>()});
        return b;
    }
    throw ParseError("unrecognized outcome encoding", 0);
}

inline std::map<std::string, double> settle(Ledger& ledger, const ClmSpec& spec, const Outcome& X,
                                            Accounts* accounts = nullptr) {
    return settle_with(
        ledger,
        [&](const TradeRecord& rec) {
            return spec.payout(rec.from_hypothesis, rec.to_hypothesis, X);
        },
        outcome_to_json(X), accounts);
}

// ---- accounting ----

// max over the audit set of L(w0;X) - L(w;X): a lower bound on the true
// worst case, exact for enumerable outcome spaces with grids hitting the
// extreme hypotheses.
inline double worst_case_loss(const ClmSpec& spec, double grid_step = 1e-2) {
    double worst = 0.0;
    std::vector<Vec> grid = spec.hypothesis_space.audit_grid(grid_step);
    for (const Outcome& X : spec.outcomes.audit_outcomes()) {
        double base = spec.loss(spec.w0, X);
        for (const Vec& w : grid)
            worst = std::max(worst, base - spec.loss(w, X));
    }
    return worst;
}

// Returns a spec whose audit worst-case loss equals the budget B. All money
// functions scale linearly with the loss, so rescaling is a wrapper.
inline ClmSpec rescale_to_budget(const ClmSpec& spec, double budget, double grid_step = 1e-2) {
    double wcl = worst_case_loss(spec, grid_step);
    if (!std::isfinite(wcl) || wcl <= 0.0)
        throw RescaleError("rescale_to_budget: worst-case loss not finite and positive");
    double factor = budget / wcl;
    ClmSpec out = spec;
    out.alpha = spec.alpha * factor;
    out.cost = [c = spec.cost, factor](const Vec& w, const Vec& wp) { return factor * c(w, wp); };
    out.payout = [p = spec.payout, factor](const Vec& w, const Vec& wp, const Outcome& X) {
        return factor * p(w, wp, X);
    };
    out.loss = [l = spec.loss, factor](const Vec& w, const Outcome& X) {
        return factor * l(w, X);
    };
    out.params["alpha"] = out.alpha;
    return out;
}

}  // namespace clm

#endif
