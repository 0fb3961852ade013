#ifndef CLM_SIM_HPP
#define CLM_SIM_HPP

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clm/markets.hpp"
#include "clm/mechanism.hpp"
#include "clm/serialize.hpp"

namespace clm {

// ---- trader agents ----

struct TraderAgent {
    enum class Strategy { Informed, BudgetOptimizer, Noise };
    std::string id;
    Strategy strategy = Strategy::Noise;
    Belief belief;          // informed / budget strategies
    double budget = 0.0;    // budget strategy
    double step_scale = 0.1;  // noise strategy
    double initial_cash = 0.0;
};

namespace detail {

inline Gsr gsr_view(const ClmSpec& spec) {
    Gsr L;
    L.hypothesis_space = spec.hypothesis_space;
    L.outcomes = spec.outcomes;
    L.loss = spec.loss;
    return L;
}

// Budget-constrained expected-loss solve via a quadratic penalty on the cost
// overrun; the penalty weight ramps until the budget holds.
inline Vec budget_solve(const Gsr& L, const Belief& P, const Vec& w_cur,
                        const std::function<double(const Vec&, const Vec&)>& cost, double budget,
                        std::uint64_t seed) {
    auto expected = [&](const Vec& w) {
        double s = 0.0;
        for (std::size_t k = 0; k < P.support.size(); ++k)
            s += P.weights[k] * L.loss(w, P.support[k]);
        return s;
    };
    Vec best = w_cur;
    for (double mu : {1.0, 10.0, 100.0, 1000.0, 10000.0}) {
        auto f = [&](const Vec& w) {
            double over = std::max(0.0, cost(w_cur, w) - budget);
            return expected(w) + mu * over * over;
        };
        Objective obj{f, [f](const Vec& w) { return numeric_gradient(f, w); }};
        MinimizeOpts opts;
        opts.seed = seed;
        opts.tol = 1e-8;
        try {
            best = minimize(obj, L.hypothesis_space, opts).point;
        } catch (const NonConvergenceError& e) {
            best = e.best_point;
        }
        if (cost(w_cur, best) <= budget + 1e-9) return best;
    }
    // Fall back to sliding toward the penalty solution until the budget holds.
    for (double t = 1.0; t > 1e-6; t *= 0.5) {
        Vec w = L.hypothesis_space.project(w_cur + t * (best - w_cur));
        if (cost(w_cur, w) <= budget + 1e-9) return w;
    }
    return w_cur;
}

}  // namespace detail

// Proposes a bid, or passes (nullopt) when no profitable affordable move
// exists. Solver failures degrade to a pass.
inline std::optional<Vec> agent_act(const TraderAgent& agent, const ClmSpec& spec,
                                    const Vec& w_current, double available_funds, Rng& noise_rng,
                                    std::uint64_t solve_seed) {
    Gsr L = detail::gsr_view(spec);
    try {
        switch (agent.strategy) {
            case TraderAgent::Strategy::Informed: {
                Vec w = minimize_expected_loss(L, agent.belief, solve_seed);
                double gain = expected_loss(L, w_current, agent.belief) -
                              expected_loss(L, w, agent.belief);
                double c = spec.cost(w_current, w);
                if (gain <= 1e-10 || !std::isfinite(c) || c > available_funds) return std::nullopt;
                return w;
            }
            case TraderAgent::Strategy::BudgetOptimizer: {
                double cap = std::min(agent.budget, available_funds);
                if (cap <= 0.0) return std::nullopt;
                Vec w = detail::budget_solve(L, agent.belief, w_current, spec.cost, cap,
                                             solve_seed);
                double gain = expected_loss(L, w_current, agent.belief) -
                              expected_loss(L, w, agent.belief);
                double c = spec.cost(w_current, w);
                if (gain <= 1e-10 || !std::isfinite(c) || c > cap + 1e-9) return std::nullopt;
                return w;
            }
            case TraderAgent::Strategy::Noise: {
                Vec step(w_current.size());
                for (double& v : step) v = agent.step_scale * gaussian(noise_rng);
                Vec w = spec.hypothesis_space.project(w_current + step);
                double c = spec.cost(w_current, w);
                if (!std::isfinite(c) || c > available_funds) return std::nullopt;
                return w;
            }
        }
    } catch (const NonConvergenceError&) {
        return std::nullopt;  // logged by the caller
    } catch (const UnboundedError&) {
        return std::nullopt;
    }
    return std::nullopt;
}

// ---- simulation ----

struct SimConfig {
    nlohmann::json market;  // {market_kind, params}, same shape as a ledger header
    std::vector<TraderAgent> agents;
    std::size_t rounds = 1;
    std::uint64_t seed = 0;
    std::string settlement = "empirical";  // empirical | sample | outcome | schedule
    std::vector<std::vector<std::size_t>> schedule;  // label mini-payout intervals
    std::string scheduler = "round_robin";           // round_robin | shuffled
    bool stop_when_no_profit = false;
    std::size_t voucher_count = 0;
    double voucher_amount = 0.0;
    std::string ledger_path;
    std::string report_path;
};

struct AgentReport {
    std::string id;
    double total_cost = 0.0;
    double total_payout = 0.0;
    double profit = 0.0;
};

struct Report {
    std::vector<AgentReport> agents;
    double mechanism_loss = 0.0;  // L(w0;X) - L(wT;X)
    Vec loss_trajectory;          // audit loss per round
    double voucher_liability = 0.0;
    double worst_case_bound = 0.0;
    nlohmann::json config_echo;

    std::string to_string() const {
        std::ostringstream out;
        out << nlohmann::json{{"config", config_echo}}.dump() << "\n";
        for (const AgentReport& a : agents)
            out << nlohmann::json{{"agent", a.id},
                                  {"total_cost", a.total_cost},
                                  {"total_payout", a.total_payout},
                                  {"profit", a.profit}}
                       .dump()
                << "\n";
        out << nlohmann::json{{"mechanism_loss", mechanism_loss},
                              {"voucher_liability", voucher_liability},
                              {"worst_case_bound", worst_case_bound}}
                   .dump()
            << "\n";
        out << nlohmann::json{{"loss_trajectory", loss_trajectory}}.dump() << "\n";
        return out.str();
    }
};

struct SimOutput {
    ClmSpec spec;
    Ledger ledger;
    Report report;
};

inline SimConfig sim_config_from_json(const nlohmann::json& j);
inline Belief truth_belief(const nlohmann::json& market);

// Runs the full bid/settle protocol: agents act in schedule order for the
// configured rounds, the ledger settles by the configured variant, and
// ledger/report files are written when paths are set. Deterministic: a config
// maps to byte-identical outputs.
inline SimOutput run_simulation(const SimConfig& cfg) {
    ClmSpec spec = spec_from_header(cfg.market);
    const std::string kind = cfg.market.at("market_kind").get<std::string>();

    Accounts accounts;
    VoucherPool pool{cfg.voucher_count, cfg.voucher_amount, {}};
    for (const TraderAgent& a : cfg.agents) accounts.deposit(a.id, a.initial_cash);
    for (const TraderAgent& a : cfg.agents) {
        if (pool.issued.size() >= pool.count_m) break;
        issue_voucher(pool, accounts, a.id);
    }

    Ledger ledger(spec);

    // Audit outcome for the loss trajectory: the realized settlement target.
    std::optional<CompressionMarket> comp;
    std::optional<LabelMarket> label;
    Outcome audit_outcome = 0;
    Belief truth = Belief::point_mass(0);
    if (kind == "compression") {
        comp = compression_from_header(cfg.market);
        truth = Belief::categorical(comp->empirical());
        audit_outcome = 0;  // unused; trajectory uses the empirical belief
    } else if (kind == "regression") {
        Batch batch;
        for (const auto& row : cfg.market.at("params").at("test_batch"))
            batch.push_back({row.at("x").get<Vec>(), row.at("y").get<double>()});
        audit_outcome = batch;
        truth = Belief::point_mass(audit_outcome);
    } else if (kind == "label") {
        const nlohmann::json& p = cfg.market.at("params");
        label = LabelMarket::make(p.at("m").get<std::size_t>(), p.at("k_lo").get<double>(),
                                  p.at("k_hi").get<double>(), p.at("alpha").get<double>(),
                                  p.at("labels").get<Vec>(), p.value("seed", std::uint64_t{0}));
        spec = label_clm(*label);  // rebind: the spec must share the market's freeze state
        ledger = Ledger(spec);
        audit_outcome = label->true_labels;
        truth = Belief::point_mass(audit_outcome);
    }

    auto audit_loss = [&](const Vec& w) { return expected_loss(detail::gsr_view(spec), w, truth); };

    Report report;
    report.config_echo = cfg.market;
    report.config_echo["rounds"] = cfg.rounds;
    report.config_echo["seed"] = cfg.seed;
    report.config_echo["settlement"] = cfg.settlement;

    std::vector<Rng> noise_rngs;
    for (const TraderAgent& a : cfg.agents)
        noise_rngs.push_back(named_stream(cfg.seed, "agent:" + a.id));
    Rng sched_rng = named_stream(cfg.seed, "scheduler");

    std::map<std::string, double> cost_paid;
    report.loss_trajectory.push_back(audit_loss(spec.w0));
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        std::vector<std::size_t> order(cfg.agents.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (cfg.scheduler == "shuffled") {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(sched_rng, i)]);
        }
        bool any_bid = false;
        for (std::size_t i : order) {
            const TraderAgent& agent = cfg.agents[i];
            Vec w_cur = ledger.current_hypothesis(spec);
            std::uint64_t solve_seed = fnv1a("solve:" + agent.id, cfg.seed + t);
            std::optional<Vec> bid = agent_act(agent, spec, w_cur, accounts.available(agent.id),
                                               noise_rngs[i], solve_seed);
            if (!bid) continue;
            try {
                double c = post_bid(ledger, spec, accounts, agent.id, *bid);
                cost_paid[agent.id] += c;
                any_bid = true;
            } catch (const RejectedBidError&) {
                // escrow or funding rejection: agent effectively passes
            }
        }
        report.loss_trajectory.push_back(audit_loss(ledger.current_hypothesis(spec)));
        if (cfg.stop_when_no_profit && !any_bid) break;
    }

    Vec w_final = ledger.current_hypothesis(spec);

    std::map<std::string, double> payouts;
    if (kind == "compression") {
        if (cfg.settlement == "sample")
            payouts = settle_by_sample(*comp, ledger, spec, cfg.seed, &accounts);
        else
            payouts = settle_by_empirical(*comp, ledger, spec, &accounts);
    } else if (kind == "label" && cfg.settlement == "schedule") {
        std::set<std::size_t> covered;
        for (const auto& interval : cfg.schedule) {
            std::set<std::size_t> S(interval.begin(), interval.end());
            Vec y_S;
            for (std::size_t k : S) y_S.push_back(label->true_labels[k]);
            auto paid = mini_payout(*label, ledger, spec, S, y_S, &accounts);
            for (const auto& [id, v] : paid) payouts[id] += v;
            covered.insert(S.begin(), S.end());
        }
        if (covered.size() != label->m)
            throw ScheduleError("run_simulation: schedule does not cover all labels");
    } else {
        payouts = settle(ledger, spec, audit_outcome, &accounts);
    }

    for (const TraderAgent& a : cfg.agents) {
        AgentReport ar;
        ar.id = a.id;
        ar.total_cost = cost_paid.count(a.id) ? cost_paid[a.id] : 0.0;
        ar.total_payout = payouts.count(a.id) ? payouts[a.id] : 0.0;
        ar.profit = ar.total_payout - ar.total_cost;
        report.agents.push_back(ar);
    }
    // Mechanism loss under the settlement actually used.
    double profit_sum = 0.0;
    for (const AgentReport& a : report.agents) profit_sum += a.profit;
    report.mechanism_loss = profit_sum;

    // Zero-sum telescoping cross-check against the audit loss when the
    // settlement target matches the audit target.
    if (cfg.settlement != "sample") {
        double expect = audit_loss(spec.w0) - audit_loss(w_final);
        if (std::fabs(expect - profit_sum) > 1e-9)
            throw StateError("run_simulation: telescoping accounting mismatch");
    }

    report.voucher_liability = pool.total_liability();
    report.worst_case_bound = worst_case_loss(spec);

    if (!cfg.ledger_path.empty()) write_ledger(cfg.ledger_path, ledger, spec);
    if (!cfg.report_path.empty()) {
        std::ofstream out(cfg.report_path, std::ios::binary);
        if (!out) throw ParseError("cannot write " + cfg.report_path, 0);
        out << report.to_string();
    }
    return {std::move(spec), std::move(ledger), std::move(report)};
}

// ---- replay ----

struct ReplayVerdict {
    bool ok = true;
    std::string message = "ledger verified";
    std::optional<std::uint64_t> first_bad_seq;
};

// Recomputes digest, chain links, every cost, and (where the settlement
// variant is reconstructible) every payout, bit-for-bit.
inline ReplayVerdict replay_verify(const std::string& path) {
    ParsedLedger parsed = read_ledger(path);  // ParseError propagates with line number
    ClmSpec spec = spec_from_header(parsed.header);

    if (parsed.ledger.spec_digest != spec.digest())
        return {false, "spec digest mismatch", std::nullopt};

    Vec w = spec.w0;
    for (const TradeRecord& rec : parsed.ledger.records) {
        if (rec.seq != static_cast<std::uint64_t>(&rec - parsed.ledger.records.data()))
            return {false, "non-contiguous sequence", rec.seq};
        if (rec.from_hypothesis != w)
            return {false, "chain break: from-hypothesis does not match predecessor", rec.seq};
        if (!spec.hypothesis_space.member(rec.to_hypothesis))
            return {false, "hypothesis outside feasible set", rec.seq};
        double c = spec.cost(rec.from_hypothesis, rec.to_hypothesis);
        if (c != rec.cost_charged)
            return {false, "cost mismatch on recomputation", rec.seq};
        w = rec.to_hypothesis;
    }

    if (parsed.ledger.settlement) {
        const Settlement& s = *parsed.ledger.settlement;
        std::map<std::string, double> recomputed;
        if (s.outcome.contains("empirical")) {
            CompressionMarket m = compression_from_header(parsed.header);
            Vec p_hat = s.outcome.at("empirical").get<Vec>();
            if (max_abs_diff(p_hat, m.empirical()) != 0.0)
                return {false, "empirical distribution mismatch", std::nullopt};
            for (const TradeRecord& rec : parsed.ledger.records) {
                double total = 0.0;
                for (std::size_t i = 0; i < m.n; ++i)
                    if (p_hat[i] > 0.0)
                        total += p_hat[i] * spec.payout(rec.from_hypothesis, rec.to_hypothesis,
                                                        Outcome{static_cast<int>(i)});
                recomputed[rec.participant] += total;
            }
        } else if (s.outcome.contains("mini_payout_complete")) {
            // Interval structure is not stored; totals are accepted as-is.
            return {true, "ledger verified (mini-payout totals not recomputed)", std::nullopt};
        } else {
            Outcome X = outcome_from_json(s.outcome);
            for (const TradeRecord& rec : parsed.ledger.records)
                recomputed[rec.participant] +=
                    spec.payout(rec.from_hypothesis, rec.to_hypothesis, X);
        }
        if (recomputed != s.payouts) return {false, "settlement payouts mismatch", std::nullopt};
    }
    return {};
}

// ---- config ingestion ----

// Strict parse: unknown keys anywhere in the document are errors.
inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ParseError("unknown key '" + key + "' in " + where, 0);
    }
}

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"market", "agents", "rounds", "seed", "settlement", "schedule",
                         "scheduler", "stop_when_no_profit", "voucher_count", "voucher_amount",
                         "ledger_path", "report_path"},
                        "config");
    SimConfig cfg;
    cfg.market = j.at("market");
    reject_unknown_keys(cfg.market, {"market_kind", "params"}, "config.market");
    cfg.rounds = j.value("rounds", std::size_t{1});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.settlement = j.value("settlement", std::string("empirical"));
    cfg.scheduler = j.value("scheduler", std::string("round_robin"));
    cfg.stop_when_no_profit = j.value("stop_when_no_profit", false);
    cfg.voucher_count = j.value("voucher_count", std::size_t{0});
    cfg.voucher_amount = j.value("voucher_amount", 0.0);
    cfg.ledger_path = j.value("ledger_path", std::string());
    cfg.report_path = j.value("report_path", std::string());
    if (j.contains("schedule"))
        cfg.schedule = j.at("schedule").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& a : j.value("agents", nlohmann::json::array())) {
        reject_unknown_keys(a, {"id", "strategy", "belief", "budget", "step_scale", "cash"},
                            "config.agents[]");
        TraderAgent agent;
        agent.id = a.at("id").get<std::string>();
        std::string strat = a.at("strategy").get<std::string>();
        if (strat == "informed")
            agent.strategy = TraderAgent::Strategy::Informed;
        else if (strat == "budget_optimizer")
            agent.strategy = TraderAgent::Strategy::BudgetOptimizer;
        else if (strat == "noise")
            agent.strategy = TraderAgent::Strategy::Noise;
        else
            throw ParseError("unknown strategy '" + strat + "'", 0);
        agent.budget = a.value("budget", 0.0);
        agent.step_scale = a.value("step_scale", 0.1);
        agent.initial_cash = a.value("cash", 0.0);
        if (a.contains("belief")) {
            const auto& b = a.at("belief");
            if (b.is_string() && b.get<std::string>() == "truth") {
                agent.belief = truth_belief(cfg.market);
            } else {
                agent.belief = Belief::categorical(b.at("p").get<Vec>());
            }
        } else if (agent.strategy != TraderAgent::Strategy::Noise) {
            agent.belief = truth_belief(cfg.market);
        }
        cfg.agents.push_back(std::move(agent));
    }
    return cfg;
}

// The belief of a perfectly informed agent: the settlement target itself.
inline Belief truth_belief(const nlohmann::json& market) {
    const std::string kind = market.at("market_kind").get<std::string>();
    const nlohmann::json& p = market.at("params");
    if (kind == "compression") return Belief::categorical(compression_from_header(market).empirical());
    if (kind == "regression") {
        Batch batch;
        for (const auto& row : p.at("test_batch"))
            batch.push_back({row.at("x").get<Vec>(), row.at("y").get<double>()});
        return Belief::point_mass(Outcome{std::move(batch)});
    }
    if (kind == "label") return Belief::point_mass(Outcome{p.at("labels").get<Vec>()});
    throw ParseError("unknown market kind for belief", 0);
}

}  // namespace clm

#endif
