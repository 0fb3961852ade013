#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "clm/sim.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw clm::ParseError("cannot open " + path, 0);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw clm::ParseError(path + ": " + e.what(), 0);
    }
    return j;
}

// Accepts either a full simulation config or a bare market header.
nlohmann::json market_of_config(const nlohmann::json& cfg) {
    if (cfg.contains("market")) return cfg.at("market");
    return cfg;
}

int cmd_simulate(const std::string& config_path) {
    clm::SimConfig cfg = clm::sim_config_from_json(load_json(config_path));
    clm::SimOutput out = clm::run_simulation(cfg);
    std::cout << out.report.to_string();
    return 0;
}

int cmd_settle(const std::string& ledger_path, const std::string& outcome_str) {
    clm::ParsedLedger parsed = clm::read_ledger(ledger_path);
    clm::ClmSpec spec = clm::spec_from_header(parsed.header);
    if (parsed.ledger.spec_digest != spec.digest())
        throw clm::StateError("ledger digest does not match its header");

    std::map<std::string, double> payouts;
    if (outcome_str == "empirical") {
        clm::CompressionMarket m = clm::compression_from_header(parsed.header);
        payouts = clm::settle_by_empirical(m, parsed.ledger, spec);
    } else if (outcome_str == "sample") {
        clm::CompressionMarket m = clm::compression_from_header(parsed.header);
        payouts = clm::settle_by_sample(m, parsed.ledger, spec, m.sample_seed);
    } else {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(outcome_str);
        } catch (const nlohmann::json::exception& e) {
            throw clm::ParseError(std::string("--outcome: ") + e.what(), 0);
        }
        payouts = clm::settle(parsed.ledger, spec, clm::outcome_from_json(j));
    }
    clm::write_ledger(ledger_path, parsed.ledger, spec);
    for (const auto& [id, v] : payouts)
        std::cout << nlohmann::json{{"participant", id}, {"payout", v}}.dump() << "\n";
    return 0;
}

int cmd_replay(const std::string& ledger_path) {
    clm::ReplayVerdict v = clm::replay_verify(ledger_path);
    nlohmann::json out = {{"ok", v.ok}, {"message", v.message}};
    if (v.first_bad_seq) out["seq"] = *v.first_bad_seq;
    std::cout << out.dump() << "\n";
    return v.ok ? 0 : 1;
}

int cmd_worst_case(const std::string& config_path) {
    nlohmann::json market = market_of_config(load_json(config_path));
    clm::ClmSpec spec = clm::spec_from_header(market);
    double wcl = clm::worst_case_loss(spec);
    std::cout << nlohmann::json{{"worst_case_loss", wcl}}.dump() << "\n";
    return 0;
}

int cmd_quote(const std::string& config_path, const std::string& bid_str) {
    nlohmann::json market = market_of_config(load_json(config_path));
    clm::ClmSpec spec = clm::spec_from_header(market);
    clm::Vec bid;
    try {
        bid = nlohmann::json::parse(bid_str).get<clm::Vec>();
    } catch (const nlohmann::json::exception& e) {
        throw clm::ParseError(std::string("--bid: ") + e.what(), 0);
    }
    nlohmann::json out;
    out["from"] = spec.w0;
    out["to"] = bid;
    out["feasible"] = spec.hypothesis_space.member(bid);
    if (out["feasible"].get<bool>()) {
        double c = spec.cost(spec.w0, bid);
        out["cost"] = c;
        double worst = std::numeric_limits<double>::infinity();
        for (const clm::Outcome& X : spec.outcomes.audit_outcomes())
            worst = std::min(worst, spec.payout(spec.w0, bid, X));
        out["min_audit_payout"] = worst;
        out["escrow_ok"] = worst >= -1e-12;
    }
    std::cout << out.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowdsourced learning mechanism markets"};
    app.require_subcommand(1);

    std::string config_path, ledger_path, outcome_str, bid_str;

    CLI::App* sim = app.add_subcommand("simulate", "run a configured simulation");
    sim->add_option("--config", config_path, "simulation config file")->required();

    CLI::App* settle = app.add_subcommand("settle", "settle a ledger at an outcome");
    settle->add_option("--ledger", ledger_path, "ledger file")->required();
    settle->add_option("--outcome", outcome_str,
                       "outcome JSON, or 'empirical'/'sample' for compression markets")
        ->required();

    CLI::App* replay = app.add_subcommand("replay", "verify a ledger bit-for-bit");
    replay->add_option("--ledger", ledger_path, "ledger file")->required();

    CLI::App* wc = app.add_subcommand("worst-case", "audit worst-case loss of a market");
    wc->add_option("--config", config_path, "config or market header file")->required();

    CLI::App* quote = app.add_subcommand("quote", "cost/escrow preview for a bid from w0");
    quote->add_option("--config", config_path, "config or market header file")->required();
    quote->add_option("--bid", bid_str, "bid hypothesis as a JSON array")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path);
        if (settle->parsed()) return cmd_settle(ledger_path, outcome_str);
        if (replay->parsed()) return cmd_replay(ledger_path);
        if (wc->parsed()) return cmd_worst_case(config_path);
        if (quote->parsed()) return cmd_quote(config_path, bid_str);
    } catch (const clm::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
