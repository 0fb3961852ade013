#ifndef CLM_SERIALIZE_HPP
#define CLM_SERIALIZE_HPP

#include <fstream>
#include <sstream>
#include <string>

#include "clm/markets.hpp"
#include "clm/mechanism.hpp"

#include "json.hpp"

namespace clm {

// Ledger files are line-delimited JSON: a spec header, one line per trade,
// and an optional settlement line. nlohmann emits shortest round-trip
// decimals and sorted keys, so identical ledgers serialize byte-identically.

inline std::string ledger_to_string(const Ledger& ledger, const ClmSpec& spec) {
    std::ostringstream out;
    nlohmann::json header = spec.header();
    header["digest"] = ledger.spec_digest;
    out << header.dump() << "\n";
    for (const TradeRecord& rec : ledger.records) {
        nlohmann::json line = {{"seq", rec.seq},
                               {"participant", rec.participant},
                               {"from", rec.from_hypothesis},
                               {"to", rec.to_hypothesis},
                               {"cost", rec.cost_charged}};
        out << line.dump() << "\n";
    }
    if (ledger.settlement) {
        nlohmann::json line = {{"settlement",
                                {{"outcome", ledger.settlement->outcome},
                                 {"payouts", ledger.settlement->payouts}}}};
        out << line.dump() << "\n";
    }
    return out.str();
}

inline void write_ledger(const std::string& path, const Ledger& ledger, const ClmSpec& spec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path, 0);
    out << ledger_to_string(ledger, spec);
}

struct ParsedLedger {
    nlohmann::json header;
    Ledger ledger;
};

inline ParsedLedger parse_ledger_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    ParsedLedger out;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        if (!have_header) {
            if (!j.contains("market_kind"))
                throw ParseError("line 1 is not a spec header", line_no);
            out.header = j;
            out.ledger.spec_digest = j.value("digest", std::uint64_t{0});
            have_header = true;
            continue;
        }
        if (j.contains("settlement")) {
            Settlement s;
            s.outcome = j.at("settlement").at("outcome");
            for (const auto& [id, v] : j.at("settlement").at("payouts").items())
                s.payouts[id] = v.get<double>();
            out.ledger.settlement = std::move(s);
            continue;
        }
        try {
            TradeRecord rec;
            rec.seq = j.at("seq").get<std::uint64_t>();
            rec.participant = j.at("participant").get<std::string>();
            rec.from_hypothesis = j.at("from").get<Vec>();
            rec.to_hypothesis = j.at("to").get<Vec>();
            rec.cost_charged = j.at("cost").get<double>();
            rec.timestamp = rec.seq;
            out.ledger.records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    if (!have_header) throw ParseError("empty ledger file", line_no);
    return out;
}

inline ParsedLedger read_ledger(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path, 0);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_ledger_text(buf.str());
}

// Rebuilds a market spec from a ledger or config header. The three shipped
// market kinds are reconstructible; unknown kinds are an error.
inline ClmSpec spec_from_header(const nlohmann::json& header) {
    const std::string kind = header.at("market_kind").get<std::string>();
    const nlohmann::json& p = header.at("params");
    if (kind == "compression") {
        CompressionMarket m = CompressionMarket::make(
            p.at("n").get<std::size_t>(), p.at("alpha").get<double>(),
            p.at("stream").get<std::vector<int>>(), p.value("seed", std::uint64_t{0}),
            p.at("q0").get<Vec>(), p.value("q_floor", 1e-9));
        return compression_clm(m);
    }
    if (kind == "regression") {
        Batch batch;
        for (const auto& row : p.at("test_batch"))
            batch.push_back({row.at("x").get<Vec>(), row.at("y").get<double>()});
        RegressionMarket m = RegressionMarket::make(p.at("d").get<std::size_t>(),
                                                    p.at("alpha").get<double>(), std::move(batch),
                                                    p.value("seed", std::uint64_t{0}));
        return regression_clm(m);
    }
    if (kind == "label") {
        LabelMarket m = LabelMarket::make(
            p.at("m").get<std::size_t>(), p.at("k_lo").get<double>(), p.at("k_hi").get<double>(),
            p.at("alpha").get<double>(), p.at("labels").get<Vec>(),
            p.value("seed", std::uint64_t{0}));
        return label_clm(m);
    }
    throw ParseError("unknown market kind: " + kind, 1);
}

// The market object itself (needed for settlement variants).
inline CompressionMarket compression_from_header(const nlohmann::json& header) {
    const nlohmann::json& p = header.at("params");
    return CompressionMarket::make(p.at("n").get<std::size_t>(), p.at("alpha").get<double>(),
                                   p.at("stream").get<std::vector<int>>(),
                                   p.value("seed", std::uint64_t{0}), p.at("q0").get<Vec>(),
                                   p.value("q_floor", 1e-9));
}

}  // namespace clm

#endif
