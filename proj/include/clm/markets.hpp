#ifndef CLM_MARKETS_HPP
#define CLM_MARKETS_HPP

#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clm/apmm.hpp"
#include "clm/errors.hpp"
#include "clm/gsr.hpp"
#include "clm/mechanism.hpp"
#include "clm/outcome.hpp"
#include "clm/vec.hpp"

namespace clm {

// ---- stream compression market ----

// Participants refine a distribution q over an n-character alphabet; the
// mechanism pays per idealized code length -alpha*ln q(i). The hypothesis
// space is the epsilon-interior simplex so worst-case loss stays finite.
struct CompressionMarket {
    std::size_t n = 2;
    Vec q0;                       // default uniform
    double alpha = 1.0;
    std::vector<int> stream;      // observed characters
    std::uint64_t sample_seed = 0;
    double q_floor = 1e-9;

    static CompressionMarket make(std::size_t n, double alpha, std::vector<int> stream,
                                  std::uint64_t sample_seed, Vec q0 = {},
                                  double q_floor = 1e-9) {
        CompressionMarket m;
        m.n = n;
        m.alpha = alpha;
        m.stream = std::move(stream);
        m.sample_seed = sample_seed;
        m.q_floor = q_floor;
        m.q0 = q0.empty() ? Vec(n, 1.0 / static_cast<double>(n)) : std::move(q0);
        check_dim(m.q0, n, "compression q0");
        for (double v : m.q0)
            if (v <= 0.0) throw ConstructionError("compression: q0 must be strictly positive");
        for (int c : m.stream)
            if (c < 0 || c >= static_cast<int>(n))
                throw ConstructionError("compression: stream character out of range");
        return m;
    }

    Vec empirical() const {
        Vec p(n, 0.0);
        if (stream.empty()) return Vec(n, 1.0 / static_cast<double>(n));
        for (int c : stream) p[static_cast<std::size_t>(c)] += 1.0;
        for (double& v : p) v /= static_cast<double>(stream.size());
        return p;
    }

    // L as a divergence-based GSR: R = negative entropy, rho(i) = e_i,
    // psi = id, f = 0 (alpha folds into R).
    DivergenceGsr gsr() const {
        DivergenceGsr L;
        L.R = negative_entropy(n, 1.0 / alpha);  // (alpha) * sum q ln q
        L.rho = [n = n](const Outcome& X) {
            return unit(n, static_cast<std::size_t>(std::get<int>(X)));
        };
        L.psi = [](const Vec& w) { return w; };
        L.psi_inverse = L.psi;
        L.f = nullptr;
        L.image_space = FeasibleSet::simplex(n, q_floor);
        L.base.hypothesis_space = FeasibleSet::simplex(n, q_floor);
        L.base.outcomes = OutcomeSpace::finite(static_cast<int>(n));
        L.bind_loss();
        return L;
    }
};

// The log-ratio market of the compression setting. Cost is the exact escrow
// collateral max_i alpha*ln(q(i)/q'(i)); payout = cost + alpha*ln(q'(i)/q(i)).
inline ClmSpec compression_clm(const CompressionMarket& m) {
    ClmSpec spec;
    spec.hypothesis_space = FeasibleSet::simplex(m.n, m.q_floor);
    spec.outcomes = OutcomeSpace::finite(static_cast<int>(m.n));
    spec.w0 = spec.hypothesis_space.project(m.q0);
    spec.alpha = m.alpha;
    spec.kind = "compression";
    spec.params = {{"n", m.n},      {"alpha", m.alpha},          {"q0", spec.w0},
                   {"stream", m.stream}, {"seed", m.sample_seed}, {"q_floor", m.q_floor}};
    double alpha = m.alpha;
    spec.loss = [alpha](const Vec& q, const Outcome& X) {
        int i = std::get<int>(X);
        double qi = q[static_cast<std::size_t>(i)];
        return qi > 0.0 ? -alpha * std::log(qi) : std::numeric_limits<double>::infinity();
    };
    spec.cost = [alpha](const Vec& q, const Vec& qp) {
        double worst = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (qp[i] <= 0.0 && q[i] > 0.0) return std::numeric_limits<double>::infinity();
            worst = std::max(worst, alpha * std::log(q[i] / qp[i]));
        }
        return worst;
    };
    spec.payout = [loss = spec.loss, cost = spec.cost](const Vec& q, const Vec& qp,
                                                       const Outcome& X) {
        return loss(q, X) - loss(qp, X) + cost(q, qp);
    };
    return spec;
}

// Draw one character uniformly from the stream with private randomness,
// settle on it.
inline std::map<std::string, double> settle_by_sample(const CompressionMarket& m, Ledger& ledger,
                                                      const ClmSpec& spec, std::uint64_t seed,
                                                      Accounts* accounts = nullptr) {
    if (m.stream.empty()) throw DomainError("settle_by_sample: empty stream");
    Rng rng = named_stream(seed, "settlement-draw");
    int x = m.stream[uniform_index(rng, m.stream.size())];
    return settle(ledger, spec, Outcome{x}, accounts);
}

// Pay per the stream's empirical distribution: the enumeration average of the
// sampled settlement, with lower variance.
inline std::map<std::string, double> settle_by_empirical(const CompressionMarket& m,
                                                         Ledger& ledger, const ClmSpec& spec,
                                                         Accounts* accounts = nullptr) {
    Vec p_hat = m.empirical();
    return settle_with(
        ledger,
        [&](const TradeRecord& rec) {
            double total = 0.0;
            for (std::size_t i = 0; i < m.n; ++i)
                if (p_hat[i] > 0.0)
                    total += p_hat[i] * spec.payout(rec.from_hypothesis, rec.to_hypothesis,
                                                    Outcome{static_cast<int>(i)});
            return total;
        },
        nlohmann::json{{"empirical", p_hat}}, accounts);
}

// H(p) + (1-alpha) KL(p;qT) + alpha KL(p;q0): encoding cost of using qT plus
// the mechanism's cost of obtaining it. Independent of qT at alpha = 1.
inline double total_expected_cost(const CompressionMarket& m, const Vec& qT, const Belief& p) {
    p.validate();
    check_dim(qT, m.n, "total_expected_cost");
    Vec pv(m.n, 0.0);
    for (std::size_t k = 0; k < p.support.size(); ++k)
        pv[static_cast<std::size_t>(std::get<int>(p.support[k]))] += p.weights[k];
    double H = 0.0, kl_T = 0.0, kl_0 = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
        if (pv[i] <= 0.0) continue;
        if (qT[i] <= 0.0) throw DomainError("total_expected_cost: qT zero where p > 0");
        H -= pv[i] * std::log(pv[i]);
        kl_T += pv[i] * std::log(pv[i] / qT[i]);
        kl_0 += pv[i] * std::log(pv[i] / m.q0[i]);
    }
    return H + (1.0 - m.alpha) * kl_T + m.alpha * kl_0;
}

// ---- l2 regression market ----

struct RegressionMarket {
    std::size_t d = 1;
    double alpha = 1.0;
    Batch test_batch;
    std::uint64_t audit_seed = 0;

    static RegressionMarket make(std::size_t d, double alpha, Batch test_batch,
                                 std::uint64_t audit_seed = 0) {
        RegressionMarket m;
        m.d = d;
        m.alpha = alpha;
        m.test_batch = std::move(test_batch);
        m.audit_seed = audit_seed;
        for (const DataPoint& p : m.test_batch) {
            if (p.x.size() != d) throw ConstructionError("regression: feature dim mismatch");
            if (norm2(p.x) > 1.0 + 1e-9 || std::fabs(p.y) > 1.0 + 1e-9)
                throw ConstructionError("regression: batch bounds violated");
        }
        return m;
    }
};

inline double regression_loss(double alpha, const Vec& w, const Batch& batch) {
    if (batch.empty()) return 0.0;
    double s = 0.0;
    for (const DataPoint& p : batch) {
        double e = dot(w, p.x) - p.y;
        s += e * e;
    }
    return alpha * s / (2.0 * static_cast<double>(batch.size()));
}

// Mean-squared-error market on the unit ball with the 2*alpha-Lipschitz cost.
inline ClmSpec regression_clm(const RegressionMarket& m) {
    Gsr L;
    L.hypothesis_space = FeasibleSet::l2_ball(m.d, 1.0);
    L.outcomes = OutcomeSpace::dataset_batch(static_cast<int>(m.d),
                                             std::max<int>(1, static_cast<int>(m.test_batch.size())),
                                             m.audit_seed);
    if (!m.test_batch.empty()) L.outcomes.add_audit_outcome(m.test_batch);
    L.loss = [](const Vec& w, const Outcome& X) {
        return regression_loss(1.0, w, std::get<Batch>(X));
    };
    ClmSpec spec = make_l_clm(L, CostRule::lipschitz(2.0 * m.alpha), zeros(m.d), m.alpha);
    spec.kind = "regression";
    nlohmann::json rows = nlohmann::json::array();
    for (const DataPoint& p : m.test_batch) rows.push_back({{"x", p.x}, {"y", p.y}});
    spec.params = {{"d", m.d}, {"alpha", m.alpha}, {"test_batch", rows}, {"seed", m.audit_seed}};
    return spec;
}

// ---- direct label betting ----

struct LabelMarket {
    std::size_t m = 1;
    double k_lo = 1.0, k_hi = 5.0;  // ratings-style default
    double alpha = 1.0;
    Vec true_labels;                // revealed at settlement
    std::uint64_t audit_seed = 0;

    // Mini-payout bookkeeping, shared with the spec's bid validator.
    struct State {
        std::set<std::size_t> frozen;
        std::map<std::string, double> paid;  // accumulated mini-payouts
    };
    std::shared_ptr<State> state = std::make_shared<State>();

    static LabelMarket make(std::size_t m, double k_lo, double k_hi, double alpha,
                            Vec true_labels, std::uint64_t audit_seed = 0) {
        LabelMarket mk;
        mk.m = m;
        mk.k_lo = k_lo;
        mk.k_hi = k_hi;
        mk.alpha = alpha;
        mk.true_labels = std::move(true_labels);
        mk.audit_seed = audit_seed;
        if (!(k_lo < k_hi)) throw ConstructionError("label market: empty label interval");
        if (!mk.true_labels.empty()) {
            check_dim(mk.true_labels, m, "label market labels");
            for (double y : mk.true_labels)
                if (y < k_lo - 1e-12 || y > k_hi + 1e-12)
                    throw ConstructionError("label market: label outside K");
        }
        return mk;
    }

    double width() const { return k_hi - k_lo; }
};

inline double label_loss(double alpha, const Vec& w, const Vec& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        double e = w[k] - y[k];
        s += e * e;
    }
    return alpha * s;
}

// Total squared loss over H = O = K^m; Lipschitz cost with the per-coordinate
// bound lambda = 2 m width(K) alpha.
inline ClmSpec label_clm(const LabelMarket& mk) {
    Gsr L;
    L.hypothesis_space = FeasibleSet::box(Vec(mk.m, mk.k_lo), Vec(mk.m, mk.k_hi));
    L.outcomes = OutcomeSpace::label_vector(static_cast<int>(mk.m), mk.k_lo, mk.k_hi,
                                            mk.audit_seed);
    L.loss = [](const Vec& w, const Outcome& X) { return label_loss(1.0, w, std::get<Vec>(X)); };
    double lambda = 2.0 * static_cast<double>(mk.m) * mk.width() * mk.alpha;
    Vec w0 = L.hypothesis_space.center();
    ClmSpec spec = make_l_clm(L, CostRule::lipschitz(lambda), w0, mk.alpha);
    spec.kind = "label";
    spec.params = {{"m", mk.m},     {"k_lo", mk.k_lo}, {"k_hi", mk.k_hi},
                   {"alpha", mk.alpha}, {"labels", mk.true_labels}, {"seed", mk.audit_seed}};
    spec.bid_validator = [state = mk.state](const Vec& from, const Vec& to) {
        for (std::size_t k : state->frozen)
            if (std::fabs(from[k] - to[k]) > 1e-12)
                throw RejectedBidError("bid alters a frozen label coordinate");
    };
    return spec;
}

// Interval settlement: pays every record the profit restricted to the
// revealed coordinates plus that slice of its escrowed cost, then freezes
// them. Coordinate-wise escrow e_k = 2 alpha width |delta_k| never exceeds
// the charged cost in total (m * l2 >= l1), and the leftover slack is paid
// with the interval that completes coverage, so scheduled totals match a
// one-shot settlement exactly.
inline std::map<std::string, double> mini_payout(const LabelMarket& mk, Ledger& ledger,
                                                 const ClmSpec& spec,
                                                 const std::set<std::size_t>& S, const Vec& y_S,
                                                 Accounts* accounts = nullptr) {
    if (!ledger.open()) throw StateError("mini_payout: ledger already settled");
    for (std::size_t k : S) {
        if (k >= mk.m) throw ScheduleError("mini_payout: index out of range");
        if (mk.state->frozen.count(k)) throw ScheduleError("mini_payout: index already frozen");
    }
    if (y_S.size() != S.size()) throw ShapeError("mini_payout: labels/indices size mismatch");

    std::set<std::size_t> next_frozen = mk.state->frozen;
    next_frozen.insert(S.begin(), S.end());
    const bool completes = next_frozen.size() == mk.m;
    const double per_coord = 2.0 * mk.alpha * mk.width();

    std::map<std::string, double> paid;
    std::size_t idx = 0;
    std::map<std::size_t, double> label_of;
    for (std::size_t k : S) label_of[k] = y_S[idx++];

    for (const TradeRecord& rec : ledger.records) {
        double p = 0.0;
        double coord_escrow_total = 0.0;
        for (std::size_t k = 0; k < mk.m; ++k)
            coord_escrow_total +=
                per_coord * std::fabs(rec.to_hypothesis[k] - rec.from_hypothesis[k]);
        for (std::size_t k : S) {
            double y = label_of[k];
            double ef = rec.from_hypothesis[k] - y;
            double et = rec.to_hypothesis[k] - y;
            double gain = mk.alpha * (ef * ef - et * et);  // loss drop on this label
            double escrow_k = per_coord * std::fabs(rec.to_hypothesis[k] - rec.from_hypothesis[k]);
            p += gain + escrow_k;
        }
        if (completes) p += rec.cost_charged - coord_escrow_total;  // slack
        if (p != 0.0) paid[rec.participant] += p;
        if (accounts && p != 0.0) accounts->credit(rec.participant, p);
    }
    mk.state->frozen = next_frozen;
    for (const auto& [id, v] : paid) mk.state->paid[id] += v;

    if (completes) {
        // Settlement record carries accumulated totals across all intervals.
        ledger.settlement =
            Settlement{nlohmann::json{{"mini_payout_complete", true}}, mk.state->paid};
    }
    return paid;
}

// ---- tabular ingestion ----

// CSV with a required header row; feature columns then the label column.
// Rows violating the norm or label bounds are rejected with their number.
inline Batch read_batch_csv(const std::string& path, std::size_t d) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path, 0);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header row in " + path, 1);
    Batch batch;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Vec row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("non-numeric cell at line " + std::to_string(line_no), line_no);
            }
        }
        if (row.size() != d + 1)
            throw ParseError("expected " + std::to_string(d + 1) + " columns at line " +
                                 std::to_string(line_no),
                             line_no);
        Vec x(row.begin(), row.end() - 1);
        double y = row.back();
        if (norm2(x) > 1.0 + 1e-9)
            throw ParseError("feature norm exceeds 1 at line " + std::to_string(line_no), line_no);
        if (std::fabs(y) > 1.0 + 1e-9)
            throw ParseError("label outside [-1,1] at line " + std::to_string(line_no), line_no);
        batch.push_back({std::move(x), y});
    }
    return batch;
}

inline Vec read_labels_csv(const std::string& path, std::size_t m, double lo, double hi) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path, 0);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header row in " + path, 1);
    Vec labels;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        double y;
        try {
            y = std::stod(line);
        } catch (const std::exception&) {
            throw ParseError("non-numeric label at line " + std::to_string(line_no), line_no);
        }
        if (y < lo - 1e-12 || y > hi + 1e-12)
            throw ParseError("label outside K at line " + std::to_string(line_no), line_no);
        labels.push_back(y);
    }
    if (labels.size() != m)
        throw ParseError("expected " + std::to_string(m) + " labels", line_no);
    return labels;
}

}  // namespace clm

#endif
