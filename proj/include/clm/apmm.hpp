#ifndef CLM_APMM_HPP
#define CLM_APMM_HPP

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "clm/errors.hpp"
#include "clm/gsr.hpp"
#include "clm/mechanism.hpp"
#include "clm/outcome.hpp"
#include "clm/potential.hpp"
#include "clm/solver.hpp"
#include "clm/vec.hpp"

namespace clm {

// Cost-function-based automated market maker: share space R^n, payoff map
// rho, smooth convex cost C. Bundle prices are cost differences; payouts are
// rho(X) dotted with the held bundle.
struct Apmm {
    std::size_t share_dim = 0;
    OutcomeSpace outcomes = OutcomeSpace::finite(1);
    std::function<Vec(const Outcome&)> payoff;  // rho
    ConvexPotential cost_potential;             // C on R^n
    FeasibleSet price_space = FeasibleSet::all_of(1);  // grad C(S)
    Vec quantity;                               // outstanding shares s

    // C(s + c1) = C(s) + c markets (LMSR): cost constraints never bind, and
    // price inversion is anchored at the last coordinate.
    bool translation_invariant = false;

    std::string kind = "apmm";
    nlohmann::json params = nlohmann::json::object();
};

// Arrow-Debreu market over n outcomes under the log-sum-exp cost.
inline Apmm lmsr(std::size_t n, double eta = 1.0) {
    if (eta <= 0.0) throw ConstructionError("lmsr: eta must be positive");
    Apmm a;
    a.share_dim = n;
    a.outcomes = OutcomeSpace::finite(static_cast<int>(n));
    a.payoff = [n](const Outcome& X) { return unit(n, static_cast<std::size_t>(std::get<int>(X))); };
    a.cost_potential = dual_potential(negative_entropy(n, eta));
    a.price_space = FeasibleSet::simplex(n);
    a.quantity = zeros(n);
    a.translation_invariant = true;
    a.kind = "lmsr";
    a.params = {{"n", n}, {"eta", eta}};
    return a;
}

// C = half squared norm; payoff maps a finite outcome index to a given point.
inline Apmm quadratic_market(const std::vector<Vec>& outcome_points) {
    if (outcome_points.empty()) throw ConstructionError("quadratic_market: no outcomes");
    std::size_t d = outcome_points.front().size();
    Apmm a;
    a.share_dim = d;
    a.outcomes = OutcomeSpace::finite(static_cast<int>(outcome_points.size()));
    a.payoff = [pts = outcome_points](const Outcome& X) { return pts.at(std::get<int>(X)); };
    a.cost_potential = half_squared_norm(d);
    a.price_space = FeasibleSet::all_of(d);
    a.quantity = zeros(d);
    a.kind = "quadratic";
    a.params = {{"d", d}};
    return a;
}

// Quote: price of bundle r at the current quantity vector. Pure.
inline double bundle_cost(const Apmm& a, const Vec& r) {
    check_dim(r, a.share_dim, "bundle_cost");
    if (!all_finite(r)) throw DomainError("bundle_cost: non-finite bundle");
    return a.cost_potential.value(a.quantity + r) - a.cost_potential.value(a.quantity);
}

inline Vec instantaneous_prices(const Apmm& a) { return a.cost_potential.gradient(a.quantity); }

struct TradeResult {
    double cost;
    Vec from_quantity;
    Vec to_quantity;
};

inline TradeResult execute_trade(Apmm& a, const Vec& r) {
    double c = bundle_cost(a, r);
    Vec from = a.quantity;
    a.quantity += r;
    return {c, std::move(from), a.quantity};
}

// rho(X) . bundle, per participant.
inline std::map<std::string, double> settle_shares(const Apmm& a,
                                                   const std::map<std::string, Vec>& holdings,
                                                   const Outcome& X) {
    if (!a.outcomes.contains(X)) throw DomainError("settle_shares: outcome outside space");
    Vec pay = a.payoff(X);
    std::map<std::string, double> out;
    for (const auto& [id, bundle] : holdings) out[id] = dot(pay, bundle);
    return out;
}

// The dual profit form D_{C*}(rho(X), p_from) - D_{C*}(rho(X), p_to); equals
// the direct form rho(X).(s_to - s_from) - C(s_to) + C(s_from).
inline double profit_as_divergence(const Apmm& a, const Vec& s_from, const Vec& s_to,
                                   const Outcome& X) {
    ConvexPotential Cstar = dual_potential(a.cost_potential);
    Vec p_from = a.cost_potential.gradient(s_from);
    Vec p_to = a.cost_potential.gradient(s_to);
    // Boundary prices have no interior gradient in the dual; the direct cost
    // form stays total there.
    auto interior = [&](const Vec& p) {
        if (a.price_space.kind() == FeasibleSet::Kind::Simplex)
            for (double v : p)
                if (v < 1e-12) return false;
        return a.price_space.member(p, 1e-9);
    };
    if (!interior(p_from) || !interior(p_to))
        throw DomainError("profit_as_divergence: price at domain boundary");
    Vec r = a.payoff(X);
    return bregman_divergence(Cstar, r, p_from) - bregman_divergence(Cstar, r, p_to);
}

// The GSR a market's traders are implicitly minimizing: L(w;X) =
// D_{C*}(rho(X), w) on the price space, with phi(s) = grad C(s).
inline DivergenceGsr gsr_of_apmm(const Apmm& a) {
    DivergenceGsr L;
    L.R = dual_potential(a.cost_potential);
    L.rho = a.payoff;
    L.psi = [](const Vec& w) { return w; };
    L.psi_inverse = L.psi;
    L.f = nullptr;
    L.image_space = a.price_space;
    L.base.hypothesis_space = a.price_space;
    L.base.outcomes = a.outcomes;
    L.bind_loss();
    return L;
}

// Conjugate construction: a share market implementing a divergence-based
// loss, with C = R* and phi = psi^{-1} o grad C. Preconditions (psi
// invertible, rho(O) inside psi(H)) are audited on samples.
inline Apmm apmm_of_gsr(const DivergenceGsr& L, std::uint64_t audit_seed = 5) {
    if (!L.psi_inverse) throw ConstructionError("apmm_of_gsr: psi must have a registered inverse");
    for (const Outcome& X : L.base.outcomes.audit_outcomes()) {
        Vec r = L.rho(X);
        if (!L.image_space.member(r, 1e-7) && !L.R.domain.member(r, 1e-7))
            throw ConstructionError("apmm_of_gsr: rho(O) escapes psi(H)");
    }
    if (!conjugate_finite_on_samples(L.R, 16, audit_seed))
        throw ConstructionError("apmm_of_gsr: R* not finite on sampled duals");

    Apmm a;
    a.share_dim = L.R.dim;
    a.outcomes = L.base.outcomes;
    a.payoff = L.rho;
    a.cost_potential = dual_potential(L.R);
    a.price_space = L.R.domain;
    a.quantity = zeros(L.R.dim);
    a.translation_invariant = a.price_space.kind() == FeasibleSet::Kind::Simplex;
    a.kind = "apmm_of_gsr";
    return a;
}

// The share-market protocol as a plain CLM over H = R^n. Sells pay negative,
// so the escrow audit is off; collateral lives in the purchase price.
inline ClmSpec as_clm_spec(const Apmm& a) {
    ClmSpec spec;
    spec.hypothesis_space = FeasibleSet::all_of(a.share_dim);
    spec.outcomes = a.outcomes;
    spec.w0 = a.quantity;
    spec.enforce_escrow = false;
    spec.kind = a.kind;
    spec.params = a.params;
    spec.cost = [C = a.cost_potential](const Vec& s, const Vec& sp) {
        return C.value(sp) - C.value(s);
    };
    spec.payout = [rho = a.payoff](const Vec& s, const Vec& sp, const Outcome& X) {
        return dot(rho(X), sp - s);
    };
    // Canonical loss whose differences reproduce the profit.
    spec.loss = [C = a.cost_potential, rho = a.payoff](const Vec& s, const Outcome& X) {
        return C.value(s) - dot(rho(X), s);
    };
    return spec;
}

// Budget-constrained optimal bundle for belief P. Unconstrained first; a
// binding budget is handled by shifting (translation-invariant C) or by
// bisection on the constraint multiplier (strictly convex C).
inline Vec optimal_trade(const Apmm& a, const Belief& P, double budget,
                         std::uint64_t seed = 0) {
    P.validate();
    if (budget < 0.0) throw DomainError("optimal_trade: negative budget");
    Vec mean = zeros(a.share_dim);
    for (std::size_t k = 0; k < P.support.size(); ++k)
        mean += P.weights[k] * a.payoff(P.support[k]);

    const ConvexPotential& C = a.cost_potential;
    double c_now = C.value(a.quantity);

    // argmin over s' of scale*C(s') - mean.s' (scale >= 1 is 1 + multiplier).
    auto solve = [&](double scale) {
        Objective obj{
            [&, scale](const Vec& s) { return scale * C.value(s) - dot(mean, s); },
            [&, scale](const Vec& s) {
                Vec g = C.gradient(s);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * g[i] - mean[i];
                return g;
            }};
        MinimizeOpts opts;
        opts.seed = seed;
        opts.tol = 1e-10;
        return minimize(obj, FeasibleSet::all_of(a.share_dim), opts).point;
    };

    Vec target = solve(1.0);
    if (a.translation_invariant) {
        // Anchor the flat direction at the last coordinate, then shift the
        // whole bundle to sit exactly at the budget when it would overrun.
        double anchor = target[a.share_dim - 1];
        for (double& v : target) v -= anchor;
        double c = C.value(target) - c_now;
        if (c > budget) {
            double shift = c - budget;
            for (double& v : target) v -= shift;
        }
        return target - a.quantity;
    }
    if (C.value(target) - c_now <= budget + 1e-12) return target - a.quantity;

    // Constraint binds. As the multiplier grows the solve point slides toward
    // argmin C, so the reachable costs form the interval [cmin, cost(target)].
    Objective cobj{C.value, C.gradient};
    MinimizeOpts copts;
    copts.seed = seed;
    copts.tol = 1e-10;
    Vec s_min = minimize(cobj, FeasibleSet::all_of(a.share_dim), copts).point;
    double cmin = C.value(s_min) - c_now;
    if (budget - cmin <= 1e-10) return s_min - a.quantity;

    double lo = 1.0, hi = 2.0;
    while (C.value(solve(hi)) - c_now > budget && hi < 1e8) hi *= 2.0;
    if (hi >= 1e8) throw NonConvergenceError("optimal_trade: budget bisection failed",
                                             a.quantity, 0.0);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double c = C.value(solve(mid)) - c_now;
        if (std::fabs(c - budget) < 1e-11) {
            lo = hi = mid;
            break;
        }
        (c > budget ? lo : hi) = mid;
    }
    Vec best = solve(0.5 * (lo + hi));
    // Guard against overshoot from the finite bisection.
    if (C.value(best) - c_now > budget + 1e-9) best = solve(hi);
    return best - a.quantity;
}

}  // namespace clm

#endif
