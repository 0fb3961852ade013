#ifndef CLM_GSR_HPP
#define CLM_GSR_HPP

#include <functional>
#include <utility>

#include "clm/errors.hpp"
#include "clm/feasible_set.hpp"
#include "clm/outcome.hpp"
#include "clm/potential.hpp"
#include "clm/solver.hpp"
#include "clm/vec.hpp"

namespace clm {

// Generalized scoring rule: the loss function a mechanism is incentivized
// around. Expected loss under any belief must have a nonempty convex
// minimizer set; that property is the designer's assertion, witnessed here
// only by solver convergence.
struct Gsr {
    FeasibleSet hypothesis_space = FeasibleSet::all_of(1);
    OutcomeSpace outcomes = OutcomeSpace::finite(1);
    std::function<double(const Vec&, const Outcome&)> loss;
};

inline double expected_loss(const Gsr& L, const Vec& w, const Belief& P) {
    P.validate();
    if (!L.hypothesis_space.member(w)) throw DomainError("expected_loss: w outside hypothesis space");
    double s = 0.0;
    for (std::size_t k = 0; k < P.support.size(); ++k)
        s += P.weights[k] * L.loss(w, P.support[k]);
    return s;
}

// One element of the expected-loss minimizer set (any element is
// contractually acceptable; the solver's multi-start tie-break makes the
// returned one deterministic).
inline Vec minimize_expected_loss(const Gsr& L, const Belief& P, std::uint64_t seed = 0) {
    P.validate();
    // Central differences as gradient fallback: losses are supplied as plain
    // callables with no gradient oracle.
    auto f = [&](const Vec& w) {
        double s = 0.0;
        for (std::size_t k = 0; k < P.support.size(); ++k)
            s += P.weights[k] * L.loss(w, P.support[k]);
        return s;
    };
    Objective obj{f, [f](const Vec& w) { return numeric_gradient(f, w); }};
    MinimizeOpts opts;
    opts.seed = seed;
    opts.tol = 1e-8;
    return minimize(obj, L.hypothesis_space, opts).point;
}

// A GSR of the form L(w;X) = D_R(rho(X), psi(w)) + f(X).
struct DivergenceGsr {
    Gsr base;
    ConvexPotential R;                                 // on H' (dim m)
    std::function<Vec(const Outcome&)> rho;            // O -> H'
    std::function<Vec(const Vec&)> psi;                // H -> H'
    std::function<Vec(const Vec&)> psi_inverse;        // registered where one-to-one
    std::function<double(const Outcome&)> f;           // defaults to 0
    FeasibleSet image_space = FeasibleSet::all_of(1);  // psi(H), for feasibility checks

    double loss(const Vec& w, const Outcome& X) const {
        double off = f ? f(X) : 0.0;
        return bregman_divergence(R, rho(X), psi(w)) + off;
    }

    // Wires base.loss to the divergence form. Captures by value so the bound
    // Gsr stays valid across copies of this struct.
    void bind_loss() {
        base.loss = [R = R, rho = rho, psi = psi, f = f](const Vec& w, const Outcome& X) {
            double off = f ? f(X) : 0.0;
            return bregman_divergence(R, rho(X), psi(w)) + off;
        };
    }
};

inline Vec expected_statistic(const DivergenceGsr& L, const Belief& P) {
    P.validate();
    Vec mean = zeros(L.R.dim);
    for (std::size_t k = 0; k < P.support.size(); ++k)
        mean += P.weights[k] * L.rho(P.support[k]);
    return mean;
}

// The mean-minimization shortcut: the expected-loss minimizer is
// psi^{-1}(E[rho(X)]) whenever that mean lies in psi(H).
inline Vec mean_minimizer(const DivergenceGsr& L, const Belief& P) {
    if (!L.psi_inverse) throw DomainError("mean_minimizer: psi has no registered inverse");
    Vec mean = expected_statistic(L, P);
    if (!L.image_space.member(mean, 1e-7))
        throw InfeasibleMeanError("mean_minimizer: E[rho(X)] outside psi(H)");
    Vec w = L.psi_inverse(mean);
    if (!L.base.hypothesis_space.member(w, 1e-7))
        throw InfeasibleMeanError("mean_minimizer: inverse image outside H");
    return w;
}

}  // namespace clm

#endif
