#ifndef CLM_POTENTIAL_HPP
#define CLM_POTENTIAL_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "clm/errors.hpp"
#include "clm/feasible_set.hpp"
#include "clm/solver.hpp"
#include "clm/vec.hpp"

namespace clm {

// A strictly convex potential with value, gradient, effective domain, and
// conjugate access. The conjugate is closed-form when registered and falls
// back to a numeric sup otherwise.
struct ConvexPotential {
    std::size_t dim = 0;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    FeasibleSet domain = FeasibleSet::all_of(1);

    // Closed-form conjugate, when registered.
    bool has_closed_conjugate = false;
    std::function<double(const Vec&)> conj_value;
    std::function<Vec(const Vec&)> conj_gradient;
    FeasibleSet conj_domain = FeasibleSet::all_of(1);
    std::string name;  // registry tag, informational
};

// sup_{x in dom R} g.x - R(x). Uses the registered closed form where present,
// a deterministic multi-start solve otherwise.
inline double conjugate(const ConvexPotential& R, const Vec& g,
                        const MinimizeOpts& opts = {.tol = 1e-9}) {
    check_dim(g, R.dim, "conjugate");
    if (!all_finite(g)) throw DomainError("conjugate: non-finite dual point");
    if (R.has_closed_conjugate) return R.conj_value(g);
    Objective neg{
        [&](const Vec& x) { return R.value(x) - dot(g, x); },
        [&](const Vec& x) {
            Vec gr = R.gradient(x);
            for (std::size_t i = 0; i < gr.size(); ++i) gr[i] -= g[i];
            return gr;
        }};
    return -minimize(neg, R.domain, opts).value;
}

// argmax of the conjugate objective; equals the gradient of R* at g.
inline Vec conjugate_argmax(const ConvexPotential& R, const Vec& g,
                            const MinimizeOpts& opts = {.tol = 1e-9}) {
    check_dim(g, R.dim, "conjugate_argmax");
    if (R.has_closed_conjugate && R.conj_gradient) return R.conj_gradient(g);
    Objective neg{
        [&](const Vec& x) { return R.value(x) - dot(g, x); },
        [&](const Vec& x) {
            Vec gr = R.gradient(x);
            for (std::size_t i = 0; i < gr.size(); ++i) gr[i] -= g[i];
            return gr;
        }};
    return minimize(neg, R.domain, opts).point;
}

// D_R(x, y) = R(x) - R(y) - grad R(y).(x - y). Requires y in the interior of
// dom R (gradient must exist there) and x in its closure.
inline double bregman_divergence(const ConvexPotential& R, const Vec& x, const Vec& y) {
    check_dim(x, R.dim, "bregman_divergence");
    check_dim(y, R.dim, "bregman_divergence");
    if (!R.domain.member(y)) throw DomainError("bregman_divergence: y outside domain");
    Vec gy = R.gradient(y);
    if (!all_finite(gy)) throw DomainError("bregman_divergence: gradient undefined at y");
    return R.value(x) - R.value(y) - dot(gy, x - y);
}

// The conjugate as a potential in its own right; the dual of a registered
// pair swaps the two closed forms, everything else is numeric.
inline ConvexPotential dual_potential(const ConvexPotential& R) {
    ConvexPotential C;
    C.dim = R.dim;
    C.name = R.name.empty() ? "dual" : "dual(" + R.name + ")";
    if (R.has_closed_conjugate) {
        C.value = R.conj_value;
        C.gradient = R.conj_gradient;
        C.domain = R.conj_domain;
    } else {
        auto Rcopy = std::make_shared<ConvexPotential>(R);
        C.value = [Rcopy](const Vec& g) { return conjugate(*Rcopy, g); };
        C.gradient = [Rcopy](const Vec& g) { return conjugate_argmax(*Rcopy, g); };
        C.domain = FeasibleSet::all_of(R.dim);
    }
    C.has_closed_conjugate = true;
    C.conj_value = R.value;
    C.conj_gradient = R.gradient;
    C.conj_domain = R.domain;
    return C;
}

// ---- registry ----

// (1/eta) sum q(i) log q(i) on the simplex, with 0 log 0 = 0. Gradients clamp
// probabilities at 1e-12 before the log so boundary points stay finite.
inline ConvexPotential negative_entropy(std::size_t n, double eta = 1.0) {
    ConvexPotential R;
    R.dim = n;
    R.name = "negative_entropy";
    R.domain = FeasibleSet::simplex(n);
    R.value = [eta](const Vec& q) {
        double s = 0.0;
        for (double v : q)
            if (v > 0.0) s += v * std::log(v);
        return s / eta;
    };
    R.gradient = [eta](const Vec& q) {
        Vec g(q.size());
        for (std::size_t i = 0; i < q.size(); ++i)
            g[i] = (std::log(std::max(q[i], 1e-12)) + 1.0) / eta;
        return g;
    };
    R.has_closed_conjugate = true;
    // (1/eta) log sum exp(eta s): the LMSR cost function.
    R.conj_value = [eta](const Vec& s) {
        double m = s[0];
        for (double v : s) m = std::max(m, v);
        double acc = 0.0;
        for (double v : s) acc += std::exp(eta * (v - m));
        return m + std::log(acc) / eta;
    };
    R.conj_gradient = [eta](const Vec& s) {
        double m = s[0];
        for (double v : s) m = std::max(m, v);
        Vec p(s.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            p[i] = std::exp(eta * (s[i] - m));
            acc += p[i];
        }
        for (double& v : p) v /= acc;
        return p;
    };
    R.conj_domain = FeasibleSet::all_of(n);
    return R;
}

inline ConvexPotential half_squared_norm(std::size_t d) {
    ConvexPotential R;
    R.dim = d;
    R.name = "half_squared_norm";
    R.domain = FeasibleSet::all_of(d);
    R.value = [](const Vec& x) { return 0.5 * dot(x, x); };
    R.gradient = [](const Vec& x) { return x; };
    R.has_closed_conjugate = true;
    R.conj_value = R.value;
    R.conj_gradient = R.gradient;
    R.conj_domain = FeasibleSet::all_of(d);
    return R;
}

// Sampled finiteness probe for R* (Def-level requirement on divergence-based
// losses); cannot certify global finiteness.
inline bool conjugate_finite_on_samples(const ConvexPotential& R, std::size_t samples = 32,
                                        std::uint64_t seed = 7, double scale = 10.0) {
    Rng rng = named_stream(seed, "conj-finite");
    for (std::size_t i = 0; i < samples; ++i) {
        Vec g(R.dim);
        for (double& v : g) v = scale * (2.0 * u01(rng) - 1.0);
        double c;
        try {
            c = conjugate(R, g);
        } catch (const UnboundedError&) {
            return false;
        }
        if (!std::isfinite(c)) return false;
    }
    return true;
}

}  // namespace clm

#endif
