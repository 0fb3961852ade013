#ifndef CLM_SOLVER_HPP
#define CLM_SOLVER_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>

#include "clm/errors.hpp"
#include "clm/feasible_set.hpp"
#include "clm/rng.hpp"
#include "clm/vec.hpp"

namespace clm {

// A smooth scalar objective with gradient. Convexity on the feasible set is
// the caller's assertion.
struct Objective {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
};

struct MinimizeOpts {
    double tol = 1e-8;
    std::size_t max_iters = 20000;
    std::uint64_t seed = 0;
    // Iterates whose objective exceeds this cap are treated as evidence of an
    // unbounded-below problem (used by the numeric conjugate).
    double divergence_cap = 1e14;
};

struct MinimizeResult {
    Vec point;
    double value;
    std::size_t iterations;
};

// Central-difference gradient that degrades to one-sided differences where a
// probe point leaves the objective's finite domain (e.g. log losses at the
// boundary of a floored simplex).
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f, const Vec& w,
                            double h = 1e-6) {
    Vec g(w.size(), 0.0);
    double fw = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < w.size(); ++i) {
        Vec wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        double fp = f(wp), fm = f(wm);
        if (std::isfinite(fp) && std::isfinite(fm)) {
            g[i] = (fp - fm) / (2.0 * h);
            continue;
        }
        if (!std::isfinite(fw)) fw = f(w);
        if (std::isfinite(fp))
            g[i] = (fp - fw) / h;
        else if (std::isfinite(fm))
            g[i] = (fw - fm) / h;
    }
    return g;
}

namespace detail {

struct PgdOutcome {
    Vec x;
    double fx;
    double stationarity;
    std::size_t iters;
};

// Projected gradient descent with Armijo backtracking. Stationarity is
// measured by the norm of the unit-step projected gradient displacement.
inline PgdOutcome pgd(const Objective& obj, const FeasibleSet& K, Vec x, const MinimizeOpts& opts) {
    x = K.project(x);
    double fx = obj.value(x);
    double step = 1.0;
    std::size_t it = 0;
    double stat = std::numeric_limits<double>::infinity();
    for (; it < opts.max_iters; ++it) {
        Vec g = obj.gradient(x);
        Vec probe = K.project(x - g);
        stat = norm2(probe - x);
        if (stat <= opts.tol) break;
        // Backtracking from a slightly grown previous step.
        step = std::min(step * 2.0, 1e6);
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            Vec cand = K.project(x - step * g);
            double fc = obj.value(cand);
            Vec d = cand - x;
            double decrease = dot(g, d) + 0.5 / step * dot(d, d);
            if (fc <= fx + 1e-4 * decrease || fc < fx - 1e-16) {
                x = std::move(cand);
                fx = fc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;  // step underflow: numerically stationary
        if (fx < -opts.divergence_cap)
            throw UnboundedError("objective appears unbounded below on the feasible set");
        if (!K.bounded() && norm2(x) > 1e8)
            throw UnboundedError("iterates diverge on unbounded feasible set");
    }
    return {std::move(x), fx, stat, it};
}

}  // namespace detail

// Deterministic multi-start projected gradient minimization. Starts are the
// set center, the projected origin, and three seeded samples; the converged
// point of the best start wins, ties broken by start order.
inline MinimizeResult minimize(const Objective& obj, const FeasibleSet& K,
                               const MinimizeOpts& opts = {}) {
    std::vector<Vec> starts;
    starts.push_back(K.center());
    starts.push_back(K.project(zeros(K.dim())));
    Rng rng = named_stream(opts.seed, "minimize-starts");
    for (int i = 0; i < 3; ++i) starts.push_back(K.sample(rng));

    bool any_converged = false;
    Vec best;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t total_iters = 0;
    for (const Vec& s : starts) {
        detail::PgdOutcome out = detail::pgd(obj, K, s, opts);
        total_iters += out.iters;
        if (out.stationarity <= opts.tol) any_converged = true;
        if (out.fx < best_val - 1e-15) {
            best_val = out.fx;
            best = std::move(out.x);
        } else if (best.empty()) {
            best_val = out.fx;
            best = std::move(out.x);
        }
    }
    if (!any_converged) {
        // Accept if the best point is stationary to a relaxed tolerance,
        // otherwise surface the failure with the best iterate attached.
        detail::PgdOutcome polish = detail::pgd(obj, K, best, opts);
        if (polish.stationarity <= opts.tol * 100.0)
            return {polish.x, polish.fx, total_iters + polish.iters};
        throw NonConvergenceError("minimize: tolerance not reached", polish.x, polish.fx);
    }
    return {std::move(best), best_val, total_iters};
}

}  // namespace clm

#endif
