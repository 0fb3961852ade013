#ifndef CLM_FEASIBLE_SET_HPP
#define CLM_FEASIBLE_SET_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "clm/errors.hpp"
#include "clm/rng.hpp"
#include "clm/vec.hpp"

namespace clm {

// Convex feasible regions used as hypothesis spaces and potential domains.
// Simplex supports an optional per-coordinate floor (the epsilon-interior
// simplex used by markets whose loss blows up at the boundary).
class FeasibleSet {
  public:
    enum class Kind { Simplex, L2Ball, Box, All };

    static FeasibleSet simplex(std::size_t n, double floor = 0.0) {
        FeasibleSet k;
        k.kind_ = Kind::Simplex;
        k.dim_ = n;
        k.floor_ = floor;
        if (n == 0 || floor < 0.0 || floor * static_cast<double>(n) >= 1.0)
            throw ConstructionError("simplex: invalid dimension or floor");
        return k;
    }

    static FeasibleSet l2_ball(std::size_t d, double radius) {
        FeasibleSet k;
        k.kind_ = Kind::L2Ball;
        k.dim_ = d;
        k.radius_ = radius;
        if (d == 0 || radius <= 0.0) throw ConstructionError("l2_ball: invalid parameters");
        return k;
    }

    static FeasibleSet box(const Vec& lo, const Vec& hi) {
        FeasibleSet k;
        k.kind_ = Kind::Box;
        k.dim_ = lo.size();
        k.lo_ = lo;
        k.hi_ = hi;
        if (lo.empty() || lo.size() != hi.size()) throw ConstructionError("box: invalid bounds");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) throw ConstructionError("box: lo must be < hi");
        return k;
    }

    static FeasibleSet all_of(std::size_t dim) {
        FeasibleSet k;
        k.kind_ = Kind::All;
        k.dim_ = dim;
        return k;
    }

    Kind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    double radius() const { return radius_; }
    double floor() const { return floor_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    bool bounded() const { return kind_ != Kind::All; }

    bool member(const Vec& x, double tol = 1e-9) const {
        if (x.size() != dim_) return false;
        switch (kind_) {
            case Kind::Simplex: {
                double s = 0.0;
                for (double v : x) {
                    if (v < floor_ - tol) return false;
                    s += v;
                }
                return std::fabs(s - 1.0) <= tol;
            }
            case Kind::L2Ball:
                return norm2(x) <= radius_ + tol;
            case Kind::Box:
                for (std::size_t i = 0; i < dim_; ++i)
                    if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
                return true;
            case Kind::All:
                return all_finite(x);
        }
        return false;
    }

    // Euclidean projection. Simplex uses the exact sort-and-threshold rule;
    // the floored simplex reduces to the plain one by a shift of variables.
    Vec project(const Vec& x) const {
        check_dim(x, dim_, "project");
        switch (kind_) {
            case Kind::Simplex: {
                const double mass = 1.0 - floor_ * static_cast<double>(dim_);
                Vec y(dim_);
                for (std::size_t i = 0; i < dim_; ++i) y[i] = x[i] - floor_;
                Vec z = project_simplex_mass(y, mass);
                for (std::size_t i = 0; i < dim_; ++i) z[i] += floor_;
                return z;
            }
            case Kind::L2Ball: {
                double n = norm2(x);
                if (n <= radius_) return x;
                return (radius_ / n) * x;
            }
            case Kind::Box: {
                Vec y(dim_);
                for (std::size_t i = 0; i < dim_; ++i)
                    y[i] = std::clamp(x[i], lo_[i], hi_[i]);
                return y;
            }
            case Kind::All:
                return x;
        }
        return x;
    }

    // An interior point, used as a deterministic solver start.
    Vec center() const {
        switch (kind_) {
            case Kind::Simplex:
                return Vec(dim_, 1.0 / static_cast<double>(dim_));
            case Kind::L2Ball:
            case Kind::All:
                return zeros(dim_);
            case Kind::Box: {
                Vec c(dim_);
                for (std::size_t i = 0; i < dim_; ++i) c[i] = 0.5 * (lo_[i] + hi_[i]);
                return c;
            }
        }
        return zeros(dim_);
    }

    Vec sample(Rng& rng) const {
        switch (kind_) {
            case Kind::Simplex: {
                Vec p = random_simplex(rng, dim_);
                return project(p);
            }
            case Kind::L2Ball: {
                Vec g(dim_);
                for (double& v : g) v = gaussian(rng);
                double r = radius_ * std::pow(u01(rng), 1.0 / static_cast<double>(dim_));
                double n = std::max(norm2(g), 1e-300);
                return (r / n) * g;
            }
            case Kind::Box:
                return random_in_box(rng, lo_, hi_);
            case Kind::All: {
                Vec g(dim_);
                for (double& v : g) v = gaussian(rng);
                return g;
            }
        }
        return zeros(dim_);
    }

    // Extreme points (projected where a floor applies). Unbounded sets have none.
    std::vector<Vec> extreme_points() const {
        std::vector<Vec> pts;
        switch (kind_) {
            case Kind::Simplex:
                for (std::size_t i = 0; i < dim_; ++i) {
                    Vec v(dim_, floor_);
                    v[i] = 1.0 - floor_ * static_cast<double>(dim_ - 1);
                    pts.push_back(v);
                }
                break;
            case Kind::L2Ball:
                for (std::size_t i = 0; i < dim_; ++i) {
                    pts.push_back((radius_) * unit(dim_, i));
                    pts.push_back((-radius_) * unit(dim_, i));
                }
                break;
            case Kind::Box:
                if (dim_ <= 16) {
                    for (std::size_t mask = 0; mask < (std::size_t(1) << dim_); ++mask) {
                        Vec v(dim_);
                        for (std::size_t i = 0; i < dim_; ++i)
                            v[i] = (mask >> i) & 1 ? hi_[i] : lo_[i];
                        pts.push_back(v);
                    }
                }
                break;
            case Kind::All:
                break;
        }
        return pts;
    }

    // Deterministic audit grid: a per-dimension lattice for low dims, a seeded
    // point cloud otherwise. Extreme points and the center are always included.
    std::vector<Vec> audit_grid(double step = 1e-2, std::size_t random_count = 10000,
                                std::uint64_t seed = 1) const {
        std::vector<Vec> pts = extreme_points();
        pts.push_back(center());
        if (dim_ <= 3 && bounded() && lattice_size(step) <= 200000) {
            lattice(step, pts);
        } else {
            Rng rng = named_stream(seed, "audit-grid");
            for (std::size_t i = 0; i < random_count; ++i) pts.push_back(sample(rng));
        }
        return pts;
    }

  private:
    FeasibleSet() = default;

    // Projection of y onto {z >= 0, sum z = mass}.
    static Vec project_simplex_mass(const Vec& y, double mass) {
        const std::size_t n = y.size();
        Vec u = y;
        std::sort(u.begin(), u.end(), std::greater<double>());
        double css = 0.0;
        double theta = (u[0] - mass);  // fallback: single active coordinate
        for (std::size_t k = 0; k < n; ++k) {
            css += u[k];
            double t = (css - mass) / static_cast<double>(k + 1);
            if (u[k] > t) theta = t;
        }
        Vec z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = std::max(y[i] - theta, 0.0);
        // Renormalize away accumulated round-off on the mass constraint.
        double s = 0.0;
        for (double v : z) s += v;
        if (s > 0.0 && std::fabs(s - mass) > 0.0)
            for (double& v : z) v *= mass / s;
        return z;
    }

    double lattice_size(double step) const {
        switch (kind_) {
            case Kind::Simplex: {
                double m = std::round(1.0 / step);
                double c = 1.0;
                for (std::size_t i = 1; i < dim_; ++i) c *= (m + static_cast<double>(i)) / i;
                return c;
            }
            case Kind::L2Ball:
                return std::pow(2.0 * radius_ / step + 1.0, static_cast<double>(dim_));
            case Kind::Box: {
                double c = 1.0;
                for (std::size_t i = 0; i < dim_; ++i) c *= (hi_[i] - lo_[i]) / step + 1.0;
                return c;
            }
            case Kind::All:
                return 0.0;
        }
        return 0.0;
    }

    void lattice(double step, std::vector<Vec>& out) const {
        switch (kind_) {
            case Kind::Simplex: {
                // Lattice over the first dim-1 coordinates, last one implied.
                std::size_t m = static_cast<std::size_t>(std::round(1.0 / step));
                Vec v(dim_);
                lattice_simplex_rec(0, m, m, step, v, out);
                break;
            }
            case Kind::L2Ball:
            case Kind::Box: {
                Vec lo(dim_), hi(dim_);
                for (std::size_t i = 0; i < dim_; ++i) {
                    lo[i] = kind_ == Kind::Box ? lo_[i] : -radius_;
                    hi[i] = kind_ == Kind::Box ? hi_[i] : radius_;
                }
                std::vector<std::size_t> steps(dim_);
                for (std::size_t i = 0; i < dim_; ++i)
                    steps[i] = static_cast<std::size_t>(std::round((hi[i] - lo[i]) / step));
                Vec v(dim_);
                lattice_box_rec(0, lo, hi, steps, v, out);
                break;
            }
            case Kind::All:
                break;
        }
    }

    void lattice_simplex_rec(std::size_t i, std::size_t left, std::size_t m, double step, Vec& v,
                             std::vector<Vec>& out) const {
        if (i + 1 == dim_) {
            v[i] = static_cast<double>(left) * step;
            out.push_back(project(v));
            return;
        }
        for (std::size_t k = 0; k <= left; ++k) {
            v[i] = static_cast<double>(k) * step;
            lattice_simplex_rec(i + 1, left - k, m, step, v, out);
        }
    }

    void lattice_box_rec(std::size_t i, const Vec& lo, const Vec& hi,
                         const std::vector<std::size_t>& steps, Vec& v,
                         std::vector<Vec>& out) const {
        if (i == dim_) {
            if (kind_ == Kind::L2Ball && norm2(v) > radius_) {
                out.push_back(project(v));
            } else {
                out.push_back(v);
            }
            return;
        }
        for (std::size_t k = 0; k <= steps[i]; ++k) {
            v[i] = lo[i] + static_cast<double>(k) * (hi[i] - lo[i]) / static_cast<double>(steps[i]);
            lattice_box_rec(i + 1, lo, hi, steps, v, out);
        }
    }

    Kind kind_ = Kind::All;
    std::size_t dim_ = 0;
    double radius_ = 1.0;
    double floor_ = 0.0;
    Vec lo_, hi_;
};

}  // namespace clm

#endif
