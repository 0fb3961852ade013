#ifndef CLM_VEC_HPP
#define CLM_VEC_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace clm {

// Dense real vector. Dimensions in this library are small (market outcome
// counts, feature dims), so plain std::vector<double> is enough.
using Vec = std::vector<double>;

inline void check_dim(const Vec& a, std::size_t n, const char* what) {
    if (a.size() != n)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

inline double dot(const Vec& a, const Vec& b) {
    check_dim(b, a.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator+(const Vec& a, const Vec& b) {
    check_dim(b, a.size(), "operator+");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec operator-(const Vec& a, const Vec& b) {
    check_dim(b, a.size(), "operator-");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec operator*(double c, const Vec& a) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

inline Vec& operator+=(Vec& a, const Vec& b) {
    check_dim(b, a.size(), "operator+=");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec zeros(std::size_t n) { return Vec(n, 0.0); }

inline Vec unit(std::size_t n, std::size_t i) {
    Vec r(n, 0.0);
    r[i] = 1.0;
    return r;
}

inline bool all_finite(const Vec& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
    check_dim(b, a.size(), "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace clm

#endif
