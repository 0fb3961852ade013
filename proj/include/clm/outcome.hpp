#ifndef CLM_OUTCOME_HPP
#define CLM_OUTCOME_HPP

#include <cstdint>
#include <variant>
#include <vector>

#include "clm/errors.hpp"
#include "clm/rng.hpp"
#include "clm/vec.hpp"

namespace clm {

struct DataPoint {
    Vec x;
    double y;
};

// One outcome of a regression market: a batch of test data.
using Batch = std::vector<DataPoint>;

// An outcome is a character index (finite alphabets), a test batch
// (regression), or a label vector (label betting).
using Outcome = std::variant<int, Batch, Vec>;

// Outcome spaces. Finite spaces enumerate exactly; batch and label spaces
// expose a deterministic audit set (extreme outcomes plus seeded samples) in
// place of enumeration.
class OutcomeSpace {
  public:
    enum class Kind { Finite, DatasetBatch, LabelVector };

    static OutcomeSpace finite(int n) {
        OutcomeSpace o;
        o.kind_ = Kind::Finite;
        o.n_ = n;
        if (n <= 0) throw ConstructionError("finite outcome space needs n > 0");
        for (int i = 0; i < n; ++i) o.audit_.push_back(i);
        return o;
    }

    // Audit set: single-point extreme batches {(+-e_j, +-1)} plus seeded
    // random batches of the given size.
    static OutcomeSpace dataset_batch(int d, int batch_size, std::uint64_t seed,
                                      int sampled_audit = 12) {
        OutcomeSpace o;
        o.kind_ = Kind::DatasetBatch;
        o.d_ = d;
        o.batch_size_ = batch_size;
        o.seed_ = seed;
        if (d <= 0 || batch_size <= 0) throw ConstructionError("dataset_batch: bad parameters");
        for (int j = 0; j < d; ++j)
            for (double sx : {1.0, -1.0})
                for (double sy : {1.0, -1.0})
                    o.audit_.push_back(Batch{{sx * unit(d, j), sy}});
        Rng rng = named_stream(seed, "batch-audit");
        for (int i = 0; i < sampled_audit; ++i) o.audit_.push_back(o.sample_batch(rng));
        return o;
    }

    static OutcomeSpace label_vector(int m, double lo, double hi, std::uint64_t seed,
                                     int sampled_audit = 12) {
        OutcomeSpace o;
        o.kind_ = Kind::LabelVector;
        o.m_ = m;
        o.lo_ = lo;
        o.hi_ = hi;
        o.seed_ = seed;
        if (m <= 0 || !(lo < hi)) throw ConstructionError("label_vector: bad parameters");
        if (m <= 10) {
            for (std::size_t mask = 0; mask < (std::size_t(1) << m); ++mask) {
                Vec v(m);
                for (int k = 0; k < m; ++k) v[k] = (mask >> k) & 1 ? hi : lo;
                o.audit_.push_back(v);
            }
        }
        Rng rng = named_stream(seed, "label-audit");
        for (int i = 0; i < sampled_audit; ++i) {
            Vec v(m);
            for (int k = 0; k < m; ++k) v[k] = uniform(rng, lo, hi);
            o.audit_.push_back(v);
        }
        return o;
    }

    Kind kind() const { return kind_; }
    int alphabet_size() const { return n_; }
    int feature_dim() const { return d_; }
    int label_count() const { return m_; }
    double label_lo() const { return lo_; }
    double label_hi() const { return hi_; }

    // Exhaustive for finite spaces, the audit set otherwise.
    const std::vector<Outcome>& audit_outcomes() const { return audit_; }

    // Extra outcomes (e.g. the actual test batch) join the audit set.
    void add_audit_outcome(Outcome x) { audit_.push_back(std::move(x)); }

    Outcome sample(Rng& rng) const {
        switch (kind_) {
            case Kind::Finite:
                return static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n_)));
            case Kind::DatasetBatch:
                return sample_batch(rng);
            case Kind::LabelVector: {
                Vec v(m_);
                for (int k = 0; k < m_; ++k) v[k] = uniform(rng, lo_, hi_);
                return v;
            }
        }
        return 0;
    }

    bool contains(const Outcome& x) const {
        switch (kind_) {
            case Kind::Finite: {
                const int* i = std::get_if<int>(&x);
                return i && *i >= 0 && *i < n_;
            }
            case Kind::DatasetBatch: {
                const Batch* b = std::get_if<Batch>(&x);
                if (!b || b->empty()) return false;
                for (const DataPoint& p : *b)
                    if (static_cast<int>(p.x.size()) != d_ || norm2(p.x) > 1.0 + 1e-9 ||
                        p.y < -1.0 - 1e-9 || p.y > 1.0 + 1e-9)
                        return false;
                return true;
            }
            case Kind::LabelVector: {
                const Vec* v = std::get_if<Vec>(&x);
                if (!v || static_cast<int>(v->size()) != m_) return false;
                for (double y : *v)
                    if (y < lo_ - 1e-9 || y > hi_ + 1e-9) return false;
                return true;
            }
        }
        return false;
    }

  private:
    OutcomeSpace() = default;

    Batch sample_batch(Rng& rng) const {
        Batch b;
        for (int i = 0; i < batch_size_; ++i) {
            Vec x(d_);
            for (double& v : x) v = gaussian(rng);
            double scale = std::pow(u01(rng), 1.0 / d_) / std::max(norm2(x), 1e-300);
            for (double& v : x) v *= scale;
            b.push_back({x, uniform(rng, -1.0, 1.0)});
        }
        return b;
    }

    Kind kind_ = Kind::Finite;
    int n_ = 0, d_ = 0, m_ = 0, batch_size_ = 0;
    double lo_ = 0.0, hi_ = 0.0;
    std::uint64_t seed_ = 0;
    std::vector<Outcome> audit_;
};

// A finitely supported distribution over outcomes.
struct Belief {
    std::vector<Outcome> support;
    Vec weights;

    Belief() = default;
    Belief(std::vector<Outcome> s, Vec w) : support(std::move(s)), weights(std::move(w)) {
        validate();
    }

    // Belief over a finite alphabet from a probability vector.
    static Belief categorical(const Vec& p) {
        std::vector<Outcome> s;
        for (int i = 0; i < static_cast<int>(p.size()); ++i) s.emplace_back(i);
        return Belief(std::move(s), p);
    }

    static Belief point_mass(Outcome x) { return Belief({std::move(x)}, {1.0}); }

    void validate() const {
        if (support.size() != weights.size())
            throw ShapeError("belief: support/weights size mismatch");
        double s = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw DomainError("belief: negative weight");
            s += w;
        }
        if (std::fabs(s - 1.0) > 1e-12) throw DomainError("belief: weights must sum to 1");
    }
};

}  // namespace clm

#endif
