#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "miscon/errors.hpp"

namespace miscon {

/// Dense embedding. Scoring assumes unit-norm vectors so that the dot product
/// is the cosine similarity; normalize() is applied at index build time and to
/// every query vector.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t dimension() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double norm() const {
        double sum = 0.0;
        for (double v : values_) sum += v * v;
        return std::sqrt(sum);
    }

    bool is_unit(double tolerance = 1e-6) const { return std::fabs(norm() - 1.0) <= tolerance; }

    /// Scales to unit length in place. A zero (or numerically zero) vector has
    /// no direction, so it is rejected rather than silently passed through.
    void normalize() {
        const double n = norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw InputError("cannot normalize embedding with zero or non-finite norm");
        }
        for (double& v : values_) v /= n;
    }

private:
    std::vector<double> values_;
};

/// Plain left-to-right accumulation. Tests pin exact score values against an
/// independently computed oracle, so the summation order is part of the
/// contract; do not reorder or vectorize with fast-math.
inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw InputError("embedding dimension mismatch: " + std::to_string(a.dimension()) +
                         " vs " + std::to_string(b.dimension()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dimension(); ++i) sum += a.values()[i] * b.values()[i];
    return sum;
}

}  // namespace miscon
