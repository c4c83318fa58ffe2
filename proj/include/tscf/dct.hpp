#pragma once

#include <cstddef>
#include <vector>

namespace tscf {

/// Orthonormal type-II DCT of a fixed length as a dense matrix.
/// Sizes here are at most a few dozen, so O(n^2) transforms are both fast
/// enough and exactly energy-preserving (Parseval to rounding).
class DctPlan {
public:
    explicit DctPlan(int n);

    int size() const { return n_; }

    /// out[k] = sum_j fwd[k][j] * in[j]
    void forward(const double* in, double* out) const;
    /// Inverse of an orthonormal transform is its transpose.
    void inverse(const double* in, double* out) const;

    /// Row-wise transforms of an m x n_ row-major matrix along the columns-of-each-row axis.
    void forward_rows(const double* in, double* out, std::size_t m) const;
    void inverse_rows(const double* in, double* out, std::size_t m) const;

    /// Transform along the row index of an m x width row-major matrix (m == size()).
    void forward_cols(const double* in, double* out, std::size_t width) const;
    void inverse_cols(const double* in, double* out, std::size_t width) const;

private:
    int n_;
    std::vector<double> fwd_;  // n_ x n_, row-major: fwd_[k*n_+j]
};

/// Plans for sizes 1..max_size, built once and shared read-only.
class DctPlanSet {
public:
    explicit DctPlanSet(int max_size);
    const DctPlan& plan(int n) const { return plans_[static_cast<std::size_t>(n - 1)]; }
    int max_size() const { return static_cast<int>(plans_.size()); }

private:
    std::vector<DctPlan> plans_;
};

}  // namespace tscf
