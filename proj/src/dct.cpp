#include "tscf/dct.hpp"

#include <cmath>

namespace tscf {

DctPlan::DctPlan(int n) : n_(n), fwd_(static_cast<std::size_t>(n) * n) {
    const double pi = 3.14159265358979323846;
    double c0 = std::sqrt(1.0 / n);
    double ck = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k) {
        double scale = (k == 0) ? c0 : ck;
        for (int j = 0; j < n; ++j)
            fwd_[static_cast<std::size_t>(k) * n + j] = scale * std::cos(pi * (j + 0.5) * k / n);
    }
}

void DctPlan::forward(const double* in, double* out) const {
    for (int k = 0; k < n_; ++k) {
        const double* row = fwd_.data() + static_cast<std::size_t>(k) * n_;
        double acc = 0.0;
        for (int j = 0; j < n_; ++j) acc += row[j] * in[j];
        out[k] = acc;
    }
}

void DctPlan::inverse(const double* in, double* out) const {
    for (int j = 0; j < n_; ++j) out[j] = 0.0;
    for (int k = 0; k < n_; ++k) {
        const double* row = fwd_.data() + static_cast<std::size_t>(k) * n_;
        double c = in[k];
        for (int j = 0; j < n_; ++j) out[j] += row[j] * c;
    }
}

void DctPlan::forward_rows(const double* in, double* out, std::size_t m) const {
    for (std::size_t r = 0; r < m; ++r)
        forward(in + r * n_, out + r * n_);
}

void DctPlan::inverse_rows(const double* in, double* out, std::size_t m) const {
    for (std::size_t r = 0; r < m; ++r)
        inverse(in + r * n_, out + r * n_);
}

void DctPlan::forward_cols(const double* in, double* out, std::size_t width) const {
    for (std::size_t c = 0; c < static_cast<std::size_t>(n_) * width; ++c) out[c] = 0.0;
    for (int k = 0; k < n_; ++k) {
        double* orow = out + static_cast<std::size_t>(k) * width;
        const double* wrow = fwd_.data() + static_cast<std::size_t>(k) * n_;
        for (int j = 0; j < n_; ++j) {
            const double* irow = in + static_cast<std::size_t>(j) * width;
            double w = wrow[j];
            for (std::size_t c = 0; c < width; ++c) orow[c] += w * irow[c];
        }
    }
}

void DctPlan::inverse_cols(const double* in, double* out, std::size_t width) const {
    for (std::size_t c = 0; c < static_cast<std::size_t>(n_) * width; ++c) out[c] = 0.0;
    for (int k = 0; k < n_; ++k) {
        const double* irow = in + static_cast<std::size_t>(k) * width;
        const double* wrow = fwd_.data() + static_cast<std::size_t>(k) * n_;
        for (int j = 0; j < n_; ++j) {
            double* orow = out + static_cast<std::size_t>(j) * width;
            double w = wrow[j];
            for (std::size_t c = 0; c < width; ++c) orow[c] += w * irow[c];
        }
    }
}

DctPlanSet::DctPlanSet(int max_size) {
    plans_.reserve(static_cast<std::size_t>(max_size));
    for (int n = 1; n <= max_size; ++n) plans_.emplace_back(n);
}

}  // namespace tscf
