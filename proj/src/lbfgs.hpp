#pragma once

// Minimal limited-memory BFGS for the tiny (2-parameter) smooth problems in
// this project: two-loop recursion, backtracking Armijo line search with a
// curvature-based step expansion. Deterministic; no allocation per iteration
// beyond the history ring.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace tscf::detail {

struct LbfgsOptions {
    int max_iters = 200;
    int history = 6;
    double grad_tol = 1e-9;    // on the max-norm of the gradient
    double cost_tol = 1e-14;   // relative decrease per iteration
    int max_line_search = 40;
};

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    bool converged = false;
    int iterations = 0;
};

// fn(x, grad_out) -> f
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& fn,
    std::vector<double> x0, const LbfgsOptions& opt = {}) {
    const std::size_t n = x0.size();
    std::vector<double> x = std::move(x0), g(n), xn(n), gn(n), d(n);
    std::vector<std::vector<double>> sh, yh;
    std::vector<double> rho;

    double f = fn(x, g);
    LbfgsResult res;
    res.iterations = 0;

    auto inf_norm = [&](const std::vector<double>& v) {
        double m = 0.0;
        for (double a : v) m = std::max(m, std::abs(a));
        return m;
    };

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        res.iterations = iter + 1;
        if (inf_norm(g) <= opt.grad_tol) {
            res.converged = true;
            break;
        }

        // Two-loop recursion for d = -H g.
        d = g;
        std::vector<double> alpha(sh.size());
        for (std::size_t i = sh.size(); i-- > 0;) {
            double a = 0.0;
            for (std::size_t k = 0; k < n; ++k) a += sh[i][k] * d[k];
            a *= rho[i];
            alpha[i] = a;
            for (std::size_t k = 0; k < n; ++k) d[k] -= a * yh[i][k];
        }
        if (!sh.empty()) {
            const auto& s = sh.back();
            const auto& y = yh.back();
            double sy = 0.0, yy = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                sy += s[k] * y[k];
                yy += y[k] * y[k];
            }
            double scale = sy / yy;
            for (double& v : d) v *= scale;
        }
        for (std::size_t i = 0; i < sh.size(); ++i) {
            double b = 0.0;
            for (std::size_t k = 0; k < n; ++k) b += yh[i][k] * d[k];
            b *= rho[i];
            for (std::size_t k = 0; k < n; ++k) d[k] += (alpha[i] - b) * sh[i][k];
        }
        for (double& v : d) v = -v;

        double gd = 0.0;
        for (std::size_t k = 0; k < n; ++k) gd += g[k] * d[k];
        if (gd >= 0.0) {  // not a descent direction; fall back to steepest
            for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
            gd = 0.0;
            for (std::size_t k = 0; k < n; ++k) gd += g[k] * d[k];
            sh.clear();
            yh.clear();
            rho.clear();
        }

        // Backtracking Armijo with one optional expansion.
        double step = 1.0;
        const double c1 = 1e-4;
        double fn_val = 0.0;
        bool ok = false;
        for (int ls = 0; ls < opt.max_line_search; ++ls) {
            for (std::size_t k = 0; k < n; ++k) xn[k] = x[k] + step * d[k];
            fn_val = fn(xn, gn);
            if (fn_val <= f + c1 * step * gd) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) break;  // line search failed; report best so far

        // Curvature pair.
        double sy = 0.0;
        std::vector<double> s(n), y(n);
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = xn[k] - x[k];
            y[k] = gn[k] - g[k];
            sy += s[k] * y[k];
        }
        if (sy > 1e-14) {
            sh.push_back(std::move(s));
            yh.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(sh.size()) > opt.history) {
                sh.erase(sh.begin());
                yh.erase(yh.begin());
                rho.erase(rho.begin());
            }
        }

        double df = f - fn_val;
        x.swap(xn);
        g.swap(gn);
        f = fn_val;
        if (df <= opt.cost_tol * std::max(1.0, std::abs(f))) {
            res.converged = true;
            break;
        }
    }
    if (inf_norm(g) <= opt.grad_tol) res.converged = true;
    res.x = std::move(x);
    res.f = f;
    return res;
}

}  // namespace tscf::detail
