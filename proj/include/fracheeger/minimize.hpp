#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

namespace fracheeger {

struct MinimizeOptions {
    double grad_tol = 1e-8;       ///< stop when scaled sup-norm of the gradient drops below this
    double grad_scale = 1.0;      ///< gradient is multiplied by this before the sup-norm test
    double energy_rel_tol = 1e-12;
    int max_iters = 20000;
    int memory = 10;              ///< number of stored curvature pairs
    double armijo_c = 1e-4;       ///< sufficient-decrease constant
    double shrink = 0.5;          ///< backtracking factor
    int max_backtracks = 60;
    int stall_limit = 10;         ///< consecutive sub-tolerance energy decreases before giving up
    std::function<void(int iter, double energy, double grad_norm)> trace;
};

struct MinimizeResult {
    std::vector<double> x;
    double energy = 0.0;
    double grad_norm = 0.0;  ///< scaled sup-norm at exit
    int iterations = 0;
    bool converged = false;
};

/// Limited-memory quasi-Newton descent with Armijo backtracking.
///
/// The objective callback fills the gradient and returns the value:
///   double obj(const std::vector<double>& x, std::vector<double>& grad)
/// Intended for smooth convex energies; on those the two-loop direction plus
/// backtracking gives robust superlinear local behavior even when the
/// curvature degenerates (p close to 1 in the fractional energies).
template <class Obj>
MinimizeResult minimize(Obj&& obj, std::vector<double> x, const MinimizeOptions& opts) {
    const std::size_t n = x.size();
    auto sup = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double a : v) m = std::max(m, std::abs(a));
        return m;
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };

    std::vector<double> g(n), g_new(n), d(n), x_new(n);
    double E = obj(x, g);
    if (!std::isfinite(E)) throw std::runtime_error("minimize: objective is not finite at the start point");
    double gn = sup(g) * opts.grad_scale;

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> pairs;
    std::vector<double> alpha;

    MinimizeResult res;
    res.converged = gn <= opts.grad_tol;
    int stall = 0;
    int iter = 0;

    while (!res.converged && iter < opts.max_iters) {
        // two-loop recursion for d = -H g
        d = g;
        alpha.assign(pairs.size(), 0.0);
        for (std::size_t k = pairs.size(); k-- > 0;) {
            const auto& P = pairs[k];
            alpha[k] = P.rho * dot(P.s, d);
            for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * P.y[i];
        }
        if (!pairs.empty()) {
            const auto& last = pairs.back();
            const double yy = dot(last.y, last.y);
            const double gamma = yy > 0.0 ? 1.0 / (last.rho * yy) : 1.0;
            for (auto& v : d) v *= gamma;
        }
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto& P = pairs[k];
            const double beta = P.rho * dot(P.y, d);
            for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * P.s[i];
        }
        for (auto& v : d) v = -v;

        double gd = dot(g, d);
        if (!(gd < 0.0)) {
            pairs.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            gd = -dot(g, g);
            if (!(gd < 0.0)) break;  // gradient numerically zero
        }

        double t = pairs.empty() ? std::min(1.0, 1.0 / std::max(1.0, sup(g))) : 1.0;
        double E_new = 0.0;
        bool accepted = false, saw_nonfinite = false;
        for (int bt = 0; bt < opts.max_backtracks; ++bt) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + t * d[i];
            E_new = obj(x_new, g_new);
            if (std::isfinite(E_new)) {
                if (E_new <= E + opts.armijo_c * t * gd) {
                    accepted = true;
                    break;
                }
            } else {
                saw_nonfinite = true;
            }
            t *= opts.shrink;
        }
        if (!accepted) {
            if (saw_nonfinite)
                throw std::runtime_error("minimize: line search hit a non-finite objective value");
            if (!pairs.empty()) {
                pairs.clear();  // retry from steepest descent
                continue;
            }
            break;  // no further progress possible at this precision
        }

        Pair P;
        P.s.resize(n);
        P.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            P.s[i] = x_new[i] - x[i];
            P.y[i] = g_new[i] - g[i];
        }
        const double sy = dot(P.s, P.y);
        if (sy > 0.0 && std::isfinite(sy)) {
            P.rho = 1.0 / sy;
            pairs.push_back(std::move(P));
            if (int(pairs.size()) > opts.memory) pairs.pop_front();
        }

        const double dE = E - E_new;
        x.swap(x_new);
        g.swap(g_new);
        E = E_new;
        gn = sup(g) * opts.grad_scale;
        ++iter;
        if (opts.trace) opts.trace(iter, E, gn);

        if (gn <= opts.grad_tol) {
            res.converged = true;
            break;
        }
        if (dE <= opts.energy_rel_tol * std::max(std::abs(E), 1.0)) {
            if (++stall >= opts.stall_limit) break;
        } else {
            stall = 0;
        }
    }

    res.x = std::move(x);
    res.energy = E;
    res.grad_norm = gn;
    res.iterations = iter;
    return res;
}

} // namespace fracheeger
