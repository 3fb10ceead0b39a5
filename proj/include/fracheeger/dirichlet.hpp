#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fracheeger/field.hpp"
#include "fracheeger/kernel.hpp"
#include "fracheeger/minimize.hpp"
#include "fracheeger/parallel.hpp"

namespace fracheeger {

struct SolverConfig {
    double grad_tol = 1e-8;        ///< sup-norm of the h^-N scaled gradient
    double energy_rel_tol = 1e-12;
    int max_iters = 20000;
    double armijo_c = 1e-4;
    double shrink = 0.5;
    int memory = 10;
    std::optional<ScalarField> warm_start;
    std::filesystem::path trace_path;  ///< CSV of (iteration, energy, gradient norm) when set
};

struct TorsionResult {
    ScalarField phi;
    double l1_norm = 0.0;
    double sup_norm = 0.0;
    double energy_value = 0.0;
    double m_value = 0.0;  ///< l1^(1-p), the normalized-minimum level
    int iterations = 0;
    double residual = 0.0;  ///< scaled gradient sup-norm at exit
    bool converged = false;
};

namespace detail {

/// Fused value and gradient of the Dirichlet energy
///   E(u) = (1/p) S_p(u) - h^N sum_i f_i u_i.
/// Chunked over rows with per-chunk scratch gradients merged in fixed order,
/// so the result is bit-identical for any worker count.
inline double energy_and_gradient(const KernelWeights& W, const std::vector<double>& u,
                                  const std::vector<double>& f, double p, std::vector<double>& grad) {
    const std::size_t M = W.count;
    grad.assign(M, 0.0);
    const std::size_t n_chunks = par::default_chunks(M);
    std::vector<double> chunk_energy(n_chunks, 0.0);
    std::vector<std::vector<double>> chunk_grad(n_chunks);

    const double pm1 = p - 1.0;
    const bool quadratic = p == 2.0;
    par::chunked_for(
        M, n_chunks,
        [&](std::size_t c, std::size_t ib, std::size_t ie) {
            auto& g = chunk_grad[c];
            g.assign(M, 0.0);
            double e_pairs = 0.0;
            for (std::size_t i = ib; i < ie; ++i) {
                const double ui = u[i];
                double gi = 0.0;
                std::size_t idx = W.tri_index(i, i + 1);
                if (quadratic) {
                    for (std::size_t j = i + 1; j < M; ++j, ++idx) {
                        const double w = W.pair[idx];
                        const double d = ui - u[j];
                        e_pairs += w * d * d;
                        const double t = 2.0 * w * d;
                        gi += t;
                        g[j] -= t;
                    }
                } else {
                    for (std::size_t j = i + 1; j < M; ++j, ++idx) {
                        const double d = ui - u[j];
                        if (d == 0.0) continue;
                        const double w = W.pair[idx];
                        const double a = std::pow(std::abs(d), pm1);
                        e_pairs += w * a * std::abs(d);
                        const double t = 2.0 * w * std::copysign(a, d);
                        gi += t;
                        g[j] -= t;
                    }
                }
                g[i] += gi;
            }
            chunk_energy[c] = e_pairs;
        },
        [&](std::size_t c) {
            const auto& g = chunk_grad[c];
            for (std::size_t i = 0; i < M; ++i) grad[i] += g[i];
        });

    double e_pairs = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) e_pairs += chunk_energy[c];

    double e_tail = 0.0, fu = 0.0;
    const double hN = W.cell_volume;
    for (std::size_t i = 0; i < M; ++i) {
        const double ui = u[i];
        const double k = W.tail[i];
        if (ui != 0.0) {
            if (quadratic) {
                e_tail += k * ui * ui;
                grad[i] += 2.0 * hN * k * ui;
            } else {
                const double a = std::pow(std::abs(ui), pm1);
                e_tail += k * a * std::abs(ui);
                grad[i] += 2.0 * hN * k * std::copysign(a, ui);
            }
        }
        fu += f[i] * ui;
        grad[i] -= hN * f[i];
    }
    return (2.0 * e_pairs + 2.0 * hN * e_tail) / p - hN * fu;
}

} // namespace detail

/// Dirichlet energy (1/p) [u]^p - integral of f u.
inline double energy(const KernelWeights& W, const ScalarField& u, const ScalarField& f, double p) {
    detail::check_energy_eval(W, u, p, "energy");
    require_same_size(f, W.count, "energy");
    double fu = 0.0;
    for (std::size_t i = 0; i < W.count; ++i) fu += f[i] * u[i];
    return seminorm_p(W, u, p) / p - W.cell_volume * fu;
}

/// Euler-Lagrange gradient of the Dirichlet energy; a zero gradient is the
/// discrete weak formulation tested against every coordinate direction.
inline ScalarField gradient(const KernelWeights& W, const ScalarField& u, const ScalarField& f, double p) {
    detail::check_energy_eval(W, u, p, "gradient");
    require_same_size(f, W.count, "gradient");
    std::vector<double> g;
    detail::energy_and_gradient(W, u.values, f.values, p, g);
    return ScalarField(std::move(g));
}

/// Minimizes the strictly convex Dirichlet energy for right-hand side f.
/// Starts from cfg.warm_start when present, otherwise from zero.
inline TorsionResult solve_dirichlet(const KernelWeights& W, const ScalarField& f, double p,
                                     const SolverConfig& cfg) {
    detail::check_energy_eval(W, f, p, "solve_dirichlet");
    const std::size_t M = W.count;

    std::vector<double> x0(M, 0.0);
    if (cfg.warm_start) {
        require_same_size(*cfg.warm_start, M, "solve_dirichlet warm start");
        x0 = cfg.warm_start->values;
    }

    MinimizeOptions mo;
    mo.grad_tol = cfg.grad_tol;
    mo.grad_scale = 1.0 / W.cell_volume;
    mo.energy_rel_tol = cfg.energy_rel_tol;
    mo.max_iters = cfg.max_iters;
    mo.memory = cfg.memory;
    mo.armijo_c = cfg.armijo_c;
    mo.shrink = cfg.shrink;

    std::ofstream trace;
    if (!cfg.trace_path.empty()) {
        trace.open(cfg.trace_path);
        if (!trace) throw std::runtime_error("cannot open trace file '" + cfg.trace_path.string() + "'");
        trace << "iteration,energy,grad_norm\n";
        mo.trace = [&trace](int it, double E, double gn) {
            char line[96];
            std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", it, E, gn);
            trace << line;
        };
    }

    auto objective = [&](const std::vector<double>& x, std::vector<double>& g) {
        return detail::energy_and_gradient(W, x, f.values, p, g);
    };
    MinimizeResult mr = minimize(objective, std::move(x0), mo);

    TorsionResult r;
    r.phi = ScalarField(std::move(mr.x));
    r.l1_norm = l1_norm(r.phi, W.cell_volume);
    r.sup_norm = sup_norm(r.phi);
    r.energy_value = mr.energy;
    r.m_value = r.l1_norm > 0.0 ? std::pow(r.l1_norm, 1.0 - p) : 0.0;
    r.iterations = mr.iterations;
    r.residual = mr.grad_norm;
    r.converged = mr.converged;
    return r;
}

/// Torsion case f = 1. The minimizer is nonnegative up to solver round-off;
/// stray negative values within grad_tol are clamped to zero in the reported
/// field, anything worse is treated as a solver failure.
inline TorsionResult torsion_function(const KernelWeights& W, double p, const SolverConfig& cfg) {
    TorsionResult r = solve_dirichlet(W, ScalarField(W.count, 1.0), p, cfg);
    double min_v = 0.0;
    for (double v : r.phi) min_v = std::min(min_v, v);
    if (min_v < -cfg.grad_tol)
        throw std::runtime_error("torsion_function: solution dips below -grad_tol (solver failure), min = " +
                                 std::to_string(min_v));
    for (auto& v : r.phi.values)
        if (v < 0.0) v = 0.0;
    r.l1_norm = l1_norm(r.phi, W.cell_volume);
    r.sup_norm = sup_norm(r.phi);
    r.m_value = std::pow(r.l1_norm, 1.0 - p);
    return r;
}

} // namespace fracheeger
