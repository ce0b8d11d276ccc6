// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace dropref {

namespace {

void check_losses(const VecX& losses) {
    if (losses.size() == 0) throw ContractError("weights: empty loss vector");
    if (!losses.allFinite()) throw ContractError("weights: non-finite loss value");
}

void check_reference(const VecX& p) {
    if (p.size() == 0) throw ContractError("weights: empty reference distribution");
    if (!p.allFinite() || p.minCoeff() < -1e-12)
        throw ContractError("weights: reference distribution has negative entries");
    if (std::abs(p.sum() - 1.0) > 1e-9)
        throw ContractError("weights: reference distribution does not sum to 1");
}

/// Indices sorted by (value ascending, index ascending).
std::vector<Eigen::Index> sort_indices(const VecX& v) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
    return idx;
}

/// Max-sense TV greedy with arbitrary reference p. Min is handled by
/// the callers through negation.
std::pair<VecX, double> shift_tv_max(const VecX& values, const VecX& p, double rho) {
    const Eigen::Index n = values.size();
    VecX q = p;
    if (rho > 0.0 && n > 1) {
        // receiver: largest value, ties to the lowest index
        Eigen::Index receiver = 0;
        for (Eigen::Index i = 1; i < n; ++i)
            if (values[i] > values[receiver]) receiver = i;

        double delta = std::min(rho, 1.0 - p[receiver]);
        q[receiver] += delta;

        // drain the smallest-value entries first, each capped at its
        // reference mass
        for (Eigen::Index i : sort_indices(values)) {
            if (delta <= 0.0) break;
            if (i == receiver) continue;
            const double take = std::min(delta, p[i]);
            q[i] -= take;
            delta -= take;
        }
    }
    return {std::move(q), 0.0};
}

struct Chi2Result {
    VecX q;
    double sum_residual;
    double constraint_residual;
    bool converged;
};

/// Max-sense chi-square dual with arbitrary reference p.
/// q_i(lambda, mu) = p_i * max(0, 1 + (v_i - mu)/lambda).
Chi2Result shift_chi2_max(const VecX& values, const VecX& p, double rho) {
    constexpr int kMaxSteps = 200;
    constexpr double kTol = 1e-10;
    const Eigen::Index n = values.size();

    const auto weights_at = [&](double lambda, double mu) {
        VecX q(n);
        for (Eigen::Index i = 0; i < n; ++i)
            q[i] = p[i] * std::max(0.0, 1.0 + (values[i] - mu) / lambda);
        return q;
    };

    const double v_min = values.minCoeff();
    const double v_max = values.maxCoeff();

    // inner bisection: find mu with sum q(lambda, mu) = 1
    const auto solve_mu = [&](double lambda, bool& ok) {
        double lo = v_min - lambda; // sum >= 2 here
        double hi = v_max;          // sum <= 1 here
        double mu = hi, residual = weights_at(lambda, mu).sum() - 1.0;
        if (std::abs(residual) <= kTol) {
            ok = true;
            return mu;
        }
        for (int step = 0; step < kMaxSteps; ++step) {
            mu = 0.5 * (lo + hi);
            residual = weights_at(lambda, mu).sum() - 1.0;
            if (std::abs(residual) <= kTol) {
                ok = true;
                return mu;
            }
            (residual > 0.0 ? lo : hi) = mu;
        }
        ok = false;
        return mu;
    };

    const auto constraint_at = [&](double lambda, bool& ok) {
        const double mu = solve_mu(lambda, ok);
        return chi2_divergence(weights_at(lambda, mu), p) - rho;
    };

    const double scale = std::max(1.0, v_max - v_min);
    const double lambda_floor = 1e-12 * scale;

    // As lambda -> 0 the solution concentrates on the argmax set; if the
    // constraint still holds there, it never binds and the limit point
    // is the answer.
    bool ok_lo = true;
    double lambda_lo = lambda_floor;
    if (constraint_at(lambda_lo, ok_lo) <= 0.0 && ok_lo) {
        VecX q = VecX::Zero(n);
        double mass = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (values[i] == v_max) mass += p[i];
        for (Eigen::Index i = 0; i < n; ++i)
            if (values[i] == v_max) q[i] = p[i] / mass;
        const double con_res = chi2_divergence(q, p) - rho;
        return {std::move(q), 0.0, con_res, true};
    }

    bool ok_hi = true;
    double lambda_hi = scale;
    int expand = 0;
    while (constraint_at(lambda_hi, ok_hi) > 0.0 && expand++ < 80) lambda_hi *= 2.0;

    double lambda = lambda_hi, c_res = 0.0;
    bool mu_ok = true;
    for (int step = 0; step < kMaxSteps; ++step) {
        lambda = 0.5 * (lambda_lo + lambda_hi);
        c_res = constraint_at(lambda, mu_ok);
        if (!mu_ok) break;
        if (std::abs(c_res) <= kTol) break;
        (c_res > 0.0 ? lambda_lo : lambda_hi) = lambda;
    }

    bool ok = true;
    const double mu = solve_mu(lambda, ok);
    VecX q = weights_at(lambda, mu);
    const double sum_res = q.sum() - 1.0;
    const double con_res = chi2_divergence(q, p) - rho;
    const bool converged = ok && mu_ok && std::abs(sum_res) <= 10 * kTol && con_res <= 10 * kTol;
    // exact simplex membership for downstream invariants
    q = q.cwiseMax(0.0);
    q /= q.sum();
    return {std::move(q), sum_res, con_res, converged};
}

WeightSolution make_solution(VecX q, const VecX& losses, const VecX& reference, Sense sense) {
    WeightSolution out;
    out.objective = q.dot(losses);
    out.mass_moved = tv_distance(q, reference);
    out.weights = std::move(q);
    out.sense = sense;
    return out;
}

} // namespace

double tv_distance(const VecX& q, const VecX& p) { return 0.5 * (q - p).cwiseAbs().sum(); }

double chi2_divergence(const VecX& q, const VecX& p) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (p[i] <= 0.0) {
            if (std::abs(q[i]) > 1e-15) return std::numeric_limits<double>::infinity();
            continue;
        }
        const double t = q[i] / p[i] - 1.0;
        acc += p[i] * 0.5 * t * t;
    }
    return acc;
}

WeightSolution worst_case_weights_tv(const VecX& losses, double rho, Sense sense) {
    check_losses(losses);
    if (rho < 0.0) throw ContractError("weights: negative rho");
    const Eigen::Index n = losses.size();
    const VecX uniform = VecX::Constant(n, 1.0 / static_cast<double>(n));

    VecX q;
    if (sense == Sense::Max) {
        q = shift_tv_max(losses, uniform, rho).first;
    } else {
        q = shift_tv_max(-losses, uniform, rho).first;
    }
    return make_solution(std::move(q), losses, uniform, sense);
}

WeightSolution worst_case_weights_chi2(const VecX& losses, double rho, Sense sense) {
    check_losses(losses);
    if (rho < 0.0) throw ContractError("weights: negative rho");
    const Eigen::Index n = losses.size();
    const VecX uniform = VecX::Constant(n, 1.0 / static_cast<double>(n));

    if (rho == 0.0 || n == 1 || losses.maxCoeff() == losses.minCoeff())
        return make_solution(uniform, losses, uniform, sense);

    Chi2Result result = sense == Sense::Max ? shift_chi2_max(losses, uniform, rho)
                                            : shift_chi2_max(-losses, uniform, rho);
    if (!result.converged) {
        std::ostringstream msg;
        msg << "chi2 weight solver did not converge: sum residual " << result.sum_residual
            << ", constraint residual " << result.constraint_residual;
        throw NumericalError(msg.str());
    }
    return make_solution(std::move(result.q), losses, uniform, sense);
}

WeightSolution solve_weights(const VecX& losses, const DivergenceSpec& spec, Sense sense,
                             double q_floor) {
    if (q_floor < 0.0 || q_floor >= 1.0) throw ContractError("weights: q_floor outside [0,1)");
    WeightSolution sol = spec.kind == Divergence::TV
                             ? worst_case_weights_tv(losses, spec.rho, sense)
                             : worst_case_weights_chi2(losses, spec.rho, sense);
    if (q_floor > 0.0) {
        const Eigen::Index n = losses.size();
        const VecX uniform = VecX::Constant(n, 1.0 / static_cast<double>(n));
        VecX floored = (1.0 - q_floor) * sol.weights + q_floor * uniform;
        return make_solution(std::move(floored), losses, uniform, sense);
    }
    return sol;
}

WeightSolution oracle_weights(const VecX& losses, const DivergenceSpec& spec, Sense sense,
                              double resolution) {
    check_losses(losses);
    const Eigen::Index n = losses.size();
    if (n > 4) throw ContractError("oracle_weights: grid enumeration limited to n <= 4");
    if (resolution <= 0.0 || resolution > 1.0)
        throw ContractError("oracle_weights: resolution must lie in (0,1]");

    const VecX uniform = VecX::Constant(n, 1.0 / static_cast<double>(n));
    if (n == 1) return make_solution(VecX::Ones(1), losses, uniform, sense);

    // round subdivisions up to a multiple of n so uniform is a grid point
    long subdivisions = static_cast<long>(std::llround(1.0 / resolution));
    subdivisions += (n - subdivisions % n) % n;
    const double step = 1.0 / static_cast<double>(subdivisions);

    const double sign = sense == Sense::Max ? 1.0 : -1.0;
    double best = -std::numeric_limits<double>::infinity();
    VecX best_q;

    VecX q(n);
    const auto consider = [&]() {
        const double feasible_slack = 1e-12;
        const double div = spec.kind == Divergence::TV ? tv_distance(q, uniform)
                                                       : chi2_divergence(q, uniform);
        if (div > spec.rho + feasible_slack) return;
        const double value = sign * q.dot(losses);
        if (value > best) {
            best = value;
            best_q = q;
        }
    };

    if (n == 2) {
        for (long a = 0; a <= subdivisions; ++a) {
            q[0] = a * step;
            q[1] = (subdivisions - a) * step;
            consider();
        }
    } else if (n == 3) {
        for (long a = 0; a <= subdivisions; ++a)
            for (long b = 0; b <= subdivisions - a; ++b) {
                q[0] = a * step;
                q[1] = b * step;
                q[2] = (subdivisions - a - b) * step;
                consider();
            }
    } else {
        for (long a = 0; a <= subdivisions; ++a)
            for (long b = 0; b <= subdivisions - a; ++b)
                for (long c = 0; c <= subdivisions - a - b; ++c) {
                    q[0] = a * step;
                    q[1] = b * step;
                    q[2] = c * step;
                    q[3] = (subdivisions - a - b - c) * step;
                    consider();
                }
    }

    if (!best_q.size()) throw NumericalError("oracle_weights: no feasible grid point");
    return make_solution(std::move(best_q), losses, uniform, sense);
}

std::pair<VecX, double> shift_distribution(const VecX& p, const VecX& values, double rho,
                                           Divergence kind, Sense sense) {
    check_losses(values);
    check_reference(p);
    if (values.size() != p.size())
        throw ContractError("shift_distribution: length mismatch between p and values");
    if (rho < 0.0) throw ContractError("shift_distribution: negative rho");

    if (rho == 0.0) return {p, p.dot(values)};

    VecX shifted;
    if (kind == Divergence::TV) {
        shifted = sense == Sense::Max ? shift_tv_max(values, p, rho).first
                                      : shift_tv_max(-values, p, rho).first;
    } else {
        if (values.maxCoeff() == values.minCoeff()) {
            shifted = p;
        } else {
            Chi2Result result = sense == Sense::Max ? shift_chi2_max(values, p, rho)
                                                    : shift_chi2_max(-values, p, rho);
            if (!result.converged) {
                std::ostringstream msg;
                msg << "chi2 distribution shift did not converge: sum residual "
                    << result.sum_residual << ", constraint residual "
                    << result.constraint_residual;
                throw NumericalError(msg.str());
            }
            shifted = std::move(result.q);
        }
    }
    const double objective = shifted.dot(values);
    return {std::move(shifted), objective};
}

} // namespace dropref
