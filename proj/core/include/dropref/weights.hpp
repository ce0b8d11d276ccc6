// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/common.hpp"

#include <utility>

namespace dropref {

enum class Divergence { TV, ChiSq };
enum class Sense { Max, Min };

/// Ambiguity set: distributions q with d_phi(q, reference) <= rho.
/// TV uses phi(t) = |t-1|/2, ChiSq uses phi(t) = (t-1)^2/2.
struct DivergenceSpec {
    Divergence kind = Divergence::TV;
    double rho = 0.0;
};

/// Solution of the inner worst-case problem over minibatch weights.
struct WeightSolution {
    VecX weights;        ///< q* in the simplex
    double objective;    ///< <q*, losses>
    double mass_moved;   ///< half the L1 deviation from the reference
    Sense sense;
};

double tv_distance(const VecX& q, const VecX& p);
double chi2_divergence(const VecX& q, const VecX& p);

/**
 * Worst-case weights over the TV ball around the uniform distribution:
 *
 *   max/min_q  q^T losses
 *   s.t.       q in simplex,  (1/2) sum_i |q_i - 1/n| <= rho
 *
 * Exact greedy: the transferable mass delta = min(rho, (n-1)/n) is added
 * to the extreme-loss index (ties broken by lowest index) and removed
 * from the opposite end, each donor capped at 1/n. The objective is
 * linear in q, so the greedy transfer is optimal.
 */
WeightSolution worst_case_weights_tv(const VecX& losses, double rho, Sense sense);

/**
 * Worst-case weights over the chi-square ball around uniform:
 *
 *   max/min_q  q^T losses
 *   s.t.       q in simplex,  (1/(2n)) sum_i (n q_i - 1)^2 <= rho
 *
 * Solved through the one-dimensional dual: for the max sense
 * q_i(lambda, mu) = (1/n) max(0, 1 + (l_i - mu)/lambda); an inner
 * bisection on mu enforces sum q = 1 and an outer bisection on lambda
 * enforces the divergence constraint. Both bisections run to absolute
 * residual 1e-10; if the unconstrained optimum is feasible it is
 * returned directly.
 *
 * Throws NumericalError if either bisection fails to reach its residual
 * tolerance within 200 steps.
 */
WeightSolution worst_case_weights_chi2(const VecX& losses, double rho, Sense sense);

/// Dispatch on spec.kind, then optionally mix toward uniform:
/// q <- (1 - q_floor) q* + q_floor * uniform. The mixture stays inside
/// the ball (the divergence is convex in its first argument), so all
/// WeightSolution invariants survive flooring.
WeightSolution solve_weights(const VecX& losses, const DivergenceSpec& spec, Sense sense,
                             double q_floor = 0.0);

/**
 * Brute-force grid enumeration over the simplex at the given step;
 * ground truth for the exact solvers in tests. Restricted to n <= 4.
 * The subdivision count is rounded up to a multiple of n so the exact
 * uniform vector is always a grid point (rho = 0 stays feasible).
 */
WeightSolution oracle_weights(const VecX& losses, const DivergenceSpec& spec, Sense sense,
                              double resolution);

/**
 * Population-level analogue with an arbitrary reference distribution p:
 * worst-case (or best-case) reweighting of `values` over
 * {D : d_phi(D, p) <= rho}. Returns the shifted distribution and the
 * achieved objective.
 */
std::pair<VecX, double> shift_distribution(const VecX& p, const VecX& values, double rho,
                                           Divergence kind, Sense sense);

} // namespace dropref
