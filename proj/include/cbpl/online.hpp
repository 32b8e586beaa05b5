#pragma once

#include <span>
#include <vector>

namespace cbpl {

enum class DualFlavor { EgSimplex, OgdBall };

/**
 * Lagrange multipliers of the dual player.
 *
 * EgSimplex: m + 1 strictly positive coordinates summing to the budget B; the last
 * coordinate is the slack B - ||lambda||_1 paired with a constant-zero constraint.
 * OgdBall: m nonnegative coordinates inside the l2 ball of radius B.
 */
class DualVector {
public:
    DualVector(std::vector<double> coords, double budget, DualFlavor flavor);

    const std::vector<double>& coords() const { return coords_; }
    double operator[](std::size_t i) const { return coords_[i]; }
    std::size_t size() const { return coords_.size(); }
    double budget() const { return budget_; }
    DualFlavor flavor() const { return flavor_; }

    /// Multipliers of the m real constraints (drops the EG slack coordinate).
    std::span<const double> multipliers() const;

private:
    std::vector<double> coords_;
    double budget_;
    DualFlavor flavor_;
};

/// Loss vector fed to the dual update: [(G - tau)^T, 0]^T for EG, G - tau for OGD.
struct DualLoss {
    std::vector<double> z;
};

DualLoss eg_loss(std::span<const double> constraint_values, std::span<const double> tau);
DualLoss ogd_loss(std::span<const double> constraint_values, std::span<const double> tau);

/// (B/(m+1), ..., B/(m+1))
DualVector eg_init(int num_constraints, double budget);
/// Zero vector of length m.
DualVector ogd_init(int num_constraints, double budget);

/// lambda'[i] = B lambda[i] exp(-eta z[i]) / sum_j lambda[j] exp(-eta z[j]).
/// The exponent is shifted by its maximum before exponentiation.
DualVector eg_update(const DualVector& lambda, const DualLoss& loss, double eta);

/// lambda' = P(max(0, lambda + eta z)) with P(v) = B v / max(B, ||v||_2).
DualVector ogd_update(const DualVector& lambda, const DualLoss& loss, double eta);

/// Average regret bound of EG on the B-scaled simplex after T rounds with losses
/// bounded by G_bar: B log(m+1) / (eta T) + eta B G_bar^2.
double eg_regret_bound(double budget, double eta, double g_bar, long rounds, int num_constraints);

/// eta = omega / (4 G_bar^2 B): the rate at which the duality gap bound reaches omega.
double theory_learning_rate(double omega, double g_bar, double budget);
/// ceil(16 B^2 G_bar^2 log(m+1) / omega^2), at least 1.
long theory_rounds(double budget, double g_bar, int num_constraints, double omega);

}  // namespace cbpl
