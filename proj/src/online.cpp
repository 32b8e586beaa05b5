#include "cbpl/online.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cbpl {

DualVector::DualVector(std::vector<double> coords, double budget, DualFlavor flavor)
    : coords_(std::move(coords)), budget_(budget), flavor_(flavor) {
    if (!(budget_ >= 0.0) || !std::isfinite(budget_))
        throw std::invalid_argument("DualVector: budget must be finite and >= 0");
    if (flavor_ == DualFlavor::EgSimplex) {
        if (coords_.empty()) throw std::invalid_argument("DualVector: EG vector needs m+1 >= 1 coordinates");
        double sum = 0.0;
        for (double c : coords_) {
            if (!(c > 0.0) && budget_ > 0.0) throw std::invalid_argument("DualVector: EG coordinates must be > 0");
            sum += c;
        }
        if (std::abs(sum - budget_) > 1e-9 * std::max(1.0, budget_))
            throw std::invalid_argument("DualVector: EG coordinates must sum to the budget");
    } else {
        double sq = 0.0;
        for (double c : coords_) {
            if (!(c >= 0.0)) throw std::invalid_argument("DualVector: OGD coordinates must be >= 0");
            sq += c * c;
        }
        if (std::sqrt(sq) > budget_ + 1e-9)
            throw std::invalid_argument("DualVector: OGD vector outside the l2 ball");
    }
}

std::span<const double> DualVector::multipliers() const {
    std::span<const double> all(coords_);
    return flavor_ == DualFlavor::EgSimplex ? all.first(all.size() - 1) : all;
}

DualLoss eg_loss(std::span<const double> constraint_values, std::span<const double> tau) {
    if (constraint_values.size() != tau.size())
        throw std::invalid_argument("eg_loss: constraint values and tau differ in length");
    DualLoss loss;
    loss.z.reserve(tau.size() + 1);
    for (std::size_t i = 0; i < tau.size(); ++i) loss.z.push_back(constraint_values[i] - tau[i]);
    loss.z.push_back(0.0);
    return loss;
}

DualLoss ogd_loss(std::span<const double> constraint_values, std::span<const double> tau) {
    if (constraint_values.size() != tau.size())
        throw std::invalid_argument("ogd_loss: constraint values and tau differ in length");
    DualLoss loss;
    for (std::size_t i = 0; i < tau.size(); ++i) loss.z.push_back(constraint_values[i] - tau[i]);
    return loss;
}

DualVector eg_init(int num_constraints, double budget) {
    if (num_constraints < 0) throw std::invalid_argument("eg_init: negative constraint count");
    const auto n = static_cast<std::size_t>(num_constraints) + 1;
    return DualVector(std::vector<double>(n, budget / static_cast<double>(n)), budget,
                      DualFlavor::EgSimplex);
}

DualVector ogd_init(int num_constraints, double budget) {
    if (num_constraints < 0) throw std::invalid_argument("ogd_init: negative constraint count");
    return DualVector(std::vector<double>(static_cast<std::size_t>(num_constraints), 0.0), budget,
                      DualFlavor::OgdBall);
}

DualVector eg_update(const DualVector& lambda, const DualLoss& loss, double eta) {
    if (lambda.flavor() != DualFlavor::EgSimplex)
        throw std::invalid_argument("eg_update: expects an EG simplex vector");
    if (!(eta > 0.0)) throw std::invalid_argument("eg_update: eta must be > 0");
    if (loss.z.size() != lambda.size())
        throw std::invalid_argument("eg_update: loss length differs from lambda length");
    const double B = lambda.budget();
    if (B == 0.0) return lambda;

    const std::size_t n = lambda.size();
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) logits[i] = std::log(lambda[i]) - eta * loss.z[i];
    const double shift = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& l : logits) total += (l = std::exp(l - shift));
    std::vector<double> next(n);
    constexpr double tiny = std::numeric_limits<double>::min();
    for (std::size_t i = 0; i < n; ++i) next[i] = std::max(B * logits[i] / total, tiny);
    return DualVector(std::move(next), B, DualFlavor::EgSimplex);
}

DualVector ogd_update(const DualVector& lambda, const DualLoss& loss, double eta) {
    if (lambda.flavor() != DualFlavor::OgdBall)
        throw std::invalid_argument("ogd_update: expects an OGD ball vector");
    if (!(eta > 0.0)) throw std::invalid_argument("ogd_update: eta must be > 0");
    if (loss.z.size() != lambda.size())
        throw std::invalid_argument("ogd_update: loss length differs from lambda length");
    std::vector<double> next(lambda.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] = std::max(0.0, lambda[i] + eta * loss.z[i]);
        sq += next[i] * next[i];
    }
    const double norm = std::sqrt(sq);
    const double B = lambda.budget();
    if (norm > B)
        for (double& v : next) v *= B / norm;
    return DualVector(std::move(next), B, DualFlavor::OgdBall);
}

double eg_regret_bound(double budget, double eta, double g_bar, long rounds, int num_constraints) {
    if (rounds < 1) throw std::invalid_argument("eg_regret_bound: rounds must be >= 1");
    if (!(eta > 0.0)) throw std::invalid_argument("eg_regret_bound: eta must be > 0");
    return budget * std::log(num_constraints + 1.0) / (eta * static_cast<double>(rounds)) +
           eta * budget * g_bar * g_bar;
}

double theory_learning_rate(double omega, double g_bar, double budget) {
    if (!(omega > 0.0 && g_bar > 0.0 && budget > 0.0))
        throw std::invalid_argument("theory_learning_rate: arguments must be > 0");
    return omega / (4.0 * g_bar * g_bar * budget);
}

long theory_rounds(double budget, double g_bar, int num_constraints, double omega) {
    if (!(omega > 0.0)) throw std::invalid_argument("theory_rounds: omega must be > 0");
    const double r = 16.0 * budget * budget * g_bar * g_bar * std::log(num_constraints + 1.0) /
                     (omega * omega);
    if (r >= 9.0e18) return std::numeric_limits<long>::max();
    return std::max(1L, static_cast<long>(std::ceil(r)));
}

}  // namespace cbpl
