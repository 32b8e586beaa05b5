#pragma once

#include "cbpl/func_approx.hpp"
#include "cbpl/learner.hpp"
#include "cbpl/ope.hpp"
#include "cbpl/policy.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cbpl {

// Policy files. Deterministic: `state,action`. Stochastic: `state,action,prob` with
// omitted pairs at probability 0. Mixture: `member,weight,state,action`.
std::string to_csv(const DeterministicPolicy& policy);
std::string to_csv(const StochasticPolicy& policy);
std::string to_csv(const MixturePolicy& policy);

using AnyPolicy = std::variant<DeterministicPolicy, StochasticPolicy, MixturePolicy>;
/// The format is chosen by the header line. Throws ParseError.
AnyPolicy policy_from_csv(std::string_view text);
AnyPolicy load_policy(const std::string& path);

// Q-function files. Tabular: `x,a,value`. Linear: `index,weight`.
std::string to_csv(const QFunction& q);

/// `round,lambda_1..lambda_k,C_hat,G_1..G_m,L_max,L_min,gap` with mixture estimates
/// (k = m + 1 for EG, m for OGD).
std::string trace_to_csv(const RunTrace& trace);
/// `round,C_member,G_member_1..,C_mixture,G_mixture_1..`: per-round value estimates.
std::string round_values_to_csv(const RunTrace& trace);

/// `method,fraction,trial,estimate,abs_error`
std::string to_csv(const std::vector<OpeRow>& rows);

/// Writes text to a file; throws ConfigError on failure.
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace cbpl
