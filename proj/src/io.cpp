#include "cbpl/io.hpp"

#include "cbpl/errors.hpp"
#include "csv_util.hpp"

#include <algorithm>
#include <map>

namespace cbpl {

using csv::format_real;

std::string to_csv(const DeterministicPolicy& policy) {
    std::string out = "state,action\n";
    for (StateId x = 0; x < policy.num_states(); ++x)
        out += std::to_string(x) + "," + std::to_string(policy(x)) + "\n";
    return out;
}

std::string to_csv(const StochasticPolicy& policy) {
    std::string out = "state,action,prob\n";
    for (StateId x = 0; x < policy.num_states(); ++x)
        for (ActionId a = 0; a < policy.num_actions(); ++a)
            out += std::to_string(x) + "," + std::to_string(a) + "," + format_real(policy.prob(x, a)) + "\n";
    return out;
}

std::string to_csv(const MixturePolicy& policy) {
    std::string out = "member,weight,state,action\n";
    for (std::size_t k = 0; k < policy.size(); ++k) {
        const auto w = format_real(policy.weights[k]);
        for (StateId x = 0; x < policy.members[k].num_states(); ++x)
            out += std::to_string(k) + "," + w + "," + std::to_string(x) + "," +
                   std::to_string(policy.members[k](x)) + "\n";
    }
    return out;
}

namespace {

struct Table {
    std::vector<std::vector<std::string_view>> rows;
    std::vector<std::size_t> line_of;
};

Table read_table(std::string_view text, std::size_t columns) {
    Table table;
    const auto lines = csv::lines(text);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = csv::split(lines[i]);
        if (fields.size() != columns)
            throw ParseError(i + 1, "expected " + std::to_string(columns) + " fields");
        table.rows.push_back(std::move(fields));
        table.line_of.push_back(i + 1);
    }
    if (table.rows.empty()) throw ParseError(1, "policy file has no rows");
    return table;
}

int parse_index(std::string_view field, std::size_t line) {
    const long v = csv::parse_int(field, line);
    if (v < 0 || v > 1'000'000'000L) throw ParseError(line, "index out of range");
    return static_cast<int>(v);
}

// Actions of states 0..S-1, each listed exactly once.
std::vector<ActionId> assemble(const std::vector<std::pair<int, int>>& entries,
                               const std::vector<std::size_t>& lines) {
    int num_states = 0;
    for (const auto& [x, a] : entries) num_states = std::max(num_states, x + 1);
    std::vector<ActionId> actions(static_cast<std::size_t>(num_states), -1);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto [x, a] = entries[i];
        if (actions[x] != -1) throw ParseError(lines[i], "state " + std::to_string(x) + " listed twice");
        actions[x] = a;
    }
    for (std::size_t x = 0; x < actions.size(); ++x)
        if (actions[x] == -1) throw ParseError(0, "state " + std::to_string(x) + " has no action");
    return actions;
}

}  // namespace

AnyPolicy policy_from_csv(std::string_view text) {
    const auto lines = csv::lines(text);
    if (lines.empty()) throw ParseError(1, "empty policy file");
    const auto header = lines[0];
    if (header == "state,action") {
        const auto table = read_table(text, 2);
        std::vector<std::pair<int, int>> entries;
        for (std::size_t i = 0; i < table.rows.size(); ++i)
            entries.emplace_back(parse_index(table.rows[i][0], table.line_of[i]),
                                 parse_index(table.rows[i][1], table.line_of[i]));
        return DeterministicPolicy{assemble(entries, table.line_of)};
    }
    if (header == "state,action,prob") {
        const auto table = read_table(text, 3);
        int S = 0, A = 0;
        std::vector<std::tuple<int, int, double>> entries;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const int x = parse_index(table.rows[i][0], table.line_of[i]);
            const int a = parse_index(table.rows[i][1], table.line_of[i]);
            entries.emplace_back(x, a, csv::parse_real(table.rows[i][2], table.line_of[i]));
            S = std::max(S, x + 1);
            A = std::max(A, a + 1);
        }
        std::vector<double> probs(static_cast<std::size_t>(S) * A, 0.0);
        for (const auto& [x, a, p] : entries) probs[static_cast<std::size_t>(x) * A + a] = p;
        try {
            return StochasticPolicy(S, A, std::move(probs));
        } catch (const std::invalid_argument& e) {
            throw ParseError(0, e.what());
        }
    }
    if (header == "member,weight,state,action") {
        const auto table = read_table(text, 4);
        std::map<int, std::pair<double, std::vector<std::pair<int, int>>>> members;
        std::map<int, std::vector<std::size_t>> member_lines;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const std::size_t line = table.line_of[i];
            const int k = parse_index(table.rows[i][0], line);
            const double w = csv::parse_real(table.rows[i][1], line);
            auto& entry = members[k];
            if (!member_lines[k].empty() && entry.first != w)
                throw ParseError(line, "member weight changes between rows");
            entry.first = w;
            entry.second.emplace_back(parse_index(table.rows[i][2], line), parse_index(table.rows[i][3], line));
            member_lines[k].push_back(line);
        }
        MixturePolicy mixture;
        for (auto& [k, entry] : members) {
            if (!(entry.first >= 0.0)) throw ParseError(member_lines[k].front(), "negative mixture weight");
            mixture.members.push_back(DeterministicPolicy{assemble(entry.second, member_lines[k])});
            mixture.weights.push_back(entry.first);
        }
        return mixture;
    }
    throw ParseError(1, "unrecognized policy header '" + std::string(header) + "'");
}

AnyPolicy load_policy(const std::string& path) { return policy_from_csv(csv::read_file(path)); }

std::string to_csv(const QFunction& q) {
    std::string out;
    if (q.is_tabular()) {
        out = "x,a,value\n";
        for (StateId x = 0; x < q.num_states(); ++x)
            for (ActionId a = 0; a < q.num_actions(); ++a)
                out += std::to_string(x) + "," + std::to_string(a) + "," + format_real(q(x, a)) + "\n";
    } else {
        out = "index,weight\n";
        for (Eigen::Index i = 0; i < q.weights().size(); ++i)
            out += std::to_string(i) + "," + format_real(q.weights()(i)) + "\n";
    }
    return out;
}

std::string trace_to_csv(const RunTrace& trace) {
    const std::size_t k = trace.records.empty() ? 0 : trace.records.front().lambda.size();
    const std::size_t m = trace.records.empty() ? 0 : trace.records.front().mixture_constraints.size();
    std::string out = "round";
    for (std::size_t i = 1; i <= k; ++i) out += ",lambda_" + std::to_string(i);
    out += ",C_hat";
    for (std::size_t i = 1; i <= m; ++i) out += ",G_" + std::to_string(i);
    out += ",L_max,L_min,gap\n";
    for (const auto& r : trace.records) {
        out += std::to_string(r.round);
        for (double v : r.lambda) out += "," + format_real(v);
        out += "," + format_real(r.mixture_cost);
        for (double v : r.mixture_constraints) out += "," + format_real(v);
        out += "," + format_real(r.l_max) + "," + format_real(r.l_min) + "," + format_real(r.gap) + "\n";
    }
    return out;
}

std::string round_values_to_csv(const RunTrace& trace) {
    const std::size_t m = trace.records.empty() ? 0 : trace.records.front().mixture_constraints.size();
    std::string out = "round,C_member";
    for (std::size_t i = 1; i <= m; ++i) out += ",G_member_" + std::to_string(i);
    out += ",C_mixture";
    for (std::size_t i = 1; i <= m; ++i) out += ",G_mixture_" + std::to_string(i);
    out += "\n";
    for (const auto& r : trace.records) {
        out += std::to_string(r.round) + "," + format_real(r.member_cost);
        for (double v : r.member_constraints) out += "," + format_real(v);
        out += "," + format_real(r.mixture_cost);
        for (double v : r.mixture_constraints) out += "," + format_real(v);
        out += "\n";
    }
    return out;
}

std::string to_csv(const std::vector<OpeRow>& rows) {
    std::string out = "method,fraction,trial,estimate,abs_error\n";
    for (const auto& r : rows)
        out += r.method + "," + format_real(r.fraction) + "," + std::to_string(r.trial) + "," +
               format_real(r.estimate) + "," + format_real(r.abs_error) + "\n";
    return out;
}

void write_text(const std::string& path, const std::string& content) { csv::write_file(path, content); }
std::string read_text(const std::string& path) { return csv::read_file(path); }

}  // namespace cbpl
