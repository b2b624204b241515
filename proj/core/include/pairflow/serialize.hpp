#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairflow/bnb.hpp"
#include "pairflow/eval.hpp"
#include "pairflow/ingest.hpp"
#include "pairflow/ipm.hpp"
#include "pairflow/synth.hpp"

namespace pairflow {

// JSON documents emitted by the CLI. Field names follow the C++ structs.

nlohmann::json to_json(const IpmConfig& c);
nlohmann::json to_json(const IpmReport& r);

/// Per-ticker factors sorted by w1 descending (ties by ticker).
nlohmann::json factors_to_json(const FactorPair& w, const SymbolTable& symbols);

nlohmann::json edges_to_json(const PairGraph& g, const SymbolTable& symbols);
nlohmann::json to_json(const SearchResult& r, const SymbolTable& symbols);
nlohmann::json to_json(const PairDiff& d);
nlohmann::json to_json(const DatasetStats& s);
nlohmann::json to_json(const CorrelationResult& c);
nlohmann::json to_json(const CoveragePoint& p);
nlohmann::json to_json(const RetentionPoint& p);
nlohmann::json synth_truth_json(const SynthData& data, const SynthConfig& config);

std::string branch_rule_name(BranchRule r);
std::string bound_rule_name(BoundRule r);
std::string weights_name(CoverageWeights w);
/// Inverse of the *_name functions; throw InfeasibleConfig on unknown names.
BranchRule parse_branch_rule(const std::string& s);
BoundRule parse_bound_rule(const std::string& s);
CoverageWeights parse_weights(const std::string& s);

/// Columns: window, m, coverage_realized, coverage_kstar, retention, optimal,
/// status, plus m_normalized when present. Coverage rows leave retention
/// empty; retention rows use window "*" and leave the coverage cells empty.
void write_evaluation_csv(std::ostream& out, const Evaluation& ev);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double x);

}  // namespace pairflow
