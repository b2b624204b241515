#include "pairflow/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

#include "pairflow/error.hpp"

namespace pairflow {

using nlohmann::json;

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string csv_cell(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json to_json(const IpmConfig& c) {
  return {{"lambda", c.lambda_reg}, {"mu0", c.mu0},         {"sigma", c.sigma},
          {"mu_min", c.mu_min},     {"tol_kkt", c.tol_kkt}, {"tol_orth", c.tol_orth},
          {"max_outer", c.max_outer}, {"max_newton", c.max_newton}, {"ftb_tau", c.ftb_tau},
          {"seed", c.seed}};
}

json to_json(const IpmReport& r) {
  json history = json::array();
  for (const auto& h : r.history) {
    history.push_back({{"outer", h.outer},
                       {"mu", h.mu},
                       {"objective", number_or_null(h.objective)},
                       {"residual", number_or_null(h.residual)},
                       {"step", h.step},
                       {"hessian_shift", h.hessian_shift}});
  }
  return {{"converged", r.converged},
          {"outer_iters", r.outer_iters},
          {"newton_iters", r.newton_iters},
          {"final_kkt_residual", number_or_null(r.final_kkt_residual)},
          {"final_orth", number_or_null(r.final_orth)},
          {"objective", number_or_null(r.objective)},
          {"lambda", r.lambda_reg},
          {"volume_scale", r.volume_scale},
          {"max_hessian_shift", r.max_hessian_shift},
          {"history", std::move(history)}};
}

json factors_to_json(const FactorPair& w, const SymbolTable& symbols) {
  if (w.n() != symbols.size()) throw DimensionMismatch("factors_to_json: size mismatch");
  std::vector<Index> order(w.n());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto ea = static_cast<Eigen::Index>(a), eb = static_cast<Eigen::Index>(b);
    if (w.w1(ea) != w.w1(eb)) return w.w1(ea) > w.w1(eb);
    return symbols[a] < symbols[b];
  });
  json out = json::array();
  for (Index i : order) {
    const auto e = static_cast<Eigen::Index>(i);
    out.push_back({{"ticker", symbols[i]}, {"w1", w.w1(e)}, {"w2", w.w2(e)}});
  }
  return out;
}

json edges_to_json(const PairGraph& g, const SymbolTable& symbols) {
  json out = json::array();
  for (const auto& [i, j] : g.edges()) out.push_back({symbols[i], symbols[j]});
  return out;
}

json to_json(const SearchResult& r, const SymbolTable& symbols) {
  return {{"edges", edges_to_json(r.graph, symbols)},
          {"m", r.graph.edge_count()},
          {"objective", r.objective},
          {"optimal", r.optimal},
          {"nodes_expanded", r.nodes_expanded},
          {"nodes_pruned", r.nodes_pruned}};
}

json to_json(const PairDiff& d) {
  auto pairs = [](const auto& v) {
    json a = json::array();
    for (const auto& [x, y] : v) a.push_back({x, y});
    return a;
  };
  return {{"removed", pairs(d.removed)}, {"added", pairs(d.added)}};
}

json to_json(const DatasetStats& s) {
  return {{"n_coins", s.n_coins},
          {"n_pairs", s.n_pairs},
          {"total_volume", s.total_volume},
          {"topk_share", s.topk_share},
          {"k", s.k}};
}

json to_json(const CorrelationResult& c) {
  return {{"pairs_used", c.pairs_used},
          {"log_correlation", c.log_correlation},
          {"raw_correlation", c.raw_correlation}};
}

json to_json(const CoveragePoint& p) {
  json j = {{"window", p.window},
            {"m", p.m},
            {"coverage_realized", p.coverage_realized},
            {"coverage_kstar", p.coverage_kstar},
            {"optimal", p.optimal},
            {"ipm_converged", p.ipm_converged},
            {"nodes_expanded", p.nodes_expanded}};
  if (p.m_normalized) j["m_normalized"] = *p.m_normalized;
  if (!p.error.empty()) j["error"] = p.error;
  return j;
}

json to_json(const RetentionPoint& p) {
  json j = {{"m", p.m}, {"retention", p.retention}, {"transitions", p.transitions}, {"optimal", p.optimal}};
  if (p.m_normalized) j["m_normalized"] = *p.m_normalized;
  if (!p.error.empty()) j["error"] = p.error;
  return j;
}

json synth_truth_json(const SynthData& data, const SynthConfig& c) {
  json windows = json::array();
  for (const auto& w : data.windows) {
    json f = json::array();
    for (Index i = 0; i < data.symbols.size(); ++i) {
      const auto e = static_cast<Eigen::Index>(i);
      f.push_back({{"ticker", data.symbols[i]}, {"w1", w.truth.w1(e)}, {"w2", w.truth.w2(e)}});
    }
    windows.push_back({{"window", w.period}, {"factors", std::move(f)}});
  }
  return {{"generator",
           {{"n", c.n},
            {"density", c.density},
            {"noise", c.noise},
            {"windows", c.windows},
            {"drift", c.drift},
            {"volume_unit", c.volume_unit},
            {"start_period", c.start_period},
            {"seed", c.seed}}},
          {"tickers", data.symbols.tickers()},
          {"mask", edges_to_json(data.mask, data.symbols)},
          {"windows", std::move(windows)}};
}

std::string branch_rule_name(BranchRule r) {
  return r == BranchRule::LargestValue ? "largest" : "first";
}

std::string bound_rule_name(BoundRule r) {
  return r == BoundRule::Spanning ? "spanning" : "top";
}

std::string weights_name(CoverageWeights w) {
  return w == CoverageWeights::Realized ? "realized" : "kstar";
}

BranchRule parse_branch_rule(const std::string& s) {
  if (s == "largest") return BranchRule::LargestValue;
  if (s == "first") return BranchRule::FirstUndecided;
  throw InfeasibleConfig("unknown branch_rule '" + s + "' (expected largest or first)");
}

BoundRule parse_bound_rule(const std::string& s) {
  if (s == "spanning") return BoundRule::Spanning;
  if (s == "top") return BoundRule::TopRemaining;
  throw InfeasibleConfig("unknown bound_rule '" + s + "' (expected spanning or top)");
}

CoverageWeights parse_weights(const std::string& s) {
  if (s == "realized") return CoverageWeights::Realized;
  if (s == "kstar") return CoverageWeights::KStar;
  throw InfeasibleConfig("unknown weights '" + s + "' (expected realized or kstar)");
}

void write_evaluation_csv(std::ostream& out, const Evaluation& ev) {
  bool with_norm = false;
  for (const auto& p : ev.coverage) with_norm = with_norm || p.m_normalized.has_value();
  out << "window,m,coverage_realized,coverage_kstar,retention,optimal,status";
  if (with_norm) out << ",m_normalized";
  out << '\n';
  auto tail = [&](const std::optional<double>& norm) {
    if (with_norm) out << ',' << (norm ? format_number(*norm) : "");
    out << '\n';
  };
  for (const auto& p : ev.coverage) {
    out << p.window << ',' << p.m << ',';
    if (p.error.empty()) {
      out << format_number(p.coverage_realized) << ',' << format_number(p.coverage_kstar);
    } else {
      out << ',';
    }
    out << ",," << (p.optimal ? "true" : "false") << ',' << (p.error.empty() ? "ok" : csv_cell(p.error));
    tail(p.m_normalized);
  }
  for (const auto& p : ev.retention) {
    out << "*," << p.m << ",,,";
    if (p.transitions > 0) out << format_number(p.retention);
    out << ',' << (p.optimal ? "true" : "false") << ',' << (p.error.empty() ? "ok" : csv_cell(p.error));
    tail(p.m_normalized);
  }
}

}  // namespace pairflow
