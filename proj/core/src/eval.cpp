#include "pairflow/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>

#include "pairflow/error.hpp"

namespace pairflow {

namespace {

// Runs fn(0..count-1) on up to `threads` workers. Each index writes only its
// own output slot, so results do not depend on scheduling.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

double normalized_m(Index m, Index n, const EvalConfig& cfg) {
  return static_cast<double>(m) * static_cast<double>(*cfg.reference_n) / static_cast<double>(n);
}

SearchConfig search_config(Index m, const EvalConfig& cfg) {
  SearchConfig sc;
  sc.m = m;
  sc.node_cap = cfg.node_cap;
  sc.branch_rule = cfg.branch_rule;
  sc.bound_rule = cfg.bound_rule;
  return sc;
}

Index shared_edges(const PairGraph& a, const PairGraph& b) {
  Index count = 0;
  for (const auto& [i, j] : a.edges()) {
    if (b.has_edge(i, j)) ++count;
  }
  return count;
}

}  // namespace

std::vector<WindowFit> fit_windows(const WindowedDataset& data, const EvalConfig& config) {
  std::vector<WindowFit> fits(data.windows.size());
  parallel_for(fits.size(), config.threads, [&](std::size_t w) {
    const auto& [period, v] = data.windows[w];
    WindowFit& fit = fits[w];
    fit.window = period;
    try {
      Estimate est = estimate(v, v.support(), config.ipm);
      fit.k_star = reconstruct_k(est.factors);
      fit.report = std::move(est.report);
    } catch (const std::exception& e) {
      fit.error = std::string("estimate failed: ") + e.what();
    }
  });
  return fits;
}

Evaluation evaluate(const WindowedDataset& data, const std::vector<Index>& ms, const EvalConfig& config) {
  config.ipm.validate();
  const Index n = data.symbols.size();
  for (Index m : ms) search_config(m, config).validate(n);
  if (config.reference_n && *config.reference_n == 0) throw InfeasibleConfig("reference_n must be > 0");

  Evaluation ev;
  ev.fits = fit_windows(data, config);
  const std::size_t windows = data.windows.size();
  ev.coverage.resize(windows * ms.size());
  ev.graphs.assign(windows, std::vector<PairGraph>(ms.size()));

  parallel_for(ev.coverage.size(), config.threads, [&](std::size_t task) {
    const std::size_t w = task / ms.size();
    const std::size_t mi = task % ms.size();
    const VolumeMatrix& v = data.windows[w].second;
    const WindowFit& fit = ev.fits[w];
    CoveragePoint& pt = ev.coverage[task];
    pt.window = fit.window;
    pt.m = ms[mi];
    if (config.reference_n) pt.m_normalized = normalized_m(pt.m, n, config);
    if (!fit.error.empty()) {
      pt.error = fit.error;
      return;
    }
    pt.ipm_converged = fit.report.converged;
    try {
      const double total = v.total();
      if (!(total > 0.0)) throw UndefinedShare("window " + fit.window + " has zero total volume");
      const SearchConfig sc = search_config(pt.m, config);
      const bool realized = config.weights == CoverageWeights::Realized;
      const SearchResult res = realized ? search(v.values(), sc, &fit.k_star) : search(fit.k_star, sc, &v.values());
      pt.optimal = res.optimal;
      pt.nodes_expanded = res.nodes_expanded;
      pt.coverage_realized = covered_volume(v.values(), res.graph) / total;
      const double k_total = covered_volume(fit.k_star, PairGraph::complete(n));
      pt.coverage_kstar = k_total != 0.0 ? covered_volume(fit.k_star, res.graph) / k_total : 0.0;
      ev.graphs[w][mi] = res.graph;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
  });

  if (windows >= 2) {
    for (std::size_t mi = 0; mi < ms.size(); ++mi) {
      RetentionPoint rp;
      rp.m = ms[mi];
      if (config.reference_n) rp.m_normalized = normalized_m(rp.m, n, config);
      rp.optimal = true;
      double sum = 0.0;
      for (std::size_t w = 0; w + 1 < windows; ++w) {
        const CoveragePoint& a = ev.coverage[w * ms.size() + mi];
        const CoveragePoint& b = ev.coverage[(w + 1) * ms.size() + mi];
        if (!a.error.empty() || !b.error.empty()) {
          if (rp.error.empty()) rp.error = "skipped transition " + a.window + " -> " + b.window;
          continue;
        }
        rp.optimal = rp.optimal && a.optimal && b.optimal;
        sum += static_cast<double>(shared_edges(ev.graphs[w][mi], ev.graphs[w + 1][mi])) /
               static_cast<double>(rp.m);
        ++rp.transitions;
      }
      if (rp.transitions > 0) {
        rp.retention = sum / static_cast<double>(rp.transitions);
      } else {
        rp.optimal = false;
      }
      ev.retention.push_back(std::move(rp));
    }
  }
  return ev;
}

std::vector<CoveragePoint> coverage_curve(const WindowedDataset& data, std::string_view window,
                                          const std::vector<Index>& ms, const EvalConfig& config) {
  WindowedDataset one;
  one.symbols = data.symbols;
  for (const auto& w : data.windows) {
    if (w.first == window) one.windows.push_back(w);
  }
  if (one.windows.empty()) throw EmptyWindow("no window " + std::string(window) + " in dataset");
  return evaluate(one, ms, config).coverage;
}

std::vector<RetentionPoint> retention_curve(const WindowedDataset& data, const std::vector<Index>& ms,
                                            const EvalConfig& config) {
  if (data.windows.size() < 2) throw InsufficientData("retention needs at least two windows");
  return evaluate(data, ms, config).retention;
}

PairDiff diff_pairs(const PairGraph& observed, const PairGraph& optimal, const SymbolTable& symbols) {
  if (observed.n() != optimal.n() || observed.n() != symbols.size()) {
    throw DimensionMismatch("diff_pairs: graphs and symbol table differ in size");
  }
  auto named = [&](Index i, Index j) {
    std::pair<std::string, std::string> p{symbols[i], symbols[j]};
    if (p.second < p.first) std::swap(p.first, p.second);
    return p;
  };
  PairDiff d;
  for (const auto& [i, j] : observed.edges()) {
    if (!optimal.has_edge(i, j)) d.removed.push_back(named(i, j));
  }
  for (const auto& [i, j] : optimal.edges()) {
    if (!observed.has_edge(i, j)) d.added.push_back(named(i, j));
  }
  std::sort(d.removed.begin(), d.removed.end());
  std::sort(d.added.begin(), d.added.end());
  return d;
}

}  // namespace pairflow
