#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "pairflow/bnb.hpp"
#include "pairflow/error.hpp"
#include "pairflow/eval.hpp"
#include "pairflow/ingest.hpp"
#include "pairflow/ipm.hpp"
#include "pairflow/serialize.hpp"
#include "pairflow/synth.hpp"
#include "run_config.hpp"

namespace pairflow::cli {

namespace {

using nlohmann::json;

const std::vector<std::string> kCommands = {"stats", "estimate", "optimize", "evaluate", "synth"};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto log = std::make_shared<spdlog::logger>("pairflow", sink);
  log->set_pattern("[%l] %v");
  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("PAIRFLOW_LOG"); env && *env) {
    std::string name(env);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name == "warning") name = "warn";
    level = spdlog::level::from_str(name);
  }
  log->set_level(level);
  return log;
}

std::string config_comment(const RunConfig& cfg) {
  std::string out = "# pairflow " + cfg.command + "\n";
  const json doc = to_json(cfg);
  for (const auto& [key, value] : doc.items()) out += "# " + key + "=" + value.dump() + "\n";
  return out;
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
  if (!cfg.output || *cfg.output == "-") {
    out << text;
    return;
  }
  std::ofstream f(*cfg.output, std::ios::binary);
  if (!f || !(f << text)) throw InputMissing("cannot write output file " + *cfg.output);
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::vector<VolumeRecord> load_records(const RunConfig& cfg, spdlog::logger& log) {
  if (!cfg.input) throw InfeasibleConfig("missing --input");
  std::ifstream in(*cfg.input, std::ios::binary);
  if (!in) throw InputMissing("input not found: " + *cfg.input);
  auto records = parse_volume_csv(in);
  log.info("read {} records from {}", records.size(), *cfg.input);
  return records;
}

WindowedDataset load_dataset(const RunConfig& cfg, spdlog::logger& log) {
  const auto records = load_records(cfg, log);
  if (records.empty()) throw EmptyWindow("input has no volume records (empty window)");
  WindowedDataset data = build_dataset(records);
  if (cfg.top_k) {
    data = top_k_filter(data, *cfg.top_k);
    log.info("kept top {} assets", *cfg.top_k);
  }
  return data;
}

std::pair<std::string, VolumeMatrix> pick_window(const WindowedDataset& data, const RunConfig& cfg,
                                                 spdlog::logger& log) {
  if (cfg.window) {
    for (const auto& w : data.windows) {
      if (w.first == *cfg.window) return w;
    }
    throw EmptyWindow("no records in window " + *cfg.window);
  }
  log.info("no --window given, using the latest period {}", data.windows.back().first);
  return data.windows.back();
}

std::vector<Index> default_sweep(Index n) {
  const Index p = pair_count(n);
  std::vector<Index> ms = {n - 1, p / 4, p / 2, (3 * p) / 4, p};
  ms.erase(std::remove_if(ms.begin(), ms.end(), [&](Index m) { return m < n - 1; }), ms.end());
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  return ms;
}

// ---------------------------------------------------------------------------

int cmd_stats(RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
  if (cfg.format.empty()) cfg.format = "json";
  const auto records = load_records(cfg, log);
  if (records.empty()) throw EmptyWindow("input has no volume records (empty window)");
  WindowedDataset data = build_dataset(records);
  if (cfg.window) {
    const auto w = pick_window(data, cfg, log);
    data.windows = {w};
  }
  const Index n = data.symbols.size();
  if (cfg.top_k && *cfg.top_k > n) {
    throw InfeasibleConfig("top_k=" + std::to_string(*cfg.top_k) + " exceeds the " + std::to_string(n) + " assets");
  }
  const Index k = std::min<Index>(cfg.top_k.value_or(20), n);

  std::vector<StatsRow> rows;
  json windows = json::array();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < data.windows.size(); ++i) {
    const auto& [period, v] = data.windows[i];
    const DatasetStats st = concentration_stats(data.symbols, v, k);
    rows.push_back({std::to_string(i + 1), period, st});
    json j = to_json(st);
    j["window"] = period;
    windows.push_back(std::move(j));
    sum += v.values();
  }
  const VolumeMatrix all(std::move(sum));
  const DatasetStats overall = concentration_stats(data.symbols, all, k);
  const std::string span = data.windows.front().first + ".." + data.windows.back().first;
  rows.push_back({"all", span, overall});

  json doc;
  doc["config"] = to_json(cfg);
  doc["windows"] = std::move(windows);
  doc["overall"] = to_json(overall);
  doc["overall"]["period"] = span;
  if (cfg.quote_a || cfg.quote_b) {
    if (!cfg.quote_a || !cfg.quote_b) throw InfeasibleConfig("correlation needs both quote_a and quote_b");
    doc["correlation"] = to_json(same_base_correlation(data.symbols, all, *cfg.quote_a, *cfg.quote_b));
  }
  const std::string table = render_stats_table(rows);
  doc["table"] = table;

  if (cfg.format == "json") {
    emit(cfg, out, dump(doc));
  } else if (cfg.format == "text") {
    emit(cfg, out, config_comment(cfg) + table);
  } else {
    std::ostringstream os;
    os << config_comment(cfg) << "window,n_coins,n_pairs,total_volume,topk_share,k\n";
    for (const auto& r : rows) {
      os << (r.id == "all" ? "*" : r.period) << ',' << r.stats.n_coins << ',' << r.stats.n_pairs << ','
         << format_number(r.stats.total_volume) << ',' << format_number(r.stats.topk_share) << ','
         << r.stats.k << '\n';
    }
    emit(cfg, out, os.str());
  }
  return kOk;
}

int cmd_estimate(RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
  if (cfg.format.empty()) cfg.format = "json";
  if (cfg.format == "text") throw InfeasibleConfig("estimate supports json or csv output");
  const WindowedDataset data = load_dataset(cfg, log);
  const auto [period, v] = pick_window(data, cfg, log);
  if (v.n() < 2) throw InvalidProblem("estimate needs at least two assets, input has " + std::to_string(v.n()));
  Estimate est = estimate(v, v.support(), cfg.ipm);
  log.info("estimate: converged={} newton_iters={} residual={:.3e}", est.report.converged,
           est.report.newton_iters, est.report.final_kkt_residual);
  if (!est.report.converged) log.warn("estimator did not converge; reporting the best iterate");

  if (cfg.format == "json") {
    json doc;
    doc["config"] = to_json(cfg);
    doc["window"] = period;
    doc["n"] = v.n();
    doc["factors"] = factors_to_json(est.factors, data.symbols);
    doc["report"] = to_json(est.report);
    emit(cfg, out, dump(doc));
  } else {
    std::ostringstream os;
    os << config_comment(cfg) << "ticker,w1,w2\n";
    for (const auto& f : factors_to_json(est.factors, data.symbols)) {
      os << f["ticker"].get<std::string>() << ',' << format_number(f["w1"].get<double>()) << ','
         << format_number(f["w2"].get<double>()) << '\n';
    }
    emit(cfg, out, os.str());
  }
  return kOk;
}

int cmd_optimize(RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
  if (cfg.format.empty()) cfg.format = "json";
  if (cfg.format == "text") throw InfeasibleConfig("optimize supports json or csv output");
  const WindowedDataset data = load_dataset(cfg, log);
  const auto [period, v] = pick_window(data, cfg, log);
  if (v.n() < 2) throw InvalidProblem("optimize needs at least two assets, input has " + std::to_string(v.n()));
  const PairGraph observed = v.support();
  if (!cfg.m) cfg.m = observed.edge_count();
  SearchConfig sc;
  sc.m = *cfg.m;
  sc.node_cap = cfg.node_cap;
  sc.branch_rule = cfg.branch_rule;
  sc.bound_rule = cfg.bound_rule;
  sc.validate(v.n());

  Estimate est = estimate(v, observed, cfg.ipm);
  if (!est.report.converged) log.warn("estimator did not converge; searching on the best iterate");
  const Eigen::MatrixXd k_star = reconstruct_k(est.factors);
  const SearchResult res = search(k_star, sc, &v.values());
  log.info("search: optimal={} expanded={} pruned={}", res.optimal, res.nodes_expanded, res.nodes_pruned);
  if (!res.optimal) log.warn("node_cap reached; result is the best graph found, not proven optimal");
  const PairDiff diff = diff_pairs(observed, res.graph, data.symbols);

  if (cfg.format == "json") {
    json doc;
    doc["config"] = to_json(cfg);
    doc["window"] = period;
    doc["m"] = *cfg.m;
    doc["observed_pairs"] = observed.edge_count();
    doc["estimate"] = {{"converged", est.report.converged},
                       {"final_kkt_residual", est.report.final_kkt_residual},
                       {"objective", est.report.objective},
                       {"newton_iters", est.report.newton_iters}};
    doc["result"] = to_json(res, data.symbols);
    doc["diff"] = to_json(diff);
    emit(cfg, out, dump(doc));
  } else {
    std::ostringstream os;
    os << config_comment(cfg) << "base,quote,status\n";
    for (const auto& [i, j] : res.graph.edges()) {
      os << data.symbols[i] << ',' << data.symbols[j] << ',' << (observed.has_edge(i, j) ? "kept" : "added") << '\n';
    }
    for (const auto& [a, b] : diff.removed) os << a << ',' << b << ",removed\n";
    emit(cfg, out, os.str());
  }
  return kOk;
}

int cmd_evaluate(RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
  if (cfg.format.empty()) cfg.format = "csv";
  if (cfg.format == "text") throw InfeasibleConfig("evaluate supports csv or json output");
  const WindowedDataset data = load_dataset(cfg, log);
  if (data.windows.size() < 2) {
    throw InsufficientData("evaluate needs at least two windows, input has " + std::to_string(data.windows.size()));
  }
  const Index n = data.symbols.size();
  if (n < 2) throw InvalidProblem("evaluate needs at least two assets");
  if (cfg.m_sweep.empty()) cfg.m_sweep = default_sweep(n);
  if (cfg.threads < 1) throw InfeasibleConfig("threads must be >= 1");

  EvalConfig ec;
  ec.ipm = cfg.ipm;
  ec.node_cap = cfg.node_cap;
  ec.branch_rule = cfg.branch_rule;
  ec.bound_rule = cfg.bound_rule;
  ec.weights = cfg.weights;
  ec.threads = cfg.threads;
  ec.reference_n = cfg.reference_n;
  const Evaluation ev = evaluate(data, cfg.m_sweep, ec);
  for (const auto& p : ev.coverage) {
    if (!p.error.empty()) log.warn("window {} m={}: {}", p.window, p.m, p.error);
    else if (!p.optimal) log.warn("window {} m={}: node_cap reached, point not proven optimal", p.window, p.m);
  }

  if (cfg.format == "csv") {
    std::ostringstream os;
    os << config_comment(cfg);
    write_evaluation_csv(os, ev);
    emit(cfg, out, os.str());
  } else {
    json doc;
    doc["config"] = to_json(cfg);
    json fits = json::array();
    for (const auto& f : ev.fits) {
      json j = {{"window", f.window}};
      if (f.error.empty()) {
        j["converged"] = f.report.converged;
        j["final_kkt_residual"] = f.report.final_kkt_residual;
        j["objective"] = f.report.objective;
      } else {
        j["error"] = f.error;
      }
      fits.push_back(std::move(j));
    }
    doc["fits"] = std::move(fits);
    doc["coverage"] = json::array();
    for (const auto& p : ev.coverage) doc["coverage"].push_back(to_json(p));
    doc["retention"] = json::array();
    for (const auto& p : ev.retention) doc["retention"].push_back(to_json(p));
    emit(cfg, out, dump(doc));
  }
  return kOk;
}

int cmd_synth(RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
  if (cfg.format.empty()) cfg.format = "csv";
  if (cfg.format != "csv") throw InfeasibleConfig("synth writes csv only");
  const SynthData data = synthesize(cfg.synth);
  std::ostringstream os;
  os << config_comment(cfg);
  write_volume_csv(os, to_records(data));
  emit(cfg, out, os.str());

  std::optional<std::string> truth_path = cfg.truth;
  if (!truth_path && cfg.output && *cfg.output != "-") truth_path = *cfg.output + ".truth.json";
  if (truth_path) {
    json doc = synth_truth_json(data, cfg.synth);
    doc["config"] = to_json(cfg);
    std::ofstream f(*truth_path, std::ios::binary);
    if (!f || !(f << dump(doc))) throw InputMissing("cannot write truth file " + *truth_path);
    log.info("wrote ground truth to {}", *truth_path);
  } else {
    log.warn("output is stdout and --truth is unset; ground truth not written");
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);

  CLI::App app{"Estimate intentional trading volume and search optimal trading-pair graphs.", "pairflow"};
  std::string command;
  std::string config_path;
  app.add_option("command", command, "stats | estimate | optimize | evaluate | synth")
      ->required()
      ->check(CLI::IsMember(kCommands));
  app.add_option("--config", config_path, "Flat INI or JSON config file");
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flags;
  for (const auto& key : config_keys()) {
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    flags[key] = app.add_option("--" + dashed, flag_values[key]);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInfeasibleConfig;
  }

  try {
    RunConfig cfg;
    cfg.command = command;
    if (!config_path.empty()) {
      for (const auto& [key, value] : read_config_file(config_path)) apply_setting(cfg, key, value);
    }
    for (const auto& [key, opt] : flags) {
      if (opt->count() > 0) apply_setting(cfg, key, flag_values[key]);
    }
    cfg.ipm.seed = cfg.seed;
    cfg.synth.seed = cfg.seed;
    cfg.ipm.validate();
    log->debug("resolved config: {}", to_json(cfg).dump());

    if (command == "stats") return cmd_stats(cfg, out, *log);
    if (command == "estimate") return cmd_estimate(cfg, out, *log);
    if (command == "optimize") return cmd_optimize(cfg, out, *log);
    if (command == "evaluate") return cmd_evaluate(cfg, out, *log);
    return cmd_synth(cfg, out, *log);
  } catch (const InputMissing& e) {
    err << "error: " << e.what() << "\n";
    return kInputMissing;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const InfeasibleConfig& e) {
    err << "error: " << e.what() << "\n";
    return kInfeasibleConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace pairflow::cli
