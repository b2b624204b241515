#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pairflow/serialize.hpp"

namespace pairflow::cli {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw InfeasibleConfig("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& text) {
  T out{};
  const std::string v = trim(text);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, text, "an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& text) {
  double out = 0.0;
  const std::string v = trim(text);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, text, "a finite number");
  }
  return out;
}

std::optional<std::string> optional_text(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return v;
}

template <class T>
std::optional<T> optional_integer(const std::string& key, const std::string& v) {
  if (trim(v).empty()) return std::nullopt;
  return parse_integer<T>(key, v);
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["input"] = [](RunConfig& c, const std::string& v) { c.input = optional_text(v); };
    t["output"] = [](RunConfig& c, const std::string& v) { c.output = optional_text(v); };
    t["truth"] = [](RunConfig& c, const std::string& v) { c.truth = optional_text(v); };
    t["format"] = [](RunConfig& c, const std::string& v) {
      if (v != "json" && v != "csv" && v != "text") bad_value("format", v, "json, csv or text");
      c.format = v;
    };
    t["window"] = [](RunConfig& c, const std::string& v) {
      if (!v.empty() && !is_period(v)) bad_value("window", v, "a YYYY-MM period");
      c.window = optional_text(v);
    };
    t["top_k"] = [](RunConfig& c, const std::string& v) { c.top_k = optional_integer<Index>("top_k", v); };
    t["m"] = [](RunConfig& c, const std::string& v) { c.m = optional_integer<Index>("m", v); };
    t["m_sweep"] = [](RunConfig& c, const std::string& v) { c.m_sweep = parse_m_sweep(v); };
    t["quote_a"] = [](RunConfig& c, const std::string& v) { c.quote_a = optional_text(v); };
    t["quote_b"] = [](RunConfig& c, const std::string& v) { c.quote_b = optional_text(v); };
    t["lambda"] = [](RunConfig& c, const std::string& v) { c.ipm.lambda_reg = parse_real("lambda", v); };
    t["mu0"] = [](RunConfig& c, const std::string& v) { c.ipm.mu0 = parse_real("mu0", v); };
    t["sigma"] = [](RunConfig& c, const std::string& v) { c.ipm.sigma = parse_real("sigma", v); };
    t["mu_min"] = [](RunConfig& c, const std::string& v) { c.ipm.mu_min = parse_real("mu_min", v); };
    t["tol_kkt"] = [](RunConfig& c, const std::string& v) { c.ipm.tol_kkt = parse_real("tol_kkt", v); };
    t["tol_orth"] = [](RunConfig& c, const std::string& v) { c.ipm.tol_orth = parse_real("tol_orth", v); };
    t["max_outer"] = [](RunConfig& c, const std::string& v) { c.ipm.max_outer = parse_integer<int>("max_outer", v); };
    t["max_newton"] = [](RunConfig& c, const std::string& v) {
      c.ipm.max_newton = parse_integer<int>("max_newton", v);
    };
    t["ftb_tau"] = [](RunConfig& c, const std::string& v) { c.ipm.ftb_tau = parse_real("ftb_tau", v); };
    t["seed"] = [](RunConfig& c, const std::string& v) { c.seed = parse_integer<std::uint64_t>("seed", v); };
    t["node_cap"] = [](RunConfig& c, const std::string& v) {
      c.node_cap = parse_integer<std::uint64_t>("node_cap", v);
    };
    t["branch_rule"] = [](RunConfig& c, const std::string& v) { c.branch_rule = parse_branch_rule(v); };
    t["bound_rule"] = [](RunConfig& c, const std::string& v) { c.bound_rule = parse_bound_rule(v); };
    t["weights"] = [](RunConfig& c, const std::string& v) { c.weights = parse_weights(v); };
    t["threads"] = [](RunConfig& c, const std::string& v) { c.threads = parse_integer<int>("threads", v); };
    t["reference_n"] = [](RunConfig& c, const std::string& v) {
      c.reference_n = optional_integer<Index>("reference_n", v);
    };
    t["n"] = [](RunConfig& c, const std::string& v) { c.synth.n = parse_integer<Index>("n", v); };
    t["density"] = [](RunConfig& c, const std::string& v) { c.synth.density = parse_real("density", v); };
    t["noise"] = [](RunConfig& c, const std::string& v) { c.synth.noise = parse_real("noise", v); };
    t["windows"] = [](RunConfig& c, const std::string& v) { c.synth.windows = parse_integer<int>("windows", v); };
    t["drift"] = [](RunConfig& c, const std::string& v) { c.synth.drift = parse_real("drift", v); };
    t["volume_unit"] = [](RunConfig& c, const std::string& v) {
      c.synth.volume_unit = parse_real("volume_unit", v);
    };
    t["start_period"] = [](RunConfig& c, const std::string& v) {
      if (!is_period(v)) bad_value("start_period", v, "a YYYY-MM period");
      c.synth.start_period = v;
    };
    return t;
  }();
  return table;
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

std::string json_value_text(const std::string& key, const nlohmann::json& v) {
  if (v.is_null()) return {};
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  if (v.is_array()) {
    std::string out;
    for (const auto& x : v) {
      if (!x.is_number_integer()) throw InfeasibleConfig("config key '" + key + "': arrays must hold integers");
      if (!out.empty()) out += ',';
      out += x.dump();
    }
    return out;
  }
  throw InfeasibleConfig("config key '" + key + "': nested objects are not supported");
}

void check_known(const std::string& key) {
  if (!setters().count(key)) throw InfeasibleConfig("unknown config key '" + key + "'");
}

nlohmann::json optional_json(const auto& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const std::string k = normalize_key(key);
  check_known(k);
  setters().at(k)(cfg, value);
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputMissing("config file not found or unreadable: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<std::pair<std::string, std::string>> out;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw InfeasibleConfig("config file " + path + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) throw InfeasibleConfig("config file " + path + ": expected a JSON object");
    for (const auto& [key, value] : doc.items()) {
      const std::string k = normalize_key(key);
      check_known(k);
      out.emplace_back(k, json_value_text(k, value));
    }
    return out;
  }

  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    const std::string where = "config file " + path + " line " + std::to_string(line_no);
    if (t.front() == '[') throw InfeasibleConfig(where + ": sections are not supported (flat keys only)");
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InfeasibleConfig(where + ": expected key = value");
    const std::string k = normalize_key(trim(t.substr(0, eq)));
    std::string v = trim(t.substr(eq + 1));
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
      v = v.substr(1, v.size() - 2);
    }
    check_known(k);
    out.emplace_back(k, v);
  }
  return out;
}

std::vector<Index> parse_m_sweep(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto c1 = item.find(':');
    if (c1 == std::string::npos) {
      out.push_back(parse_integer<Index>("m_sweep", item));
      continue;
    }
    const auto c2 = item.find(':', c1 + 1);
    const Index lo = parse_integer<Index>("m_sweep", item.substr(0, c1));
    const Index hi = parse_integer<Index>("m_sweep", item.substr(c1 + 1, c2 == std::string::npos ? std::string::npos
                                                                                               : c2 - c1 - 1));
    const Index step = c2 == std::string::npos ? 1 : parse_integer<Index>("m_sweep", item.substr(c2 + 1));
    if (step == 0 || hi < lo) throw InfeasibleConfig("m_sweep: bad range '" + item + "'");
    for (Index m = lo; m <= hi; m += step) out.push_back(m);
  }
  return out;
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"command", c.command},
          {"input", optional_json(c.input)},
          {"output", optional_json(c.output)},
          {"truth", optional_json(c.truth)},
          {"format", c.format},
          {"window", optional_json(c.window)},
          {"top_k", optional_json(c.top_k)},
          {"m", optional_json(c.m)},
          {"m_sweep", c.m_sweep},
          {"quote_a", optional_json(c.quote_a)},
          {"quote_b", optional_json(c.quote_b)},
          {"lambda", c.ipm.lambda_reg},
          {"mu0", c.ipm.mu0},
          {"sigma", c.ipm.sigma},
          {"mu_min", c.ipm.mu_min},
          {"tol_kkt", c.ipm.tol_kkt},
          {"tol_orth", c.ipm.tol_orth},
          {"max_outer", c.ipm.max_outer},
          {"max_newton", c.ipm.max_newton},
          {"ftb_tau", c.ipm.ftb_tau},
          {"seed", c.seed},
          {"node_cap", c.node_cap},
          {"branch_rule", branch_rule_name(c.branch_rule)},
          {"bound_rule", bound_rule_name(c.bound_rule)},
          {"weights", weights_name(c.weights)},
          {"threads", c.threads},
          {"reference_n", optional_json(c.reference_n)},
          {"n", c.synth.n},
          {"density", c.synth.density},
          {"noise", c.synth.noise},
          {"windows", c.synth.windows},
          {"drift", c.synth.drift},
          {"volume_unit", c.synth.volume_unit},
          {"start_period", c.synth.start_period}};
}

}  // namespace pairflow::cli
