#include "dcmg/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#ifndef DCMG_SCENARIO_DIR
#define DCMG_SCENARIO_DIR "scenarios"
#endif

namespace dcmg {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Maps JSON pointers ("/controller/rho_max") to the 1-based line where the
// key (or array element) starts. Assumes the text already parsed cleanly.
std::map<std::string, int> index_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string path;
    std::size_t index = 0;
    bool expect_key = true;
    std::string key;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;

  auto value_path = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.path + "/" + (f.object ? f.key : std::to_string(f.index));
  };
  auto note_value = [&]() {
    const std::string p = value_path();
    lines.emplace(p, line);
    return p;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    switch (c) {
      case '\n':
        ++line;
        break;
      case '{':
      case '[': {
        const std::string p = note_value();
        stack.push_back(Frame{c == '{', p, 0, true, {}});
        break;
      }
      case '}':
      case ']':
        if (!stack.empty()) stack.pop_back();
        break;
      case ',':
        if (!stack.empty()) {
          if (stack.back().object) stack.back().expect_key = true;
          else ++stack.back().index;
        }
        break;
      case '"': {
        std::string s;
        for (++i; i < text.size() && text[i] != '"'; ++i) {
          if (text[i] == '\\' && i + 1 < text.size()) ++i;
          s.push_back(text[i]);
        }
        if (!stack.empty() && stack.back().object && stack.back().expect_key) {
          stack.back().key = s;
          stack.back().expect_key = false;
          lines.emplace(value_path(), line);
        } else {
          note_value();
        }
        break;
      }
      default:
        if (c == '-' || (c >= '0' && c <= '9') || c == 't' || c == 'f' || c == 'n') {
          note_value();
          while (i + 1 < text.size() && std::string_view(",]}\n \t\r").find(text[i + 1]) ==
                                           std::string_view::npos) {
            ++i;
          }
        }
        break;
    }
  }
  return lines;
}

class Reader {
 public:
  Reader(std::string origin, std::map<std::string, int> lines)
      : origin_(std::move(origin)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    std::string where = origin_;
    // Walk up to the nearest located ancestor.
    std::string p = path;
    while (true) {
      const auto it = lines_.find(p);
      if (it != lines_.end()) {
        where += ":" + std::to_string(it->second);
        break;
      }
      const auto slash = p.rfind('/');
      if (slash == std::string::npos || p.empty()) break;
      p = p.substr(0, slash);
    }
    throw ConfigError(where + ": " + (path.empty() ? "/" : path) + ": " + what);
  }

  void require_object(const json& j, const std::string& path,
                      std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(path, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
      if (!ok.count(key)) fail(path + "/" + key, "unknown key '" + key + "'");
    }
  }

  void number(const json& obj, const std::string& path, const char* key, double& out) const {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number()) fail(path + "/" + key, "expected a number");
    out = it->get<double>();
  }

  void boolean(const json& obj, const std::string& path, const char* key, bool& out) const {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_boolean()) fail(path + "/" + key, "expected true or false");
    out = it->get<bool>();
  }

  void string(const json& obj, const std::string& path, const char* key, std::string& out) const {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_string()) fail(path + "/" + key, "expected a string");
    out = it->get<std::string>();
  }

  void unsigned_int(const json& obj, const std::string& path, const char* key,
                    std::uint64_t& out) const {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number_unsigned()) fail(path + "/" + key, "expected a nonnegative integer");
    out = it->get<std::uint64_t>();
  }

  void vector(const json& obj, const std::string& path, const char* key, std::size_t size,
              std::vector<double>& out) const {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string p = path + "/" + key;
    if (!it->is_array()) fail(p, "expected an array of numbers");
    if (it->size() != size) {
      fail(p, "expected " + std::to_string(size) + " entries, got " + std::to_string(it->size()));
    }
    out.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      if (!(*it)[i].is_number()) fail(p + "/" + std::to_string(i), "expected a number");
      out.push_back((*it)[i].get<double>());
    }
  }

 private:
  std::string origin_;
  std::map<std::string, int> lines_;
};

const char* kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::Constant: return "constant";
    case AttackKind::Polynomial: return "polynomial";
    case AttackKind::Exponential: return "exponential";
    case AttackKind::None: break;
  }
  return "none";
}

void read_params(const Reader& rd, const json& j, MicrogridParams& p) {
  const std::string path = "/params";
  rd.require_object(j, path,
                    {"sources", "bus_capacitance", "filter_inductance", "load_capacitance",
                     "linear_load", "nonlinear_load"});
  if (const auto it = j.find("sources"); it != j.end()) {
    if (!it->is_array() || it->empty()) rd.fail(path + "/sources", "expected a nonempty array");
    p.sources.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string sp = path + "/sources/" + std::to_string(i);
      const json& s = (*it)[i];
      rd.require_object(s, sp, {"capacitance", "inductance", "resistance"});
      for (const char* key : {"capacitance", "inductance", "resistance"}) {
        if (!s.contains(key)) rd.fail(sp, std::string("missing '") + key + "'");
      }
      SourceParams src{};
      rd.number(s, sp, "capacitance", src.capacitance);
      rd.number(s, sp, "inductance", src.inductance);
      rd.number(s, sp, "resistance", src.resistance);
      p.sources.push_back(src);
    }
  }
  rd.number(j, path, "bus_capacitance", p.bus_capacitance);
  rd.number(j, path, "filter_inductance", p.filter_inductance);
  rd.number(j, path, "load_capacitance", p.load_capacitance);
  rd.number(j, path, "linear_load", p.linear_load);
  rd.number(j, path, "nonlinear_load", p.nonlinear_load);
}

void read_targets(const Reader& rd, const json& j, Scenario& sc) {
  const std::string path = "/targets";
  rd.require_object(j, path, {"bus_voltage", "duty", "load_balance"});
  rd.number(j, path, "bus_voltage", sc.bus_voltage_target);
  rd.number(j, path, "duty", sc.duty_target);
  std::string balance = sc.balance == LoadBalance::Circuit ? "circuit" : "printed";
  rd.string(j, path, "load_balance", balance);
  if (balance == "circuit") sc.balance = LoadBalance::Circuit;
  else if (balance == "printed") sc.balance = LoadBalance::Printed;
  else rd.fail(path + "/load_balance", "expected \"circuit\" or \"printed\"");
}

void read_controller(const Reader& rd, const json& j, Scenario& sc) {
  const std::string path = "/controller";
  rd.require_object(j, path,
                    {"kind", "source_damping", "load_damping", "clf_rate", "adaptation_gain",
                     "initial_rho", "denominator_decay", "rho_max", "lambda",
                     "source_current_max", "duty_min", "duty_max", "bus_voltage_guard"});
  std::string kind = sc.kind == ControllerKind::Nominal ? "nominal" : "ar_clf_qp";
  rd.string(j, path, "kind", kind);
  if (kind == "nominal") sc.kind = ControllerKind::Nominal;
  else if (kind == "ar_clf_qp") sc.kind = ControllerKind::ArClfQp;
  else rd.fail(path + "/kind", "expected \"nominal\" or \"ar_clf_qp\"");

  const std::size_t n = sc.params.n_sources();
  ControllerConfig& c = sc.controller;
  rd.vector(j, path, "source_damping", n, c.source_damping);
  rd.number(j, path, "load_damping", c.load_damping);
  rd.vector(j, path, "clf_rate", n + 1, c.clf_rate);
  rd.vector(j, path, "adaptation_gain", n + 1, c.adaptation_gain);
  rd.vector(j, path, "initial_rho", n + 1, c.initial_rho);
  rd.number(j, path, "denominator_decay", c.denominator_decay);
  rd.number(j, path, "rho_max", c.rho_max);
  rd.vector(j, path, "lambda", sc.params.state_dim(), c.lambda);
  rd.number(j, path, "source_current_max", c.source_current_max);
  rd.number(j, path, "duty_min", c.duty_min);
  rd.number(j, path, "duty_max", c.duty_max);
  rd.number(j, path, "bus_voltage_guard", c.bus_voltage_guard);
}

void read_attack(const Reader& rd, const json& j, Scenario& sc) {
  const std::string path = "/attack";
  rd.require_object(j, path, {"polynomial_absolute_time", "noise_hold", "channels"});
  AttackSpec& a = sc.attack;
  rd.boolean(j, path, "polynomial_absolute_time", a.polynomial_absolute_time);
  rd.number(j, path, "noise_hold", a.noise_hold);
  const auto it = j.find("channels");
  if (it == j.end()) return;
  const std::size_t want = sc.params.n_sources() + 1;
  if (!it->is_array()) rd.fail(path + "/channels", "expected an array");
  if (it->size() != want) {
    rd.fail(path + "/channels", "expected " + std::to_string(want) +
                                    " channels (one per source plus the load), got " +
                                    std::to_string(it->size()));
  }
  for (std::size_t i = 0; i < want; ++i) {
    const std::string cp = path + "/channels/" + std::to_string(i);
    const json& cj = (*it)[i];
    rd.require_object(cj, cp,
                      {"kind", "constant", "poly_offset", "poly_slope", "exp_scale", "exp_offset",
                       "exp_gain", "exp_rate", "start", "noise_std"});
    ChannelAttack ch;
    std::string kind = "none";
    rd.string(cj, cp, "kind", kind);
    if (kind == "none") ch.kind = AttackKind::None;
    else if (kind == "constant") ch.kind = AttackKind::Constant;
    else if (kind == "polynomial") ch.kind = AttackKind::Polynomial;
    else if (kind == "exponential") ch.kind = AttackKind::Exponential;
    else rd.fail(cp + "/kind", "expected none, constant, polynomial or exponential");
    rd.number(cj, cp, "constant", ch.constant);
    rd.number(cj, cp, "poly_offset", ch.poly_offset);
    rd.number(cj, cp, "poly_slope", ch.poly_slope);
    rd.number(cj, cp, "exp_scale", ch.exp_scale);
    rd.number(cj, cp, "exp_offset", ch.exp_offset);
    rd.number(cj, cp, "exp_gain", ch.exp_gain);
    rd.number(cj, cp, "exp_rate", ch.exp_rate);
    rd.number(cj, cp, "start", ch.start);
    rd.number(cj, cp, "noise_std", ch.noise_std);
    a.channels[i] = ch;
  }
}

void read_simulation(const Reader& rd, const json& j, Scenario& sc) {
  const std::string path = "/simulation";
  rd.require_object(j, path,
                    {"horizon", "step", "control_period", "log_interval", "divergence_threshold",
                     "bus_collapse_fraction", "growth_tolerance", "convergence_tol",
                     "initial_state"});
  rd.number(j, path, "horizon", sc.horizon);
  rd.number(j, path, "step", sc.step);
  rd.number(j, path, "control_period", sc.control_period);
  rd.number(j, path, "log_interval", sc.log_interval);
  rd.number(j, path, "divergence_threshold", sc.divergence_threshold);
  rd.number(j, path, "bus_collapse_fraction", sc.bus_collapse_fraction);
  rd.number(j, path, "growth_tolerance", sc.growth_tolerance);
  rd.number(j, path, "convergence_tol", sc.convergence_tol);
  if (const auto it = j.find("initial_state"); it != j.end()) {
    const std::string ip = path + "/initial_state";
    if (!it->is_object()) rd.fail(ip, "expected an object");
    const auto labels = state_labels(sc.params.n_sources());
    sc.initial_overrides.clear();
    for (const auto& [key, value] : it->items()) {
      if (std::find(labels.begin(), labels.end(), key) == labels.end()) {
        rd.fail(ip + "/" + key, "unknown state component '" + key + "'");
      }
      if (!value.is_number()) rd.fail(ip + "/" + key, "expected a number");
      sc.initial_overrides[key] = value.get<double>();
    }
  }
}

ScenarioFile read_document(const json& doc, const Reader& rd) {
  rd.require_object(doc, "",
                    {"version", "seed", "params", "targets", "controller", "attack", "simulation",
                     "output"});
  const auto ver = doc.find("version");
  if (ver == doc.end()) rd.fail("", "missing 'version'");
  if (!ver->is_number_integer() || ver->get<int>() != kScenarioVersion) {
    rd.fail("/version", "unsupported version (expected " + std::to_string(kScenarioVersion) + ")");
  }

  ScenarioFile out;
  Scenario& sc = out.scenario;
  if (const auto it = doc.find("params"); it != doc.end()) read_params(rd, *it, sc.params);
  const std::size_t n = sc.params.n_sources();
  sc.controller = ControllerConfig::defaults(n);
  sc.attack = AttackSpec::none(n + 1);
  rd.unsigned_int(doc, "", "seed", sc.attack.seed);
  if (const auto it = doc.find("targets"); it != doc.end()) read_targets(rd, *it, sc);
  if (const auto it = doc.find("controller"); it != doc.end()) read_controller(rd, *it, sc);
  if (const auto it = doc.find("attack"); it != doc.end()) read_attack(rd, *it, sc);
  if (const auto it = doc.find("simulation"); it != doc.end()) read_simulation(rd, *it, sc);
  if (const auto it = doc.find("output"); it != doc.end()) {
    rd.require_object(*it, "/output", {"prefix"});
    rd.string(*it, "/output", "prefix", out.output_prefix);
  }

  try {
    sc.validate();
  } catch (const std::exception& e) {
    rd.fail("", e.what());
  }
  return out;
}

ojson vec_json(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

ScenarioFile parse_scenario(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return read_document(doc, Reader(origin, index_lines(text)));
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string());
}

ScenarioFile scenario_from_json(const json& doc) {
  return read_document(doc, Reader("<document>", {}));
}

ojson scenario_to_json(const ScenarioFile& file) {
  const Scenario& sc = file.scenario;
  ojson doc;
  doc["version"] = kScenarioVersion;
  doc["seed"] = sc.attack.seed;

  ojson params;
  params["sources"] = ojson::array();
  for (const auto& s : sc.params.sources) {
    params["sources"].push_back(
        {{"capacitance", s.capacitance}, {"inductance", s.inductance}, {"resistance", s.resistance}});
  }
  params["bus_capacitance"] = sc.params.bus_capacitance;
  params["filter_inductance"] = sc.params.filter_inductance;
  params["load_capacitance"] = sc.params.load_capacitance;
  params["linear_load"] = sc.params.linear_load;
  params["nonlinear_load"] = sc.params.nonlinear_load;
  doc["params"] = params;

  doc["targets"] = {{"bus_voltage", sc.bus_voltage_target},
                    {"duty", sc.duty_target},
                    {"load_balance", sc.balance == LoadBalance::Circuit ? "circuit" : "printed"}};

  const ControllerConfig& c = sc.controller;
  ojson ctrl;
  ctrl["kind"] = sc.kind == ControllerKind::Nominal ? "nominal" : "ar_clf_qp";
  ctrl["source_damping"] = vec_json(c.source_damping);
  ctrl["load_damping"] = c.load_damping;
  ctrl["clf_rate"] = vec_json(c.clf_rate);
  ctrl["adaptation_gain"] = vec_json(c.adaptation_gain);
  ctrl["initial_rho"] = vec_json(c.initial_rho);
  ctrl["denominator_decay"] = c.denominator_decay;
  ctrl["rho_max"] = c.rho_max;
  ctrl["lambda"] = c.lambda.empty()
                       ? vec_json(std::vector<double>(sc.params.state_dim(), 0.0))
                       : vec_json(c.lambda);
  ctrl["source_current_max"] = c.source_current_max;
  ctrl["duty_min"] = c.duty_min;
  ctrl["duty_max"] = c.duty_max;
  ctrl["bus_voltage_guard"] = c.bus_voltage_guard;
  doc["controller"] = ctrl;

  ojson attack;
  attack["polynomial_absolute_time"] = sc.attack.polynomial_absolute_time;
  attack["noise_hold"] = sc.attack.noise_hold;
  attack["channels"] = ojson::array();
  for (const auto& ch : sc.attack.channels) {
    attack["channels"].push_back({{"kind", kind_name(ch.kind)},
                                  {"constant", ch.constant},
                                  {"poly_offset", ch.poly_offset},
                                  {"poly_slope", ch.poly_slope},
                                  {"exp_scale", ch.exp_scale},
                                  {"exp_offset", ch.exp_offset},
                                  {"exp_gain", ch.exp_gain},
                                  {"exp_rate", ch.exp_rate},
                                  {"start", ch.start},
                                  {"noise_std", ch.noise_std}});
  }
  doc["attack"] = attack;

  ojson sim;
  sim["horizon"] = sc.horizon;
  sim["step"] = sc.step;
  sim["control_period"] = sc.control_period;
  sim["log_interval"] = sc.log_interval;
  sim["divergence_threshold"] = sc.divergence_threshold;
  sim["bus_collapse_fraction"] = sc.bus_collapse_fraction;
  sim["growth_tolerance"] = sc.growth_tolerance;
  sim["convergence_tol"] = sc.convergence_tol;
  sim["initial_state"] = ojson::object();
  for (const auto& [k, v] : sc.initial_overrides) sim["initial_state"][k] = v;
  doc["simulation"] = sim;

  doc["output"] = {{"prefix", file.output_prefix}};
  return doc;
}

ScenarioFile with_parameter(const ScenarioFile& file, const std::string& path, double value) {
  json doc = json::parse(scenario_to_json(file).dump());
  std::string ptr;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("parameter path '" + path + "' has an empty component");
    ptr += "/" + part;
  }
  const json::json_pointer jp(ptr.empty() ? "" : ptr);
  if (ptr.empty() || !doc.contains(jp)) {
    throw ConfigError("parameter path '" + path + "' does not resolve in the scenario");
  }
  if (!doc.at(jp).is_number()) {
    throw ConfigError("parameter path '" + path + "' is not numeric");
  }
  if (doc.at(jp).is_number_unsigned()) {
    if (value < 0.0 || value != std::floor(value)) {
      throw ConfigError("parameter path '" + path + "' needs a nonnegative integer");
    }
    doc[jp] = static_cast<std::uint64_t>(value);
  } else {
    doc[jp] = value;
  }
  return read_document(doc, Reader("parameter " + path, {}));
}

std::filesystem::path resolve_config_path(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path) || path.is_absolute()) return path;
  if (const char* dir = std::getenv("DCMG_CONFIG_DIR"); dir != nullptr && *dir != '\0') {
    const fs::path p = fs::path(dir) / path;
    if (fs::exists(p)) return p;
  }
  const fs::path bundled = fs::path(DCMG_SCENARIO_DIR) / path;
  if (fs::exists(bundled)) return bundled;
  return path;
}

ojson equilibrium_to_json(const Equilibrium& eq) {
  ojson j;
  const std::size_t n = eq.state.n_sources();
  j["bus_voltage"] = eq.bus_voltage;
  j["duty"] = eq.duty;
  j["total_load_current"] = eq.total_load_current;
  j["sources"] = ojson::array();
  for (std::size_t s = 0; s < n; ++s) {
    j["sources"].push_back({{"v", eq.state.v(s)},
                            {"it", eq.state.it(s)},
                            {"is", eq.input.source_current[s]}});
  }
  j["vb"] = eq.state.vb();
  j["if"] = eq.state.i_f();
  j["vl"] = eq.state.vl();
  return j;
}

ojson metrics_to_json(const Metrics& m) {
  ojson j;
  j["verdict"] = m.verdict;
  j["bus_deviation_pct"] = m.bus_deviation_pct;
  j["current_deviation_pct"] = vec_json(m.current_deviation_pct);
  j["max_current_deviation_pct"] = m.max_current_deviation_pct;
  j["final_bus_offset"] = m.final_bus_offset;
  j["diverged"] = m.diverged;
  j["divergence_time"] = m.divergence_time;
  j["uub_radius"] = m.uub_radius;
  j["settling_time"] = m.settling_time;
  j["uub_settled"] = m.uub_settled;
  j["qp_feasible_fraction"] = m.qp_feasible_fraction;
  j["pre_attack_h_increases"] = m.pre_attack_h_increases;
  j["pre_attack_max_h_increase"] = m.pre_attack_max_h_increase;
  j["window_start"] = m.window_start;
  return j;
}

}  // namespace dcmg
