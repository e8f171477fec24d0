// dcmg: equilibrium / simulate / plot / sweep front end.

#include "dcmg/config.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace dcmg;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (item.empty() || used != item.size()) {
      throw ConfigError("--values: '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--values: empty list");
  return out;
}

void print_equilibrium_table(const Equilibrium& eq) {
  std::printf("%-22s %12s\n", "quantity", "value");
  std::printf("%-22s %12.6f\n", "v_b* [V]", eq.bus_voltage);
  std::printf("%-22s %12.6f\n", "d_l*", eq.duty);
  std::printf("%-22s %12.6f\n", "I_L [A]", eq.total_load_current);
  for (std::size_t j = 0; j < eq.state.n_sources(); ++j) {
    std::printf("%-22s %12.6f\n", ("i_t" + std::to_string(j + 1) + "* [A]").c_str(),
                eq.state.it(j));
    std::printf("%-22s %12.6f\n", ("v_" + std::to_string(j + 1) + "* [V]").c_str(), eq.state.v(j));
  }
  std::printf("%-22s %12.6f\n", "i_f* [A]", eq.state.i_f());
  std::printf("%-22s %12.6f\n", "v_l* [V]", eq.state.vl());
}

int cmd_equilibrium(const std::string& params_file) {
  const ScenarioFile file = load_scenario(resolve_config_path(params_file));
  const Scenario& sc = file.scenario;
  const Equilibrium eq =
      solve_opf(sc.params, sc.bus_voltage_target, sc.duty_target, sc.balance);
  std::cout << equilibrium_to_json(eq).dump(2) << "\n";
  print_equilibrium_table(eq);
  return kOk;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

int cmd_simulate(const std::string& scenario_file, std::string prefix) {
  const ScenarioFile file = load_scenario(resolve_config_path(scenario_file));
  if (prefix.empty()) prefix = file.output_prefix;
  if (prefix.empty()) throw ConfigError("no output prefix: pass --out or set output.prefix");
  const RunResult r = run_scenario(file.scenario);
  write_trace_csv(std::filesystem::path(prefix + ".trace.csv"), r.trace);
  nlohmann::ordered_json doc = metrics_to_json(r.metrics);
  doc["equilibrium"] = equilibrium_to_json(r.equilibrium);
  write_text(prefix + ".metrics.json", doc.dump(2) + "\n");
  std::printf("%s bus_deviation=%.3f%% max_current_deviation=%.3f%% uub_radius=%.4g\n",
              r.metrics.verdict.c_str(), r.metrics.bus_deviation_pct,
              r.metrics.max_current_deviation_pct, r.metrics.uub_radius);
  return kOk;
}

int cmd_plot(const std::string& trace_file, const std::string& out, double clip) {
  const TraceTable table = read_trace_csv(std::filesystem::path(trace_file));
  PlotOptions opt;
  opt.clip = clip;
  write_text(out, render_svg(table, opt));
  return kOk;
}

int cmd_sweep(const std::string& scenario_file, const std::string& param,
              const std::string& values, const std::string& out) {
  const ScenarioFile base = load_scenario(resolve_config_path(scenario_file));
  const std::vector<double> vals = parse_values(values);
  std::vector<Scenario> scenarios;
  for (double v : vals) scenarios.push_back(with_parameter(base, param, v).scenario);
  const std::vector<RunResult> results = run_batch(scenarios);

  std::ofstream os(out);
  if (!os) throw IoError("cannot write " + out);
  const std::size_t k = base.scenario.n_sources() + 1;
  os << "value,verdict,bus_deviation_pct";
  for (std::size_t c = 1; c <= k; ++c) os << ",current_deviation_pct" << c;
  os << ",max_current_deviation_pct,final_bus_offset,diverged,divergence_time,uub_radius,"
        "settling_time,uub_settled,qp_feasible_fraction,pre_attack_h_increases\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.12g", v);
    os << buf;
  };
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const Metrics& m = results[i].metrics;
    std::snprintf(buf, sizeof buf, "%.12g", vals[i]);
    os << buf << ',' << m.verdict;
    put(m.bus_deviation_pct);
    for (double d : m.current_deviation_pct) put(d);
    put(m.max_current_deviation_pct);
    put(m.final_bus_offset);
    os << ',' << (m.diverged ? 1 : 0);
    put(m.divergence_time);
    put(m.uub_radius);
    put(m.settling_time);
    os << ',' << (m.uub_settled ? 1 : 0);
    put(m.qp_feasible_fraction);
    os << ',' << m.pre_attack_h_increases << '\n';
    std::printf("%s=%g %s\n", param.c_str(), vals[i], m.verdict.c_str());
  }
  if (!os) throw IoError("write failed for " + out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Averaged DC microgrid: equilibrium, closed-loop simulation under FDI attacks"};
  app.require_subcommand(1);

  std::string params_file, scenario_file, out, trace_file, param, values;
  double clip = 1e6;

  auto* eq = app.add_subcommand("equilibrium", "print the loss-optimal steady state");
  eq->add_option("--params", params_file, "scenario or parameter file (JSON)")->required();

  auto* sim = app.add_subcommand("simulate", "run a scenario, write trace CSV and metrics JSON");
  sim->add_option("--scenario", scenario_file, "scenario file (JSON)")->required();
  sim->add_option("--out", out, "output prefix (<prefix>.trace.csv, <prefix>.metrics.json)");

  auto* plot = app.add_subcommand("plot", "render a trace CSV as SVG");
  plot->add_option("--trace", trace_file, "trace CSV")->required();
  plot->add_option("--out", out, "output SVG")->required();
  plot->add_option("--clip", clip, "clip |y| at this value")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "run one scenario per parameter value");
  sweep->add_option("--scenario", scenario_file, "scenario file (JSON)")->required();
  sweep->add_option("--param", param, "dotted path, e.g. controller.adaptation_gain.0")
      ->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--out", out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*eq) return cmd_equilibrium(params_file);
    if (*sim) return cmd_simulate(scenario_file, out);
    if (*plot) return cmd_plot(trace_file, out, clip);
    if (*sweep) return cmd_sweep(scenario_file, param, values, out);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoError;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const InputError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  }
  return kOk;
}
