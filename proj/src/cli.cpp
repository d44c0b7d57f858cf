#include "scralloc/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "scralloc/aggregation.hpp"
#include "scralloc/allocation.hpp"
#include "scralloc/error.hpp"
#include "scralloc/io_formats.hpp"
#include "scralloc/mc_oracle.hpp"
#include "scralloc/optimizer.hpp"
#include "scralloc/property_suite.hpp"
#include "scralloc/rorac.hpp"

namespace scralloc::cli {

namespace {

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level_from_env() {
  const char* env = std::getenv("SCRALLOC_LOG");
  if (env == nullptr) return LogLevel::Warn;
  const std::string v = env;
  if (v == "quiet" || v == "off" || v == "0") return LogLevel::Quiet;
  if (v == "info" || v == "2") return LogLevel::Info;
  if (v == "debug" || v == "3") return LogLevel::Debug;
  return LogLevel::Warn;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(log_level_from_env()) {}
  void warn(const std::string& msg) const { emit(LogLevel::Warn, "warning", msg); }
  void info(const std::string& msg) const { emit(LogLevel::Info, "info", msg); }
  void debug(const std::string& msg) const { emit(LogLevel::Debug, "debug", msg); }

 private:
  void emit(LogLevel level, const char* tag, const std::string& msg) const {
    if (static_cast<int>(level_) >= static_cast<int>(level)) err_ << "scralloc: " << tag << ": " << msg << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

struct Options {
  std::string tree;
  std::string income;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = McConfig{}.seed;
  std::size_t samples = McConfig{}.sample_count;
  std::string scenarios;
  std::string constraints;
  bool strict_psd = false;
  bool repair_psd = false;
  std::string h_grid;
  bool uniform_cross_block = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_h_grid(const std::string& text) {
  if (text.empty()) return default_h_grid();
  std::vector<double> grid;
  auto to_double = [&](const std::string& s) {
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    double v = 0.0;
    if (!(in >> v) || !in.eof() || !(v > 0.0)) throw UsageError("invalid --h-grid value '" + s + "'");
    return v;
  };
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    const double eps = to_double(text.substr(0, colon));
    const std::string count = text.substr(colon + 1);
    int points = 0;
    try {
      points = std::stoi(count);
    } catch (const std::exception&) {
      throw UsageError("invalid --h-grid point count '" + count + "'");
    }
    if (points <= 0) throw UsageError("--h-grid needs a positive point count");
    return default_h_grid(eps, points);
  }
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) grid.push_back(to_double(item));
  return grid;
}

RiskTree load_tree(const Options& opt, const Log& log) {
  if (opt.tree.empty()) throw UsageError("--tree is required");
  RiskTree tree = io::parse_tree(io::read_file(opt.tree), opt.tree);
  const ValidationReport report = validate_tree(tree);
  for (const auto& v : report.violations) {
    if (v.severity != Severity::Warning) continue;
    if (opt.strict_psd) throw Error(ErrorKind::NotPsd, v.path, v.message);
    log.warn(v.path + ": " + v.message);
  }
  log.info("tree '" + tree.name + "': " + std::to_string(tree.macros.size()) + " macro-risks, " +
           std::to_string(tree.micro_count()) + " micro-risks");
  return tree;
}

IncomeStats load_income(const Options& opt) {
  if (opt.income.empty()) throw UsageError("--income is required");
  return io::parse_income(io::read_file(opt.income), opt.income);
}

void print(std::ostream& out, const Options& opt, const std::string& csv, const io::Json& json) {
  if (opt.format == "json") {
    out << json.dump(2) << '\n';
  } else {
    out << csv;
  }
}

int finish_with_files(std::ostream& out, const Options& opt, const io::ReportBundle& bundle) {
  if (opt.out.empty()) return kExitOk;
  for (const auto& path : io::write_reports(bundle, opt.out)) out << "wrote " << path.generic_string() << '\n';
  return kExitOk;
}

int cmd_aggregate(const Options& opt, std::ostream& out, const Log& log) {
  const RiskTree tree = load_tree(opt, log);
  const AggregationOutput agg = aggregate_tree(tree);
  io::ReportBundle bundle;
  bundle.aggregation = agg;
  if (!opt.out.empty()) return finish_with_files(out, opt, bundle);
  print(out, opt, io::aggregation_csv(agg), io::aggregation_json(agg));
  return kExitOk;
}

int cmd_allocate(const Options& opt, std::ostream& out, const Log& log) {
  const RiskTree tree = load_tree(opt, log);
  const AllocationResult alloc = allocate(tree);
  io::ReportBundle bundle;
  bundle.allocation = alloc;
  if (!opt.out.empty()) return finish_with_files(out, opt, bundle);
  print(out, opt, io::allocation_csv(alloc), io::allocation_json(alloc));
  return kExitOk;
}

int cmd_rorac(const Options& opt, std::ostream& out, const Log& log) {
  const RiskTree tree = load_tree(opt, log);
  const IncomeStats income = load_income(opt);
  validate_income(tree, income);
  const AllocationResult alloc = allocate(tree);
  const RoracReport report = compute_rorac(alloc, income);
  io::ReportBundle bundle;
  bundle.rorac = report;
  bundle.frontier = frontier_of(ScenarioEvaluation{tree.name, alloc.total_scr, alloc, report});

  std::ostringstream compat;
  io::Json compat_json = io::Json::array();
  if (!opt.h_grid.empty()) {
    const std::vector<double> grid = parse_h_grid(opt.h_grid);
    compat << "node,allocated_scr,node_rorac,total_rorac,outperforms,verdict,sign_consistent\n";
    for (const auto& e : income.entries) {
      const CompatibilityVerdict v = check_rorac_compatibility(tree, income, e.node, grid);
      compat << e.node << ',' << io::format_number(v.allocated) << ',' << io::format_number(v.node_rorac) << ',' << io::format_number(v.total_rorac) << ','
             << (v.outperforms ? 1 : 0) << ',' << (!v.in_domain ? "n/a" : v.pass ? "PASS" : "FAIL") << ','
             << (v.sign_applicable ? (v.sign_consistent ? "1" : "0") : "") << '\n';
      io::Json points = io::Json::array();
      for (const auto& p : v.points) points.push_back({{"h", p.h}, {"total_rorac", p.total_rorac}, {"delta", p.delta}});
      compat_json.push_back({{"node", v.node}, {"node_rorac", v.node_rorac}, {"total_rorac", v.total_rorac},
                             {"allocated_scr", v.allocated}, {"in_domain", v.in_domain}, {"pass", v.pass}, {"points", std::move(points)}});
    }
  }
  if (!opt.out.empty()) {
    finish_with_files(out, opt, bundle);
    if (!opt.h_grid.empty()) {
      const auto path = std::filesystem::path(opt.out) / "compatibility.csv";
      io::write_file(path, compat.str());
      out << "wrote " << path.generic_string() << '\n';
    }
    return kExitOk;
  }
  if (opt.format == "json") {
    io::Json doc = io::rorac_json(report);
    if (!opt.h_grid.empty()) doc["compatibility"] = std::move(compat_json);
    out << doc.dump(2) << '\n';
  } else {
    out << io::rorac_csv(report);
    if (!opt.h_grid.empty()) out << '\n' << compat.str();
  }
  return kExitOk;
}

int cmd_check(const Options& opt, std::ostream& out, const Log& log) {
  const RiskTree tree = load_tree(opt, log);
  std::optional<IncomeStats> income;
  if (!opt.income.empty()) income = load_income(opt);
  PropertyOptions popt;
  popt.seed = opt.seed;
  const PropertyReport report = check_properties(tree, income ? &*income : nullptr, popt);

  std::ostringstream table;
  table << std::left << std::setw(24) << "property" << std::setw(16) << "status" << std::setw(22) << "worst"
        << std::setw(12) << "tolerance" << "detail\n";
  io::Json rows = io::Json::array();
  for (const auto& r : report.results) {
    const bool na = r.status == PropertyStatus::NotApplicable;
    table << std::left << std::setw(24) << r.id << std::setw(16) << to_string(r.status) << std::setw(22)
          << (na ? "-" : io::format_number(r.worst)) << std::setw(12) << (na ? "-" : io::format_number(r.tolerance))
          << r.detail << '\n';
    rows.push_back({{"id", r.id}, {"status", std::string(to_string(r.status))}, {"worst", r.worst},
                    {"tolerance", r.tolerance}, {"detail", r.detail}});
  }
  if (opt.format == "json") {
    out << io::Json{{"passed", report.passed()}, {"results", rows}}.dump(2) << '\n';
  } else {
    out << table.str();
  }
  if (!opt.out.empty()) {
    std::filesystem::create_directories(opt.out);
    io::write_file(std::filesystem::path(opt.out) / "properties.txt", table.str());
  }
  return report.passed() ? kExitOk : kExitDomain;
}

int cmd_simulate(const Options& opt, std::ostream& out, const Log& log) {
  const RiskTree tree = load_tree(opt, log);
  McConfig config;
  config.seed = opt.seed;
  config.sample_count = opt.samples;
  config.psd_repair = opt.repair_psd ? PsdRepair::ClipEigenvalues : PsdRepair::Off;
  config.cross_block = opt.uniform_cross_block ? CrossBlockModel::Uniform : CrossBlockModel::MacroFactor;
  log.info("simulating " + std::to_string(config.sample_count) + " samples, seed " + std::to_string(config.seed));
  const ComparisonReport report = compare_with_closed_form(tree, config);
  if (report.repaired) log.warn("correlation repaired to the nearest PSD matrix by eigenvalue clipping");
  for (const auto& r : report.rows) {
    if (r.flagged) log.warn(r.node + ": closed form and simulation differ by " + io::format_number(r.z) + " SE");
  }
  io::ReportBundle bundle;
  bundle.comparison = report;
  if (!opt.out.empty()) return finish_with_files(out, opt, bundle);
  print(out, opt, io::comparison_csv(report), io::comparison_json(report));
  return kExitOk;
}

std::pair<std::vector<Scenario>, ConstraintSet> load_problem(const Options& opt) {
  if (opt.scenarios.empty()) throw UsageError("--scenarios is required");
  std::vector<Scenario> scenarios = io::parse_scenarios(io::read_file(opt.scenarios), opt.scenarios);
  ConstraintSet constraints;
  if (!opt.constraints.empty()) constraints = io::parse_constraints(io::read_file(opt.constraints), opt.constraints);
  return {std::move(scenarios), std::move(constraints)};
}

int cmd_optimize(const Options& opt, std::ostream& out, const Log& log) {
  const auto [scenarios, constraints] = load_problem(opt);
  const OptimizationReport report = optimize(scenarios, constraints);
  io::ReportBundle bundle;
  bundle.optimization = report;
  bundle.frontier = emit_frontier(report);
  if (!opt.out.empty()) {
    finish_with_files(out, opt, bundle);
  } else {
    print(out, opt, io::optimization_csv(report), io::optimization_json(report));
  }
  const ScenarioOutcome& best = require_optimum(report);
  log.info("selected scenario " + best.evaluation.id);
  return kExitOk;
}

int cmd_plot(const Options& opt, std::ostream& out, const Log& log) {
  FrontierDataset data;
  if (!opt.scenarios.empty()) {
    const auto [scenarios, constraints] = load_problem(opt);
    data = emit_frontier(optimize(scenarios, constraints));
  } else {
    const RiskTree tree = load_tree(opt, log);
    const IncomeStats income = load_income(opt);
    Scenario s{tree.name, {}, {}, tree, income};
    data = frontier_of(evaluate_scenario(s));
  }
  if (!opt.out.empty()) {
    io::ReportBundle bundle;
    bundle.frontier = data;
    return finish_with_files(out, opt, bundle);
  }
  out << io::svg_scatter(data);
  return kExitOk;
}

void add_format(CLI::App* cmd, Options& opt) {
  cmd->add_option("--format", opt.format, "Stdout format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  cmd->add_option("--out", opt.out, "Write report files (CSV, JSON, SVG) into this directory");
}

void add_tree(CLI::App* cmd, Options& opt, bool required = true) {
  auto* o = cmd->add_option("--tree", opt.tree, "Risk tree JSON file");
  if (required) o->required();
  cmd->add_flag("--strict-psd", opt.strict_psd, "Treat non-PSD correlation matrices as errors");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  const Log log(err);
  CLI::App app{"Solvency capital aggregation, Euler allocation and RORAC analysis", "scralloc"};
  app.require_subcommand(1);

  auto* aggregate = app.add_subcommand("aggregate", "Square-root aggregation of micro and macro SCRs");
  add_tree(aggregate, opt);
  add_format(aggregate, opt);

  auto* allocate_cmd = app.add_subcommand("allocate", "Euler allocation of the total SCR to macro- and micro-risks");
  add_tree(allocate_cmd, opt);
  add_format(allocate_cmd, opt);

  auto* rorac = app.add_subcommand("rorac", "RORAC per node and in total, optional compatibility check");
  add_tree(rorac, opt);
  rorac->add_option("--income", opt.income, "Income JSON file")->required();
  rorac->add_option("--h-grid", opt.h_grid, "Compatibility grid: 'eps:points' or comma-separated h values");
  add_format(rorac, opt);

  auto* check = app.add_subcommand("check", "Run the allocation property suite on a tree");
  add_tree(check, opt);
  check->add_option("--income", opt.income, "Income JSON file (synthetic incomes otherwise)");
  check->add_option("--seed", opt.seed, "Seed for random splits and subsets")->capture_default_str();
  add_format(check, opt);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo cross-check of SCR and Euler contributions");
  add_tree(simulate, opt);
  simulate->add_option("--seed", opt.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--samples", opt.samples, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_flag("--repair-psd", opt.repair_psd, "Clip non-PSD correlations to the nearest PSD matrix");
  simulate->add_flag("--uniform-cross-block", opt.uniform_cross_block,
                     "Correlate micro-risks of different macro-risks with the macro correlation directly");
  add_format(simulate, opt);

  auto* optimize_cmd = app.add_subcommand("optimize", "Select the feasible scenario with the highest E(RORAC)");
  optimize_cmd->add_option("--scenarios", opt.scenarios, "Scenario JSON file")->required();
  optimize_cmd->add_option("--constraints", opt.constraints, "Constraint JSON file (vacuous if omitted)");
  add_format(optimize_cmd, opt);

  auto* plot = app.add_subcommand("plot", "Risk-return scatter (SVG) of a portfolio or of the selected scenario");
  add_tree(plot, opt, false);
  plot->add_option("--income", opt.income, "Income JSON file");
  plot->add_option("--scenarios", opt.scenarios, "Scenario JSON file");
  plot->add_option("--constraints", opt.constraints, "Constraint JSON file");
  plot->add_option("--out", opt.out, "Write frontier files into this directory (SVG to stdout otherwise)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (aggregate->parsed()) return cmd_aggregate(opt, out, log);
    if (allocate_cmd->parsed()) return cmd_allocate(opt, out, log);
    if (rorac->parsed()) return cmd_rorac(opt, out, log);
    if (check->parsed()) return cmd_check(opt, out, log);
    if (simulate->parsed()) return cmd_simulate(opt, out, log);
    if (optimize_cmd->parsed()) return cmd_optimize(opt, out, log);
    if (plot->parsed()) return cmd_plot(opt, out, log);
  } catch (const UsageError& e) {
    err << "scralloc: usage: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "scralloc: error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "scralloc: error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace scralloc::cli
