#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "scralloc/aggregation.hpp"
#include "scralloc/allocation.hpp"
#include "scralloc/mc_oracle.hpp"
#include "scralloc/optimizer.hpp"
#include "scralloc/rorac.hpp"
#include "scralloc/risk_model.hpp"

namespace scralloc::io {

using Json = nlohmann::json;

// "%.12g" without locale influence; "inf", "-inf", "nan" for non-finite.
std::string format_number(double value);

// Parses JSON text; syntax errors become ParseError naming `source` and the
// line number.
Json parse_json(std::string_view text, std::string_view source = "<input>");

// Tree documents:
//   {"name": ..., "correlation": [[...], ...],
//    "macros": [{"id", "name", "correlation", "micros": [{"id", "name", "scr"}]}]}
// Correlations may be nested rows or one flat row-major array; they may be
// omitted for a single macro or micro. The result passes validate_tree
// (warnings allowed) or a ParseError / DimensionMismatch is thrown.
RiskTree tree_from_json(const Json& doc, const std::string& pointer = "");
Json tree_to_json(const RiskTree& tree);
RiskTree parse_tree(std::string_view text, std::string_view source = "<input>");

// {"income": [{"node": "macro/micro", "expected": 1.0, "stdev": 0.1}]}
IncomeStats income_from_json(const Json& doc, const std::string& pointer = "");
Json income_to_json(const IncomeStats& income);
IncomeStats parse_income(std::string_view text, std::string_view source = "<input>");

// {"scenarios": [{"id", "premiums": {lob: P}, "reinsurance": {"tags": {}, "params": {}},
//                 "tree": {...}, "income": [...]}]}
std::vector<Scenario> scenarios_from_json(const Json& doc);
Json scenarios_to_json(const std::vector<Scenario>& scenarios);
std::vector<Scenario> parse_scenarios(std::string_view text, std::string_view source = "<input>");

// {"scr_bounds": {"lower", "upper", "inclusive"}, "premium_bounds": {lob: {"lower", "upper"}},
//  "cv_cap": a, "cv_caps": {lob: a}, "reinsurance_rules": [{"id", "key", "op", "value" | "values"}]}
// Every field is optional; omitted bounds are vacuous.
ConstraintSet constraints_from_json(const Json& doc);
Json constraints_to_json(const ConstraintSet& constraints);
ConstraintSet parse_constraints(std::string_view text, std::string_view source = "<input>");

// CSV tables. Header row first, fields quoted only when needed.
std::string aggregation_csv(const AggregationOutput& agg);
std::string allocation_csv(const AllocationResult& alloc);
std::string diversification_csv(const DiversificationReport& report);
std::string rorac_csv(const RoracReport& report);
std::string mc_csv(const McEstimate& estimate);
std::string comparison_csv(const ComparisonReport& report);
std::string optimization_csv(const OptimizationReport& report);
std::string frontier_csv(const FrontierDataset& data);

Json aggregation_json(const AggregationOutput& agg);
Json allocation_json(const AllocationResult& alloc);
Json rorac_json(const RoracReport& report);
Json mc_json(const McEstimate& estimate);
Json comparison_json(const ComparisonReport& report);
Json optimization_json(const OptimizationReport& report);
Json frontier_json(const FrontierDataset& data);

std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Risk-return scatter: x = allocated SCR, y = E(RORAC), marker radius grows
// with sigma(RORAC). The total is drawn as a distinct marker.
std::string svg_scatter(const FrontierDataset& data);

struct ReportBundle {
  std::optional<AggregationOutput> aggregation;
  std::optional<AllocationResult> allocation;
  std::optional<RoracReport> rorac;
  std::optional<McEstimate> mc;
  std::optional<ComparisonReport> comparison;
  std::optional<OptimizationReport> optimization;
  std::optional<FrontierDataset> frontier;
};

// Writes <name>.csv and <name>.json for every present report (and
// frontier.svg) into `dir`, creating it if needed. Throws IoError.
std::vector<std::filesystem::path> write_reports(const ReportBundle& reports,
                                                 const std::filesystem::path& dir);
void emit_svg_scatter(const FrontierDataset& data, const std::filesystem::path& target);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace scralloc::io
