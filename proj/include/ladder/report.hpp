#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ladder/metrics.hpp"
#include "ladder/refine.hpp"

namespace ladder {

enum class ChangeClass { Improved, Degraded, Unchanged };

std::string_view to_string(ChangeClass cls);
ChangeClass parse_change_class(std::string_view name);

/// Improved/degraded when |refined - original| > tie_epsilon, else unchanged.
/// Every classification in this module goes through here.
ChangeClass classify_change(double original, double refined, double tie_epsilon) noexcept;

/// Mean and population standard deviation of per-segment improvements,
/// plus the improved/degraded/unchanged split.
struct DeltaStats {
  double delta_mean = 0.0;
  double delta_std = 0.0;
  std::size_t n = 0;
  double improved_frac = 0.0;
  double degraded_frac = 0.0;
  double unchanged_frac = 0.0;
  std::string metric;

  nlohmann::json to_json() const;
};

DeltaStats improvement_stats(std::span<const double> original, std::span<const double> refined,
                             double tie_epsilon = 0.0, std::string metric = {});

/// Per-record original/refined values of `metric`. Throws InvariantError
/// naming the first record missing either score.
std::pair<std::vector<double>, std::vector<double>> paired_scores(std::span<const RefinementRecord> records,
                                                                  Metric metric);

struct MetricCell {
  std::string label;  // column heading, e.g. "BLEU"
  double original = 0.0;
  double refined = 0.0;
};

/// One (model, direction) row of an original-vs-refined comparison table.
struct BreakdownRow {
  std::string model;
  std::string direction;
  std::vector<MetricCell> cells;
};

using BucketBreakdown = std::vector<BreakdownRow>;

enum class TableFormat { Text, Markdown, Csv };

TableFormat parse_table_format(std::string_view name);

/// Rows sorted by (model, direction). Deltas are signed with two decimals
/// ("+8.26") and flagged improved/degraded/unchanged. CSV keeps full
/// precision so it parses back to the same numbers.
std::string render_table(BucketBreakdown rows, TableFormat format, double tie_epsilon = 0.0);

struct ScatterRow {
  std::string id;
  double original = 0.0;
  double refined = 0.0;
  ChangeClass cls = ChangeClass::Unchanged;
};

std::vector<ScatterRow> export_scatter(std::span<const RefinementRecord> records, Metric metric,
                                       double tie_epsilon = 0.0);

/// CSV with header `id,original,refined,class`.
std::string scatter_csv(std::span<const ScatterRow> rows);
void write_scatter_csv(std::span<const ScatterRow> rows, const std::filesystem::path& path);

/// Minimal RFC 4180 reader used for round-trips of the files above.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Shortest decimal that parses back to exactly `value`.
std::string format_exact(double value);

}  // namespace ladder
