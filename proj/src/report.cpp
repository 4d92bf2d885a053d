#include "ladder/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ladder/error.hpp"

namespace ladder {

using nlohmann::json;

namespace {

std::string signed_2dp(double v) {
  // Keep "+0.00" for ties; printf would give "-0.00" for tiny negatives too.
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  std::string s(buf);
  if (s == "-0.00") s = "+0.00";
  return s;
}

std::string fixed_2dp(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join_row(const std::vector<std::string>& cells, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += sep;
    out += cells[i];
  }
  return out;
}

}  // namespace

std::string format_exact(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, end);
}

std::string_view to_string(ChangeClass cls) {
  switch (cls) {
    case ChangeClass::Improved: return "improved";
    case ChangeClass::Degraded: return "degraded";
    case ChangeClass::Unchanged: return "unchanged";
  }
  return "unchanged";
}

ChangeClass parse_change_class(std::string_view name) {
  if (name == "improved") return ChangeClass::Improved;
  if (name == "degraded") return ChangeClass::Degraded;
  if (name == "unchanged") return ChangeClass::Unchanged;
  throw InvariantError("unknown change class '" + std::string(name) + "'");
}

ChangeClass classify_change(double original, double refined, double tie_epsilon) noexcept {
  const double delta = refined - original;
  if (std::abs(delta) > tie_epsilon) return delta > 0 ? ChangeClass::Improved : ChangeClass::Degraded;
  return ChangeClass::Unchanged;
}

json DeltaStats::to_json() const {
  return json{{"metric", metric},
              {"n", n},
              {"delta_mean", delta_mean},
              {"delta_std", delta_std},
              {"improved_frac", improved_frac},
              {"degraded_frac", degraded_frac},
              {"unchanged_frac", unchanged_frac}};
}

DeltaStats improvement_stats(std::span<const double> original, std::span<const double> refined, double tie_epsilon,
                             std::string metric) {
  if (original.size() != refined.size()) {
    throw InvariantError("improvement_stats: " + std::to_string(original.size()) + " original vs " +
                         std::to_string(refined.size()) + " refined scores");
  }
  if (original.empty()) throw InvariantError("improvement_stats: no scores");
  if (!(tie_epsilon >= 0.0)) throw InvariantError("improvement_stats: tie_epsilon must be >= 0");

  const auto n = original.size();
  std::size_t improved = 0;
  std::size_t degraded = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += refined[i] - original[i];
    switch (classify_change(original[i], refined[i], tie_epsilon)) {
      case ChangeClass::Improved: ++improved; break;
      case ChangeClass::Degraded: ++degraded; break;
      case ChangeClass::Unchanged: break;
    }
  }
  const double dn = static_cast<double>(n);
  const double mean = sum / dn;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (refined[i] - original[i]) - mean;
    sq += d * d;
  }

  DeltaStats s;
  s.n = n;
  s.delta_mean = mean;
  s.delta_std = std::sqrt(sq / dn);
  s.improved_frac = static_cast<double>(improved) / dn;
  s.degraded_frac = static_cast<double>(degraded) / dn;
  s.unchanged_frac = static_cast<double>(n - improved - degraded) / dn;
  s.metric = std::move(metric);
  return s;
}

std::pair<std::vector<double>, std::vector<double>> paired_scores(std::span<const RefinementRecord> records,
                                                                  Metric metric) {
  if (records.empty()) throw InvariantError("no records");
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& r : records) {
    auto orig = find_score(r.intermediate_scores, metric);
    auto ref = find_score(r.refined_scores, metric);
    if (!orig || !ref) {
      throw InvariantError("record '" + r.id + "' lacks " + std::string(to_string(metric)) +
                           " scores for both the original and refined text");
    }
    out.first.push_back(orig->value);
    out.second.push_back(ref->value);
  }
  return out;
}

TableFormat parse_table_format(std::string_view name) {
  if (name == "text" || name == "txt") return TableFormat::Text;
  if (name == "markdown" || name == "md") return TableFormat::Markdown;
  if (name == "csv") return TableFormat::Csv;
  throw InvariantError("unknown table format '" + std::string(name) + "'");
}

std::string render_table(BucketBreakdown rows, TableFormat format, double tie_epsilon) {
  if (rows.empty()) throw InvariantError("render_table: no rows");
  std::vector<std::string> labels;
  for (const auto& c : rows.front().cells) labels.push_back(c.label);
  for (const auto& r : rows) {
    if (r.cells.size() != labels.size()) throw InvariantError("render_table: rows disagree on metric columns");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (r.cells[i].label != labels[i]) throw InvariantError("render_table: rows disagree on metric columns");
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const BreakdownRow& a, const BreakdownRow& b) {
    return std::tie(a.model, a.direction) < std::tie(b.model, b.direction);
  });

  std::vector<std::string> header{"model", "direction"};
  for (const auto& l : labels) {
    if (format == TableFormat::Csv) {
      header.insert(header.end(), {l + "_original", l + "_refined", l + "_delta", l + "_flag"});
    } else {
      header.insert(header.end(), {l, l + " refined", l + " delta", l + " flag"});
    }
  }

  std::vector<std::vector<std::string>> body;
  for (const auto& r : rows) {
    std::vector<std::string> line{r.model, r.direction};
    for (const auto& c : r.cells) {
      const double delta = c.refined - c.original;
      const auto flag = std::string(to_string(classify_change(c.original, c.refined, tie_epsilon)));
      if (format == TableFormat::Csv) {
        line.insert(line.end(), {format_exact(c.original), format_exact(c.refined), format_exact(delta), flag});
      } else {
        line.insert(line.end(), {fixed_2dp(c.original), fixed_2dp(c.refined), signed_2dp(delta), flag});
      }
    }
    body.push_back(std::move(line));
  }

  std::string out;
  switch (format) {
    case TableFormat::Csv: {
      auto quoted = [](const std::vector<std::string>& cells) {
        std::vector<std::string> q;
        for (const auto& c : cells) q.push_back(csv_field(c));
        return q;
      };
      out += join_row(quoted(header), ",") + "\n";
      for (const auto& line : body) out += join_row(quoted(line), ",") + "\n";
      break;
    }
    case TableFormat::Markdown: {
      out += "| " + join_row(header, " | ") + " |\n";
      std::vector<std::string> rule;
      for (std::size_t i = 0; i < header.size(); ++i) rule.push_back(i < 2 ? "---" : "---:");
      out += "| " + join_row(rule, " | ") + " |\n";
      for (const auto& line : body) out += "| " + join_row(line, " | ") + " |\n";
      break;
    }
    case TableFormat::Text: {
      std::vector<std::size_t> width(header.size());
      for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
      for (const auto& line : body) {
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
      }
      auto emit = [&](const std::vector<std::string>& cells) {
        std::string row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (i) row += "  ";
          const auto pad = std::string(width[i] - cells[i].size(), ' ');
          row += i < 2 ? cells[i] + pad : pad + cells[i];
        }
        while (!row.empty() && row.back() == ' ') row.pop_back();
        out += row + "\n";
      };
      emit(header);
      for (const auto& line : body) emit(line);
      break;
    }
  }
  return out;
}

std::vector<ScatterRow> export_scatter(std::span<const RefinementRecord> records, Metric metric, double tie_epsilon) {
  const auto [orig, refined] = paired_scores(records, metric);
  std::vector<ScatterRow> rows;
  rows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    rows.push_back(ScatterRow{records[i].id, orig[i], refined[i], classify_change(orig[i], refined[i], tie_epsilon)});
  }
  return rows;
}

std::string scatter_csv(std::span<const ScatterRow> rows) {
  std::string out = "id,original,refined,class\n";
  for (const auto& r : rows) {
    out += csv_field(r.id) + "," + format_exact(r.original) + "," + format_exact(r.refined) + "," +
           std::string(to_string(r.cls)) + "\n";
  }
  return out;
}

void write_scatter_csv(std::span<const ScatterRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << scatter_csv(rows);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ladder
