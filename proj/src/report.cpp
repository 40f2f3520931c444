// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qselect/harness.hpp"

namespace qselect {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

RowGroup parse_row_group(std::string_view s) {
  if (s == "baseline") return RowGroup::baseline;
  if (s == "method") return RowGroup::method;
  if (s == "ensemble") return RowGroup::ensemble;
  throw FormatError("unknown row group '" + std::string(s) + "'");
}

std::size_t parse_count(const std::string& s) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw FormatError("bad count '" + s + "'");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw FormatError("bad count '" + s + "'");
  }
}

double parse_real(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw FormatError("bad value '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError("bad value '" + s + "'");
  }
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
  if (!out.flush()) throw Error("write failed: " + path.string());
}

constexpr std::string_view kCsvFixed[] = {"row", "label", "group", "items", "ties", "no_eligible"};

}  // namespace

const ResultRow& ResultTable::row(std::string_view key) const {
  for (const auto& r : rows) {
    if (r.key == key) return r;
  }
  throw InvalidArgument("no result row '" + std::string(key) + "'");
}

std::size_t ResultTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  throw InvalidArgument("no result column '" + std::string(name) + "'");
}

std::vector<std::string> ResultTable::tautology_violations(double tolerance) const {
  std::vector<std::string> out;
  const ResultRow& lo = row(kRowLowerbound);
  const ResultRow& hi = row(kRowUpperbound);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!columns[c].per_item_mean) continue;
    for (const auto& r : rows) {
      if (r.key == kRowGreedy || r.key == kRowLowerbound || r.key == kRowUpperbound) continue;
      const double v = r.values[c];
      if (v < lo.values[c] - tolerance) {
        out.push_back(columns[c].name + ": " + r.key + " " + fixed(v, 12) + " below lowerbound " +
                      fixed(lo.values[c], 12));
      }
      if (v > hi.values[c] + tolerance) {
        out.push_back(columns[c].name + ": " + r.key + " " + fixed(v, 12) + " above upperbound " +
                      fixed(hi.values[c], 12));
      }
    }
  }
  return out;
}

nlohmann::json ResultTable::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) cols.push_back({{"name", c.name}, {"per_item_mean", c.per_item_mean}});
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) {
    rs.push_back({{"key", r.key},
                  {"label", r.label},
                  {"group", std::string(to_string(r.group))},
                  {"values", r.values},
                  {"items", r.items},
                  {"ties", r.ties},
                  {"no_eligible", r.no_eligible}});
  }
  return {{"columns", cols}, {"rows", rs}, {"items", items}, {"failures", qselect::to_json(failures)}};
}

ResultTable ResultTable::from_json(const nlohmann::json& j) {
  ResultTable t;
  try {
    for (const auto& c : j.at("columns")) {
      t.columns.push_back({c.at("name").get<std::string>(), c.value("per_item_mean", true)});
    }
    for (const auto& r : j.at("rows")) {
      ResultRow row;
      row.key = r.at("key").get<std::string>();
      row.label = r.value("label", row.key);
      row.group = parse_row_group(r.at("group").get<std::string>());
      row.values = r.at("values").get<std::vector<double>>();
      if (row.values.size() != t.columns.size()) throw FormatError("row " + row.key + " has the wrong column count");
      row.items = r.value("items", std::size_t{0});
      row.ties = r.value("ties", std::size_t{0});
      row.no_eligible = r.value("no_eligible", std::size_t{0});
      t.rows.push_back(std::move(row));
    }
    t.items = j.value("items", std::size_t{0});
    if (j.contains("failures")) t.failures = failure_stats_from_json(j["failures"]);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad result table: ") + e.what());
  }
  return t;
}

std::string render_csv(const ResultTable& table) {
  std::string out;
  for (std::string_view h : kCsvFixed) {
    if (!out.empty()) out += ',';
    out += h;
  }
  for (const auto& c : table.columns) out += ',' + csv_field(c.name);
  out += '\n';
  for (const auto& r : table.rows) {
    out += csv_field(r.key) + ',' + csv_field(r.label) + ',' + std::string(to_string(r.group)) + ',' +
           std::to_string(r.items) + ',' + std::to_string(r.ties) + ',' + std::to_string(r.no_eligible);
    for (double v : r.values) out += ',' + fixed(v, 9);
    out += '\n';
  }
  return out;
}

ResultTable parse_csv(std::string_view csv) {
  const auto records = parse_delimited(csv, ',');
  if (records.empty()) throw FormatError("empty results CSV");
  const auto& header = records.front();
  constexpr std::size_t fixed_cols = std::size(kCsvFixed);
  if (header.size() < fixed_cols || !std::equal(std::begin(kCsvFixed), std::end(kCsvFixed), header.begin())) {
    throw FormatError("results CSV has an unexpected header");
  }
  ResultTable t;
  for (std::size_t i = fixed_cols; i < header.size(); ++i) {
    t.columns.push_back({header[i], header[i].find("(corpus)") == std::string::npos});
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != header.size()) throw FormatError("results CSV row " + std::to_string(r) + " has wrong width");
    ResultRow row;
    row.key = rec[0];
    row.label = rec[1];
    row.group = parse_row_group(rec[2]);
    row.items = parse_count(rec[3]);
    row.ties = parse_count(rec[4]);
    row.no_eligible = parse_count(rec[5]);
    for (std::size_t i = fixed_cols; i < rec.size(); ++i) row.values.push_back(parse_real(rec[i]));
    t.items = std::max(t.items, row.items);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string render_text(const ResultTable& table) {
  std::size_t label_w = std::string_view("method").size();
  for (const auto& r : table.rows) label_w = std::max(label_w, r.label.size() + 2);
  std::vector<std::size_t> col_w;
  for (const auto& c : table.columns) col_w.push_back(std::max<std::size_t>(c.name.size(), 8));

  auto pad_right = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto pad_left = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };

  std::ostringstream out;
  out << "Reference-based evaluation over " << table.items << " item" << (table.items == 1 ? "" : "s") << "\n\n";
  std::string header = pad_right("method", label_w);
  for (std::size_t c = 0; c < table.columns.size(); ++c) header += "  " + pad_left(table.columns[c].name, col_w[c]);
  out << header << "\n" << std::string(header.size(), '=') << "\n";

  bool first = true;
  std::optional<RowGroup> group;
  for (const auto& r : table.rows) {
    if (!group || *group != r.group) {
      if (!first) out << std::string(header.size(), '-') << "\n";
      switch (r.group) {
        case RowGroup::baseline:
          out << "baselines\n";
          break;
        case RowGroup::method:
          out << "question selection\n";
          break;
        case RowGroup::ensemble:
          out << "ensembles\n";
          break;
      }
      group = r.group;
    }
    first = false;
    std::string line = pad_right("  " + r.label, label_w);
    for (std::size_t c = 0; c < r.values.size(); ++c) line += "  " + pad_left(fixed(r.values[c], 4), col_w[c]);
    if (r.ties > 0 || r.no_eligible > 0) {
      line += "  (ties " + std::to_string(r.ties);
      if (r.no_eligible > 0) line += ", no eligible " + std::to_string(r.no_eligible);
      line += ")";
    }
    out << line << "\n";
  }

  const FailureStats& f = table.failures;
  out << "\nflagged: " << f.total() << " (empty generations " << f.empty_generations << ", sampling backend "
      << f.sampling_backend_failures << ", round-trip " << f.roundtrip_failures << ", meta parse " << f.parse_failures
      << ", meta backend " << f.prompt_backend_failures << ")\n";
  return out.str();
}

void emit_report(const ResultTable& table, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "results.csv", render_csv(table));
  write_file(out_dir / "results.txt", render_text(table));
  write_file(out_dir / "results.json", table.to_json().dump(2) + "\n");
}

}  // namespace qselect
