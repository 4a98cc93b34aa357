#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "hine/error.hpp"
#include "hine/eval.hpp"
#include "text_util.hpp"

namespace hine {

LabelSet read_labels(const std::string& path) {
  auto in = detail::open_in(path);
  LabelSet out;
  std::unordered_map<std::string, int> class_id;
  std::unordered_map<std::string, int> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    auto cols = detail::split(detail::strip_cr(line), '\t');
    if (cols.size() != 2) throw ParseError(path, lineno, "expected `node<TAB>class_name`");
    std::string node(detail::trim(cols[0]));
    std::string cls(detail::trim(cols[1]));
    if (node.empty() || cls.empty()) throw ParseError(path, lineno, "empty node or class name");
    auto [cit, fresh] = class_id.try_emplace(cls, static_cast<int>(out.class_names.size()));
    if (fresh) out.class_names.push_back(cls);
    auto [sit, first] = seen.try_emplace(node, cit->second);
    if (!first) {
      if (sit->second != cit->second) throw ParseError(path, lineno, "node '" + node + "' has two labels");
      continue;
    }
    out.nodes.push_back(std::move(node));
    out.classes.push_back(cit->second);
  }
  if (out.nodes.empty()) throw DataError("'" + path + "': no labels");
  return out;
}

LabeledRows select_labeled(const EmbeddingSet& e, const LabelSet& labels) {
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t v = 0; v < e.size(); ++v) row_of.emplace(e.names[v], v);
  std::vector<std::pair<std::size_t, int>> picked;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = row_of.find(labels.nodes[i]);
    if (it == row_of.end()) throw LookupError("labeled node '" + labels.nodes[i] + "' has no embedding");
    picked.emplace_back(it->second, labels.classes[i]);
  }
  std::sort(picked.begin(), picked.end());
  LabeledRows out;
  for (const auto& [row, cls] : picked) {
    out.rows.push_back(row);
    out.classes.push_back(cls);
  }
  out.vectors = gather_rows(e.vectors, out.rows);
  return out;
}

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

std::string report_key_values(const EvalReport& r) {
  std::ostringstream out;
  if (r.nmi) out << "nmi = " << num(*r.nmi) << '\n';
  if (r.wcss) out << "wcss = " << num(*r.wcss) << '\n';
  if (r.macro_f1) out << "macro_f1 = " << num(*r.macro_f1) << '\n';
  if (r.micro_f1) out << "micro_f1 = " << num(*r.micro_f1) << '\n';
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    if (c < r.precision.size()) out << "precision." << r.class_names[c] << " = " << num(r.precision[c]) << '\n';
    if (c < r.recall.size()) out << "recall." << r.class_names[c] << " = " << num(r.recall[c]) << '\n';
  }
  if (r.map_cosine) out << "map_at_" << r.k << " = " << num(*r.map_cosine) << '\n';
  if (r.map_dot) out << "map_at_" << r.k << "_dot = " << num(*r.map_dot) << '\n';
  if (r.map_cosine || r.map_dot) {
    out << "ranking_queries = " << r.ranking_queries << '\n';
    out << "excluded_queries = " << r.excluded_queries << '\n';
  }
  return out.str();
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  char buf[128];
  auto row = [&](const std::string& name, const std::string& value) {
    std::snprintf(buf, sizeof buf, "  %-24s %s\n", name.c_str(), value.c_str());
    out << buf;
  };
  out << "metric                     value\n";
  if (r.nmi) row("NMI", num(*r.nmi));
  if (r.wcss) row("WCSS", num(*r.wcss));
  if (r.macro_f1) row("Macro-F1", num(*r.macro_f1));
  if (r.micro_f1) row("Micro-F1", num(*r.micro_f1));
  if (r.map_cosine) row("MAP@" + std::to_string(r.k) + " (cosine)", num(*r.map_cosine));
  if (r.map_dot) row("MAP@" + std::to_string(r.k) + " (dot)", num(*r.map_dot));
  if (r.map_cosine || r.map_dot) {
    row("ranking queries", std::to_string(r.ranking_queries));
    row("excluded queries", std::to_string(r.excluded_queries));
  }
  if (!r.precision.empty()) {
    out << "class                      precision  recall\n";
    for (std::size_t c = 0; c < r.class_names.size() && c < r.precision.size(); ++c) {
      std::snprintf(buf, sizeof buf, "  %-24s %-10s %s\n", r.class_names[c].c_str(), num(r.precision[c]).c_str(),
                    num(r.recall[c]).c_str());
      out << buf;
    }
  }
  return out.str();
}

void write_report(const EvalReport& r, const std::string& path) {
  auto out = detail::open_out(path);
  out << report_key_values(r);
  if (!out) throw DataError("write failed for '" + path + "'");
}

void write_cluster_assignments(std::span<const std::string> names, std::span<const int> assignment,
                               const std::string& path) {
  if (names.size() != assignment.size()) throw ConfigError("cluster export: names and assignment differ in size");
  auto out = detail::open_out(path);
  for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << assignment[i] << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace hine
