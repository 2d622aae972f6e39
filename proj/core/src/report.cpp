#include "fscil/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "fscil/error.hpp"
#include "fscil/svg.hpp"

namespace fscil {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

int max_sessions(const std::vector<ExperimentRecord>& records) {
  std::size_t n = 0;
  for (const auto& r : records) n = std::max(n, r.sessions.size());
  return static_cast<int>(n);
}

std::optional<double> accuracy_at(const ExperimentRecord& r, int t) {
  if (t < static_cast<int>(r.sessions.size())) return r.sessions[static_cast<std::size_t>(t)].result.total_accuracy;
  return std::nullopt;
}

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

void require_records(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) fail(ErrorCode::usage, "report needs at least one run");
  for (const auto& r : records)
    if (r.sessions.empty()) fail(ErrorCode::schema_mismatch, "run " + r.run_id + " has no sessions");
}

void write_text(const fs::path& path, const std::string& text, std::vector<fs::path>& written) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << text;
  written.push_back(path);
}

std::vector<double> inter_values(const GeometryReport& g) {
  std::vector<double> v;
  for (const auto& e : g.inter_class) v.push_back(e.distance);
  return v;
}

std::vector<double> intra_values(const GeometryReport& g) {
  std::vector<double> v;
  for (const auto& [c, d] : g.intra_class) v.push_back(d);
  return v;
}

json cdf_json(const std::vector<CdfPoint>& cdf) {
  json pts = json::array();
  for (const auto& p : cdf) pts.push_back({p.threshold, p.probability});
  return pts;
}

}  // namespace

std::string sources_footer(const std::vector<ExperimentRecord>& records) {
  std::string out = "source runs:";
  for (const auto& r : records) out += " " + r.run_id;
  return out;
}

std::string accuracy_table_markdown(const std::vector<ExperimentRecord>& records) {
  require_records(records);
  std::ostringstream out;
  out << "| session |";
  for (const auto& r : records) out << ' ' << r.run_id << " |";
  for (std::size_t i = 1; i < records.size(); ++i) out << " delta " << records[i].run_id << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < 2 * records.size() - 1; ++i) out << "---|";
  out << '\n';
  for (int t = 0; t < max_sessions(records); ++t) {
    out << "| " << t << " |";
    for (const auto& r : records) out << ' ' << cell(accuracy_at(r, t)) << " |";
    const auto first = accuracy_at(records.front(), t);
    for (std::size_t i = 1; i < records.size(); ++i) {
      const auto v = accuracy_at(records[i], t);
      out << ' ' << (v && first ? format_number(*v - *first) : "") << " |";
    }
    out << '\n';
  }
  out << "\n" << sources_footer(records) << '\n';
  return out.str();
}

std::string accuracy_table_csv(const std::vector<ExperimentRecord>& records) {
  require_records(records);
  std::ostringstream out;
  out << "session";
  for (const auto& r : records) out << ',' << r.run_id;
  for (std::size_t i = 1; i < records.size(); ++i) out << ",delta_" << records[i].run_id;
  out << '\n';
  for (int t = 0; t < max_sessions(records); ++t) {
    out << t;
    for (const auto& r : records) out << ',' << cell(accuracy_at(r, t));
    const auto first = accuracy_at(records.front(), t);
    for (std::size_t i = 1; i < records.size(); ++i) {
      const auto v = accuracy_at(records[i], t);
      out << ',' << (v && first ? format_number(*v - *first) : "");
    }
    out << '\n';
  }
  out << "# " << sources_footer(records) << '\n';
  return out.str();
}

std::string final_accuracy_markdown(const std::vector<ExperimentRecord>& records) {
  require_records(records);
  std::ostringstream out;
  out << "| run | sessions | final accuracy | delta |\n|---|---|---|---|\n";
  const double first = records.front().final_accuracy();
  for (const auto& r : records)
    out << "| " << r.run_id << " | " << r.sessions.size() << " | " << format_number(r.final_accuracy()) << " | "
        << format_number(r.final_accuracy() - first) << " |\n";
  out << "\n" << sources_footer(records) << '\n';
  return out.str();
}

std::vector<fs::path> write_report(const std::vector<ExperimentRecord>& records, const fs::path& out_dir) {
  require_records(records);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  const std::string footer = sources_footer(records);

  write_text(out_dir / "accuracy.md", accuracy_table_markdown(records) + "\n" + final_accuracy_markdown(records),
             written);
  write_text(out_dir / "accuracy.csv", accuracy_table_csv(records), written);

  // Accuracy over sessions.
  {
    std::vector<svg::Series> series;
    json data = {{"sources", json::array()}, {"series", json::array()}};
    for (const auto& r : records) {
      svg::Series s{r.run_id, {}, {}};
      for (const auto& sess : r.sessions) {
        s.x.push_back(sess.result.session_index);
        s.y.push_back(sess.result.total_accuracy);
      }
      data["sources"].push_back(r.run_id);
      data["series"].push_back({{"run_id", r.run_id}, {"session", s.x}, {"accuracy", s.y}});
      series.push_back(std::move(s));
    }
    svg::ChartOptions o{"Accuracy over sessions", "session", "accuracy", footer, 0.0, 1.0, false};
    write_text(out_dir / "accuracy.svg", svg::line_chart(series, o), written);
    write_text(out_dir / "accuracy.json", data.dump(2) + "\n", written);
  }

  // Distance CDFs at the final session.
  for (const char* which : {"inter", "intra"}) {
    const bool inter = std::string(which) == "inter";
    std::vector<svg::Series> series;
    json data = {{"sources", json::array()}, {"series", json::array()}};
    for (const auto& r : records) {
      const auto& g = r.sessions.back().geometry;
      const auto values = inter ? inter_values(g) : intra_values(g);
      if (values.empty()) continue;
      const auto cdf = cumulative_distance_distribution(values);
      svg::Series s{r.run_id, {}, {}};
      for (const auto& p : cdf) {
        s.x.push_back(p.threshold);
        s.y.push_back(p.probability);
      }
      data["sources"].push_back(r.run_id);
      data["series"].push_back({{"run_id", r.run_id}, {"distances", values}, {"cdf", cdf_json(cdf)}});
      series.push_back(std::move(s));
    }
    svg::ChartOptions o{std::string(inter ? "Inter-class" : "Intra-class") + " distance CDF", "distance",
                        "cumulative probability", footer, 0.0, 1.0, true};
    write_text(out_dir / (std::string("cdf_") + which + ".svg"), svg::line_chart(series, o), written);
    write_text(out_dir / (std::string("cdf_") + which + ".json"), data.dump(2) + "\n", written);
  }

  // Class separation at the final session.
  {
    const std::vector<std::string> categories{"all", "base", "novel"};
    std::vector<svg::Series> series;
    json data = {{"sources", json::array()}, {"bars", json::array()}};
    for (const auto& r : records) {
      const auto& g = r.sessions.back().geometry;
      auto opt = [](const std::optional<double>& v) { return v ? *v : std::nan(""); };
      svg::Series s{r.run_id, {0, 1, 2}, {g.separation, opt(g.separation_base), opt(g.separation_novel)}};
      data["sources"].push_back(r.run_id);
      data["bars"].push_back({{"run_id", r.run_id},
                              {"separation", g.separation},
                              {"separation_base", g.separation_base ? json(*g.separation_base) : json(nullptr)},
                              {"separation_novel", g.separation_novel ? json(*g.separation_novel) : json(nullptr)}});
      series.push_back(std::move(s));
    }
    svg::ChartOptions o{"Class separation (final session)", "", "separation degree", footer, std::nullopt, 1.0,
                        false};
    write_text(out_dir / "separation.svg", svg::bar_chart(categories, series, o), written);
    write_text(out_dir / "separation.json", data.dump(2) + "\n", written);
  }

  // Confusion matrices at the final session.
  std::set<std::string> used;
  for (const auto& r : records) {
    std::string stem = "confusion_" + r.run_id;
    for (int k = 1; used.count(stem); ++k) stem = "confusion_" + r.run_id + "_" + std::to_string(k);
    used.insert(stem);
    const auto& res = r.sessions.back().result;
    std::vector<std::vector<double>> values;
    for (const auto& row : res.confusion) values.emplace_back(row.begin(), row.end());
    std::vector<std::string> labels;
    for (int c : res.class_order) labels.push_back(std::to_string(c));
    svg::ChartOptions o{"Confusion, session " + std::to_string(res.session_index) + " (" + r.run_id + ")",
                        "predicted", "true", "source runs: " + r.run_id, std::nullopt, std::nullopt, false};
    write_text(out_dir / (stem + ".svg"), svg::heatmap(values, labels, o), written);
    const json data = {{"sources", {r.run_id}},
                       {"session", res.session_index},
                       {"class_order", res.class_order},
                       {"confusion", res.confusion}};
    write_text(out_dir / (stem + ".json"), data.dump(2) + "\n", written);
  }
  return written;
}

std::vector<SweepCell> rank_sweep(std::vector<SweepCell> cells) {
  std::stable_sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
    if (a.final_accuracy.has_value() != b.final_accuracy.has_value()) return a.final_accuracy.has_value();
    return a.final_accuracy && *a.final_accuracy > *b.final_accuracy;
  });
  return cells;
}

std::string sweep_summary_markdown(const std::vector<SweepCell>& ranked) {
  std::ostringstream out;
  out << "| rank | cell | final accuracy | status | run |\n|---|---|---|---|---|\n";
  std::string sources = "source runs:";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& c = ranked[i];
    out << "| " << i + 1 << " | `" << c.assignment.dump() << "` | "
        << (c.final_accuracy ? format_number(*c.final_accuracy) : "") << " | " << c.status << " | " << c.run_id
        << " |\n";
    sources += " " + c.run_id;
  }
  out << "\n" << sources << '\n';
  return out.str();
}

json sweep_summary_json(const std::vector<SweepCell>& ranked) {
  json cells = json::array();
  json sources = json::array();
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& c = ranked[i];
    cells.push_back({{"rank", i + 1},
                     {"assignment", c.assignment},
                     {"final_accuracy", c.final_accuracy ? json(*c.final_accuracy) : json(nullptr)},
                     {"status", c.status},
                     {"run_id", c.run_id}});
    sources.push_back(c.run_id);
  }
  return {{"cells", cells}, {"sources", sources}};
}

namespace {

const AblationRow* all_on_row(const std::vector<AblationRow>& rows) {
  for (const auto& r : rows)
    if (r.cell.toggles.stability() && r.cell.toggles.adaptability() && r.cell.toggles.training()) return &r;
  return nullptr;
}

std::string mark(bool on) { return on ? "x" : ""; }

}  // namespace

std::string ablation_table_markdown(const std::vector<AblationRow>& rows) {
  const AblationRow* top = all_on_row(rows);
  std::ostringstream out;
  out << "| stability | adaptability | training | final accuracy (mean) | per seed | delta vs all-on |\n"
      << "|---|---|---|---|---|---|\n";
  std::string sources = "source runs:";
  for (const auto& r : rows) {
    const auto& t = r.cell.toggles;
    out << "| " << mark(t.stability()) << " | " << mark(t.adaptability()) << " | " << mark(t.training()) << " | "
        << format_number(r.cell.mean_final_accuracy()) << " | ";
    for (std::size_t i = 0; i < r.cell.final_accuracy.size(); ++i)
      out << (i ? " " : "") << format_number(r.cell.final_accuracy[i]);
    out << " | "
        << (top ? format_number(r.cell.mean_final_accuracy() - top->cell.mean_final_accuracy()) : std::string())
        << " |\n";
    for (const auto& id : r.run_ids) sources += " " + id;
  }
  out << "\n" << sources << '\n';
  return out.str();
}

json ablation_table_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    const auto& t = r.cell.toggles;
    out.push_back({{"stability", t.stability()},
                   {"adaptability", t.adaptability()},
                   {"training", t.training()},
                   {"label", t.label()},
                   {"seeds", r.cell.seeds},
                   {"final_accuracy", r.cell.final_accuracy},
                   {"final_base_accuracy", r.cell.final_base_accuracy},
                   {"final_novel_accuracy", r.cell.final_novel_accuracy},
                   {"mean_final_accuracy", r.cell.mean_final_accuracy()},
                   {"run_ids", r.run_ids}});
  }
  return {{"rows", out}};
}

}  // namespace fscil
