// SPDX-License-Identifier: Apache-2.0

#include "deadannot/reporting.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>

namespace deadannot {
namespace {

using std::chrono::microseconds;

// Milliseconds with three decimals; exact for whole microseconds.
std::string format_ms(microseconds us) {
  const long long v = us.count();
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%03lld", v < 0 ? "-" : "", std::llabs(v) / 1000,
                std::llabs(v) % 1000);
  return buf;
}

microseconds parse_ms(const std::string& text) {
  std::string_view s = text;
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  const std::string_view whole = s.substr(0, dot);
  std::string frac(dot == std::string_view::npos ? "" : s.substr(dot + 1));
  if (whole.empty() || frac.size() > 3) throw std::invalid_argument("bad duration '" + text + "'");
  frac.resize(3, '0');
  long long ms = 0;
  long long part = 0;
  if (std::from_chars(whole.data(), whole.data() + whole.size(), ms).ec != std::errc{} ||
      std::from_chars(frac.data(), frac.data() + 3, part).ec != std::errc{}) {
    throw std::invalid_argument("bad duration '" + text + "'");
  }
  const long long us = ms * 1000 + part;
  return microseconds(negative ? -us : us);
}

std::size_t parse_count(const std::string& text) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad count '" + text + "'");
  }
  return v;
}

std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) line += ',';
    line += csv_field(fields[i]);
  }
  return line + "\r\n";
}

// Data records of `text` after checking the header.
std::vector<std::vector<std::string>> records(const std::string& text, const char* header) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw std::invalid_argument("missing CSV header");
  std::string got;
  for (std::size_t i = 0; i < rows[0].size(); ++i) got += (i ? "," : "") + rows[0][i];
  if (got != header) throw std::invalid_argument("unexpected CSV header '" + got + "'");
  rows.erase(rows.begin());
  const std::size_t width = std::count(header, header + std::char_traits<char>::length(header), ',') + 1;
  for (const auto& r : rows) {
    if (r.size() != width) throw std::invalid_argument("CSV row has wrong field count");
  }
  return rows;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

double SummaryRow::percent_removed() const {
  if (annotations_total == 0) return 0.0;
  return 100.0 * static_cast<double>(annotations_removed) /
         static_cast<double>(annotations_total);
}

MinimizationReport build_report(const AnnotatedProgram& program,
                                const MinimizationResult& result) {
  MinimizationReport report;
  report.summary.file = program.file_name;
  report.summary.methods = program.methods.size();
  report.summary.verifier_calls = result.calls.total;

  // Attempts attributed to their owning annotation.
  std::map<const Annotation*, std::pair<std::size_t, microseconds>> attempts;
  for (const auto& attempt : result.trace) {
    if (const Annotation* a = program.find_annotation(attempt.target)) {
      auto& [calls, time] = attempts[a];
      ++calls;
      time += attempt.elapsed;
    }
  }

  for (const auto& m : program.methods) {
    for (AnnotationKind kind : whole_annotation_kinds()) {
      DetailRow row;
      row.file = program.file_name;
      row.method = m.name;
      row.kind = std::string(to_string(kind));
      for (const auto& a : m.annotations) {
        if (a.kind != kind) continue;
        ++row.total;
        const bool gone = result.edits.covers(a.span);
        row.removed += gone;
        std::vector<const SubPart*> parts;
        for (const auto& p : a.parts) {
          if (p.kind == PartKind::conjunct || p.kind == PartKind::calc_step ||
              p.kind == PartKind::calc_hint) {
            parts.push_back(&p);
          }
        }
        const bool splittable = kind == AnnotationKind::calc ? !parts.empty() : parts.size() > 1;
        if (splittable) {
          row.conjuncts_total += parts.size();
          if (!gone) {
            for (const auto* p : parts) row.conjuncts_removed += result.edits.covers(p->core);
          }
        }
        if (auto it = attempts.find(&a); it != attempts.end()) {
          row.verifier_calls += it->second.first;
          row.wall += it->second.second;
        }
      }
      if (row.total == 0) continue;
      row.remaining = row.total - row.removed;
      report.summary.annotations_total += row.total;
      report.summary.annotations_removed += row.removed;
      if (m.initially_verified) report.verified_annotations_total += row.total;
      report.detail.push_back(std::move(row));
    }
  }
  return report;
}

microseconds mean_verify_time(const AnnotatedProgram& program, Verifier& verifier,
                              const EditSet& edits, int runs) {
  if (runs <= 0) return microseconds(0);
  microseconds total(0);
  for (int i = 0; i < runs; ++i) total += verifier.verify(program, edits).elapsed;
  return total / runs;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_row = [&] {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
    row.clear();
    field.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_row();
      ++i;
    } else if (c == '\n') {
      end_row();
    } else {
      field += c;
      field_started = true;
    }
    ++i;
  }
  if (quoted) throw std::invalid_argument("unterminated quoted CSV field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::string detail_csv(const std::vector<MinimizationReport>& reports) {
  std::string out = std::string(kDetailHeader) + "\r\n";
  for (const auto& r : reports) {
    for (const auto& d : r.detail) {
      out += join({d.file, d.method, d.kind, std::to_string(d.total), std::to_string(d.removed),
                   std::to_string(d.remaining), std::to_string(d.conjuncts_total),
                   std::to_string(d.conjuncts_removed), std::to_string(d.verifier_calls),
                   format_ms(d.wall)});
    }
  }
  return out;
}

std::string summary_csv(const std::vector<MinimizationReport>& reports) {
  std::string out = std::string(kSummaryHeader) + "\r\n";
  for (const auto& r : reports) {
    const SummaryRow& s = r.summary;
    char percent[32];
    std::snprintf(percent, sizeof percent, "%.2f", s.percent_removed());
    out += join({s.file, std::to_string(s.methods), std::to_string(s.annotations_total),
                 std::to_string(s.annotations_removed), percent,
                 std::to_string(s.verifier_calls),
                 s.verify_before ? format_ms(*s.verify_before) : "",
                 s.verify_after ? format_ms(*s.verify_after) : ""});
  }
  return out;
}

std::vector<DetailRow> parse_detail_csv(const std::string& text) {
  std::vector<DetailRow> rows;
  for (const auto& f : records(text, kDetailHeader)) {
    DetailRow d;
    d.file = f[0];
    d.method = f[1];
    d.kind = f[2];
    d.total = parse_count(f[3]);
    d.removed = parse_count(f[4]);
    d.remaining = parse_count(f[5]);
    d.conjuncts_total = parse_count(f[6]);
    d.conjuncts_removed = parse_count(f[7]);
    d.verifier_calls = parse_count(f[8]);
    d.wall = parse_ms(f[9]);
    rows.push_back(std::move(d));
  }
  return rows;
}

std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::vector<SummaryRow> rows;
  for (const auto& f : records(text, kSummaryHeader)) {
    SummaryRow s;
    s.file = f[0];
    s.methods = parse_count(f[1]);
    s.annotations_total = parse_count(f[2]);
    s.annotations_removed = parse_count(f[3]);
    s.verifier_calls = parse_count(f[5]);
    if (!f[6].empty()) s.verify_before = parse_ms(f[6]);
    if (!f[7].empty()) s.verify_after = parse_ms(f[7]);
    rows.push_back(std::move(s));
  }
  return rows;
}

std::string timing_csv(const std::vector<TimingRow>& rows) {
  std::string out = std::string(kTimingHeader) + "\r\n";
  for (const auto& t : rows) {
    out += join({t.file, std::to_string(t.calls_simple), std::to_string(t.calls_combined),
                 std::to_string(t.calls_complete), format_ms(t.simple), format_ms(t.combined),
                 format_ms(t.complete), std::to_string(t.complete_skipped)});
  }
  return out;
}

std::vector<TimingRow> parse_timing_csv(const std::string& text) {
  std::vector<TimingRow> rows;
  for (const auto& f : records(text, kTimingHeader)) {
    TimingRow t;
    t.file = f[0];
    t.calls_simple = parse_count(f[1]);
    t.calls_combined = parse_count(f[2]);
    t.calls_complete = parse_count(f[3]);
    t.simple = parse_ms(f[4]);
    t.combined = parse_ms(f[5]);
    t.complete = parse_ms(f[6]);
    t.complete_skipped = parse_count(f[7]);
    rows.push_back(std::move(t));
  }
  return rows;
}

std::vector<std::filesystem::path> write_csv(const std::vector<MinimizationReport>& reports,
                                             const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  const auto summary = out_dir / "summary.csv";
  const auto detail = out_dir / "detail.csv";
  write_file(summary, summary_csv(reports));
  write_file(detail, detail_csv(reports));
  return {summary, detail};
}

}  // namespace deadannot
