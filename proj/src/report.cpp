#include <algorithm>
#include <filesystem>
#include <map>

#include "ckpt/csv.hpp"
#include "ckpt/harness.hpp"
#include "ckpt/stats.hpp"
#include "ckpt/svg.hpp"

namespace ckpt {

namespace fs = std::filesystem;

namespace {

std::optional<CsvTable> load(const std::string& path, const CsvRow& expected, std::string_view what) {
  if (path.empty() || !fs::exists(path)) return std::nullopt;
  CsvTable t = read_csv(path);
  if (t.header.empty()) return std::nullopt;
  if (t.header != expected) {
    throw SchemaMismatch(std::string(what) + " CSV header does not match: " + csv_line(t.header));
  }
  if (t.rows.empty()) return std::nullopt;
  return t;
}

std::uint64_t to_u64(const std::string& s, std::string_view what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaMismatch("not an integer in column " + std::string(what) + ": '" + s + "'");
  }
}

bool to_bool(const std::string& s, std::string_view what) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw SchemaMismatch("not a boolean in column " + std::string(what) + ": '" + s + "'");
}

// Keys in order of first appearance.
template <typename V>
struct Ordered {
  std::vector<std::string> keys;
  std::map<std::string, V> values;
  V& operator[](const std::string& k) {
    if (!values.contains(k)) keys.push_back(k);
    return values[k];
  }
};

int mode_rank(const std::string& mode) {
  if (mode == "unsafe") return 0;
  if (mode == "atomic_nodirsync") return 1;
  if (mode == "atomic_dirsync") return 2;
  return 3;
}

std::string pct(double fraction) { return format_fixed(fraction * 100.0, 1); }

std::string family(const std::string& mode) { return mode == "unsafe" ? "unsafe" : "atomic"; }

std::string with_ext(const std::string& dir, const std::string& stem, const std::string& ext) {
  return (fs::path(dir) / (stem + ext)).generic_string();
}

void write_text(const std::string& path, const std::string& text) { svg::write_file(path, text); }

std::string csv_of(const TableData& t) {
  std::string out = csv_line(t.header);
  for (const auto& r : t.rows) out += csv_line(r);
  return out;
}

double parse_double(const std::string& s) { return s.empty() ? 0.0 : std::stod(s); }

}  // namespace

TableData latency_table(const std::string& bench_csv) {
  TableData t;
  t.header = {"mode", "p50_ms", "p90_ms", "p99_ms", "p50_ovh_pct", "p99_ovh_pct"};
  auto table = load(bench_csv, bench_header(), "bench");
  if (!table) return t;
  Ordered<std::vector<double>> by_mode;
  const std::size_t mode_col = table->column("mode");
  const std::size_t lat_col = table->column("latency_ns");
  for (const auto& row : table->rows) {
    by_mode[row[mode_col]].push_back(static_cast<double>(to_u64(row[lat_col], "latency_ns")) / 1e6);
  }
  std::vector<std::string> modes = by_mode.keys;
  std::stable_sort(modes.begin(), modes.end(),
                   [](const std::string& a, const std::string& b) { return mode_rank(a) < mode_rank(b); });
  std::optional<PercentileSummary> base;
  if (by_mode.values.contains("unsafe")) base = summarize("unsafe", by_mode.values["unsafe"]);
  for (const auto& mode : modes) {
    const PercentileSummary s = summarize(mode, by_mode.values[mode]);
    std::string o50;
    std::string o99;
    if (base) {
      o50 = format_fixed(overhead(s.p50, base->p50), 1);
      o99 = format_fixed(overhead(s.p99, base->p99), 1);
    }
    t.rows.push_back({mode, format_sig3(s.p50), format_sig3(s.p90), format_sig3(s.p99), o50, o99});
  }
  return t;
}

TableData crash_table(const std::string& crash_csv, CiMethod method) {
  TableData t;
  t.header = {"condition", "ok", "total", "ok_rate_pct", "ci_lo_pct", "ci_hi_pct"};
  auto table = load(crash_csv, crash_header(), "crash");
  if (!table) return t;
  Ordered<std::pair<std::uint64_t, std::uint64_t>> by_cond;
  const std::size_t mode_col = table->column("mode");
  const std::size_t point_col = table->column("crash_point");
  const std::size_t ok_col = table->column("ok");
  for (const auto& row : table->rows) {
    auto& [ok, total] = by_cond[family(row[mode_col]) + "@" + row[point_col]];
    ok += to_bool(row[ok_col], "ok") ? 1 : 0;
    ++total;
  }
  for (const auto& cond : by_cond.keys) {
    const auto [ok, total] = by_cond.values[cond];
    const ProportionCI ci = binomial_ci(ok, total, method);
    t.rows.push_back({cond, std::to_string(ok), std::to_string(total), pct(ci.rate), pct(ci.lo), pct(ci.hi)});
  }
  return t;
}

TableData corruption_table(const std::string& corrupt_csv) {
  TableData t;
  t.header = {"fault", "total", "detected", "rate_pct", "mech_load", "mech_digest", "mech_file_sha"};
  auto table = load(corrupt_csv, corrupt_header(), "corrupt");
  if (!table) return t;
  struct Counts {
    std::uint64_t total = 0, detected = 0, load = 0, digest = 0, file_sha = 0;
  };
  Ordered<Counts> by_fault;
  const std::size_t fault_col = table->column("fault");
  const std::size_t det_col = table->column("detected");
  const std::size_t l_col = table->column("mech_load");
  const std::size_t d_col = table->column("mech_digest");
  const std::size_t f_col = table->column("mech_file_sha");
  for (const auto& row : table->rows) {
    Counts& c = by_fault[row[fault_col]];
    ++c.total;
    c.detected += to_bool(row[det_col], "detected");
    c.load += to_bool(row[l_col], "mech_load");
    c.digest += to_bool(row[d_col], "mech_digest");
    c.file_sha += to_bool(row[f_col], "mech_file_sha");
  }
  for (const auto& fault : by_fault.keys) {
    const Counts& c = by_fault.values[fault];
    t.rows.push_back({fault, std::to_string(c.total), std::to_string(c.detected),
                      pct(static_cast<double>(c.detected) / static_cast<double>(c.total)), std::to_string(c.load),
                      std::to_string(c.digest), std::to_string(c.file_sha)});
  }
  return t;
}

std::string render_text_table(const TableData& table) {
  std::vector<std::size_t> width(table.header.size(), 0);
  for (std::size_t i = 0; i < table.header.size(); ++i) width[i] = table.header[i].size();
  for (const auto& r : table.rows) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      const std::string pad(width[i] - c.size(), ' ');
      s += i == 0 ? c + pad : pad + c;
      if (i + 1 < cells.size()) s += "  ";
    }
    return s + "\n";
  };
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  std::string out = line(table.header);
  out += std::string(total > 2 ? total - 2 : 0, '-') + "\n";
  for (const auto& r : table.rows) out += line(r);
  return out;
}

ReportFiles make_report(const ReportInputs& inputs, const std::string& out_dir, CiMethod method) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir + ": " + ec.message());

  ReportFiles files;
  std::string combined;
  const std::string ci_note = method == CiMethod::Exact
                                  ? "95% CI: exact (Clopper-Pearson). Wilson bounds are available with --ci-method wilson."
                                  : "95% CI: Wilson score, z = 1.96. Exact bounds are available with --ci-method exact.";

  const TableData latency = latency_table(inputs.bench_csv);
  if (latency.rows.empty()) {
    files.notes.push_back("no benchmark runs");
  } else {
    files.latency_csv = with_ext(out_dir, "latency", ".csv");
    files.latency_txt = with_ext(out_dir, "latency", ".txt");
    const std::string text = "Group checkpoint latency (ms) and overhead vs unsafe\n\n" + render_text_table(latency);
    write_text(files.latency_csv, csv_of(latency));
    write_text(files.latency_txt, text);
    combined += text + "\n";

    svg::BarChart chart;
    chart.title = "Group checkpoint latency percentiles";
    chart.y_label = "latency (ms)";
    svg::Series p50{"p50", {}, {}, {}}, p90{"p90", {}, {}, {}}, p99{"p99", {}, {}, {}};
    for (const auto& r : latency.rows) {
      chart.categories.push_back(r[0]);
      p50.values.push_back(parse_double(r[1]));
      p90.values.push_back(parse_double(r[2]));
      p99.values.push_back(parse_double(r[3]));
    }
    chart.series = {p50, p90, p99};
    files.latency_svg = with_ext(out_dir, "latency_bars", ".svg");
    svg::write_file(files.latency_svg, svg::render(chart));
  }

  const TableData crash = crash_table(inputs.crash_csv, method);
  if (crash.rows.empty()) {
    files.notes.push_back("no crash trials");
  } else {
    files.crash_csv = with_ext(out_dir, "crash", ".csv");
    files.crash_txt = with_ext(out_dir, "crash", ".txt");
    const std::string text = "Group atomicity under crash injection\n\n" + render_text_table(crash) + ci_note + "\n";
    write_text(files.crash_csv, csv_of(crash));
    write_text(files.crash_txt, text);
    combined += text + "\n";

    svg::BarChart chart;
    chart.title = "Groups usable after crash (95% CI)";
    chart.y_label = "OK rate (%)";
    chart.y_max = 100;
    svg::Series s{"ok rate", {}, {}, {}};
    for (const auto& r : crash.rows) {
      chart.categories.push_back(r[0]);
      s.values.push_back(parse_double(r[3]));
      s.err_lo.push_back(parse_double(r[4]));
      s.err_hi.push_back(parse_double(r[5]));
    }
    chart.series = {s};
    files.crash_svg = with_ext(out_dir, "crash_bars", ".svg");
    svg::write_file(files.crash_svg, svg::render(chart));
  }

  const TableData corruption = corruption_table(inputs.corrupt_csv);
  if (corruption.rows.empty()) {
    files.notes.push_back("no corruption trials");
  } else {
    files.corruption_csv = with_ext(out_dir, "corruption", ".csv");
    files.corruption_txt = with_ext(out_dir, "corruption", ".txt");
    const std::string text =
        "Corruption detection by fault type (atomic writes)\n\n" + render_text_table(corruption) +
        "Mechanism columns count trials in which each layer fired; layers overlap.\n";
    write_text(files.corruption_csv, csv_of(corruption));
    write_text(files.corruption_txt, text);
    combined += text + "\n";

    svg::BarChart chart;
    chart.title = "Corruption detection rate (95% CI)";
    chart.y_label = "detected (%)";
    chart.y_max = 100;
    svg::Series s{"detected", {}, {}, {}};
    for (const auto& r : corruption.rows) {
      const auto total = to_u64(r[1], "total");
      const auto detected = to_u64(r[2], "detected");
      const ProportionCI ci = binomial_ci(detected, total, method);
      chart.categories.push_back(r[0]);
      s.values.push_back(ci.rate * 100);
      s.err_lo.push_back(ci.lo * 100);
      s.err_hi.push_back(ci.hi * 100);
    }
    chart.series = {s};
    files.corruption_svg = with_ext(out_dir, "corruption_bars", ".svg");
    svg::write_file(files.corruption_svg, svg::render(chart));
  }

  for (const auto& n : files.notes) combined += "note: " + n + "\n";
  write_text(with_ext(out_dir, "report", ".txt"), combined);
  return files;
}

}  // namespace ckpt
