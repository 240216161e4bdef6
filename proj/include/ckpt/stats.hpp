#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ckpt {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Linear interpolation between closest ranks (rank = q * (n - 1)).
// Throws StatsError("empty_input") or on q outside [0, 1].
double percentile(std::span<const double> values, double q);

enum class CiMethod { Wilson, Exact };

std::string_view to_string(CiMethod method);
std::optional<CiMethod> ci_method_from_name(std::string_view name);

struct ProportionCI {
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  double rate = 0;
  double lo = 0;
  double hi = 0;
  CiMethod method = CiMethod::Exact;
};

inline constexpr double kZ95 = 1.96;

// Wilson score or Clopper-Pearson. The exact method uses two-sided tail mass
// 0.05 at z = 1.96 and 2 * (1 - Phi(z)) otherwise. Throws StatsError("invalid_counts").
ProportionCI binomial_ci(std::uint64_t k, std::uint64_t n, CiMethod method = CiMethod::Exact, double z = kZ95);

// Percent overhead of `atomic_ms` over `unsafe_ms`.
double overhead(double atomic_ms, double unsafe_ms);

struct PercentileSummary {
  std::string mode;
  double p50 = 0;
  double p90 = 0;
  double p99 = 0;
  std::size_t n = 0;
};

PercentileSummary summarize(std::string mode, std::span<const double> values_ms);

// Three significant digits, no exponent notation.
std::string format_sig3(double value);
std::string format_fixed(double value, int decimals);

struct ReportInputs {
  std::string bench_csv;
  std::string crash_csv;
  std::string corrupt_csv;
};

struct ReportFiles {
  std::string latency_csv, latency_txt;
  std::string crash_csv, crash_txt;
  std::string corruption_csv, corruption_txt;
  std::string latency_svg, crash_svg, corruption_svg;
  std::vector<std::string> notes;
};

class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Regenerates the latency, crash-consistency and corruption-detection tables
// (CSV + aligned text) and one bar chart per table. Missing or empty inputs
// produce a note instead of a table. Throws SchemaMismatch on wrong headers.
ReportFiles make_report(const ReportInputs& inputs, const std::string& out_dir, CiMethod method = CiMethod::Exact);

// In-memory table builders used by make_report.
struct TableData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
TableData latency_table(const std::string& bench_csv);
TableData crash_table(const std::string& crash_csv, CiMethod method);
TableData corruption_table(const std::string& corrupt_csv);
std::string render_text_table(const TableData& table);

struct TimelineRow {
  std::int64_t unix_s = 0;
  double tps = 0;
  std::uint64_t events = 0;
};

struct SamplerRow {
  std::int64_t unix_s = 0;
  double tps = 0;
};

struct TimelineResult {
  std::vector<TimelineRow> rows;
  std::vector<std::string> warnings;
  std::string csv_path;
  std::string svg_path;
  // Fraction of event seconds within +-1 s of a local tps maximum.
  double peak_alignment = 0;
};

class UnsortedInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Buckets events (unix ns) into sampler seconds. Seconds with events but no
// sample get a tps=0 row and a warning.
std::vector<TimelineRow> merge_timeline_rows(std::span<const SamplerRow> samples,
                                             std::span<const std::uint64_t> event_unix_ns,
                                             std::vector<std::string>* warnings = nullptr);
double peak_alignment(std::span<const TimelineRow> rows);

TimelineResult merge_timeline(const std::string& sampler_csv, const std::string& events_csv,
                              const std::string& out_dir);

class UnsupportedPlatform : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplerParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sums the tps column across devices for each report in `iostat -d` output.
std::vector<double> parse_iostat_reports(std::string_view text);

// Captures device transactions per second for `seconds` at `interval_ms`
// (iostat when installed, else /proc/diskstats) and writes unix_s,tps rows.
std::vector<SamplerRow> sample_disk_activity(double seconds, const std::string& out_csv, unsigned interval_ms = 1000);

}  // namespace ckpt
