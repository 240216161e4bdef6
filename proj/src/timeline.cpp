#include <unistd.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "ckpt/csv.hpp"
#include "ckpt/harness.hpp"
#include "ckpt/stats.hpp"
#include "ckpt/svg.hpp"

namespace ckpt {

namespace fs = std::filesystem;

namespace {

inline constexpr std::int64_t kNsPerSecond = 1'000'000'000;

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::int64_t unix_seconds_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::vector<std::string> tokens(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream ss{std::string(line)};
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

struct DiskCounters {
  std::uint64_t ios = 0;
};

// Whole-disk devices only (partitions would double count); loop and ram devices skipped.
DiskCounters read_diskstats() {
  std::ifstream in("/proc/diskstats");
  if (!in) throw UnsupportedPlatform("unsupported_platform: no iostat and no /proc/diskstats");
  DiskCounters c;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = tokens(line);
    if (t.size() < 8) throw SamplerParseError("parse_error: short /proc/diskstats line");
    const std::string& name = t[2];
    if (name.rfind("loop", 0) == 0 || name.rfind("ram", 0) == 0) continue;
    if (!fs::exists("/sys/block/" + name)) continue;
    try {
      c.ios += std::stoull(t[3]) + std::stoull(t[7]);
    } catch (const std::exception&) {
      throw SamplerParseError("parse_error: bad counter in /proc/diskstats");
    }
  }
  return c;
}

std::optional<std::string> find_iostat() {
  const char* path = std::getenv("PATH");
  if (!path) return std::nullopt;
  std::string_view p(path);
  while (!p.empty()) {
    const auto pos = p.find(':');
    const std::string dir(p.substr(0, pos));
    const std::string candidate = (fs::path(dir.empty() ? "." : dir) / "iostat").string();
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    if (pos == std::string_view::npos) break;
    p.remove_prefix(pos + 1);
  }
  return std::nullopt;
}

}  // namespace

std::vector<TimelineRow> merge_timeline_rows(std::span<const SamplerRow> samples,
                                             std::span<const std::uint64_t> event_unix_ns,
                                             std::vector<std::string>* warnings) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].unix_s < samples[i - 1].unix_s) throw UnsortedInput("unsorted_input: sampler timestamps decrease");
  }
  for (std::size_t i = 1; i < event_unix_ns.size(); ++i) {
    if (event_unix_ns[i] < event_unix_ns[i - 1]) throw UnsortedInput("unsorted_input: event timestamps decrease");
  }
  std::map<std::int64_t, TimelineRow> rows;
  for (const auto& s : samples) {
    auto& r = rows[s.unix_s];
    r.unix_s = s.unix_s;
    r.tps += s.tps;
  }
  for (std::uint64_t ns : event_unix_ns) {
    const auto sec = static_cast<std::int64_t>(ns / kNsPerSecond);
    auto it = rows.find(sec);
    if (it == rows.end()) {
      if (warnings) warnings->push_back("event at " + std::to_string(sec) + " s has no sampler row; tps set to 0");
      it = rows.emplace(sec, TimelineRow{sec, 0.0, 0}).first;
    }
    ++it->second.events;
  }
  std::vector<TimelineRow> out;
  out.reserve(rows.size());
  for (auto& [sec, r] : rows) out.push_back(r);
  return out;
}

double peak_alignment(std::span<const TimelineRow> rows) {
  std::uint64_t event_seconds = 0;
  std::uint64_t aligned = 0;
  auto is_peak = [&](std::size_t j) {
    if (rows[j].tps <= 0) return false;
    const bool left = j == 0 || rows[j].tps >= rows[j - 1].tps;
    const bool right = j + 1 == rows.size() || rows[j].tps >= rows[j + 1].tps;
    return left && right;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].events == 0) continue;
    ++event_seconds;
    bool hit = false;
    for (std::size_t j = i == 0 ? 0 : i - 1; j <= i + 1 && j < rows.size(); ++j) {
      if (std::llabs(rows[j].unix_s - rows[i].unix_s) <= 1 && is_peak(j)) hit = true;
    }
    aligned += hit;
  }
  return event_seconds == 0 ? 0.0 : static_cast<double>(aligned) / static_cast<double>(event_seconds);
}

TimelineResult merge_timeline(const std::string& sampler_csv, const std::string& events_csv, const std::string& out_dir) {
  const CsvTable sampler = read_csv(sampler_csv);
  if (sampler.header != CsvRow{"unix_s", "tps"}) throw SchemaMismatch("sampler CSV header must be unix_s,tps");
  std::vector<SamplerRow> samples;
  for (const auto& r : sampler.rows) {
    try {
      const double tps = std::stod(r[1]);
      if (tps < 0) throw SchemaMismatch("negative tps in sampler CSV");
      samples.push_back(SamplerRow{std::stoll(r[0]), tps});
    } catch (const SchemaMismatch&) {
      throw;
    } catch (const std::exception&) {
      throw SchemaMismatch("bad sampler row: " + csv_line(r));
    }
  }
  const CsvTable events = read_csv(events_csv);
  if (events.header != events_header()) throw SchemaMismatch("events CSV header must be unix_ns,event,group_path");
  std::vector<std::uint64_t> event_ns;
  for (const auto& r : events.rows) {
    try {
      event_ns.push_back(std::stoull(r[0]));
    } catch (const std::exception&) {
      throw SchemaMismatch("bad event row: " + csv_line(r));
    }
  }

  TimelineResult result;
  result.rows = merge_timeline_rows(samples, event_ns, &result.warnings);
  result.peak_alignment = peak_alignment(result.rows);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  result.csv_path = (fs::path(out_dir) / "timeline.csv").generic_string();
  result.svg_path = (fs::path(out_dir) / "timeline.svg").generic_string();
  {
    CsvWriter out(result.csv_path, {"unix_s", "tps", "events"});
    for (const auto& r : result.rows) out.write({std::to_string(r.unix_s), shortest(r.tps), std::to_string(r.events)});
  }
  svg::LinePlot plot;
  plot.title = "Disk transactions per second vs checkpoint events";
  plot.x_label = "time (s)";
  plot.y_label = "tps";
  for (const auto& r : result.rows) {
    plot.x.push_back(static_cast<double>(r.unix_s));
    plot.y.push_back(r.tps);
    if (r.events > 0) plot.markers.push_back(static_cast<double>(r.unix_s));
  }
  svg::write_file(result.svg_path, svg::render(plot));
  return result;
}

std::vector<double> parse_iostat_reports(std::string_view text) {
  std::vector<double> reports;
  std::optional<std::size_t> tps_col;
  std::optional<double> current;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto t = tokens(line);
    if (t.empty()) {
      if (current) reports.push_back(*current);
      current.reset();
      tps_col.reset();
      continue;
    }
    if (t[0].rfind("Device", 0) == 0 || t[0] == "disk0") {
      const auto it = std::find(t.begin(), t.end(), "tps");
      if (it == t.end()) throw SamplerParseError("parse_error: iostat header without tps column");
      tps_col = static_cast<std::size_t>(it - t.begin());
      current = 0.0;
      continue;
    }
    if (!tps_col) continue;
    if (t.size() <= *tps_col) throw SamplerParseError("parse_error: short iostat device row");
    try {
      *current += std::stod(t[*tps_col]);
    } catch (const std::exception&) {
      throw SamplerParseError("parse_error: bad tps value '" + t[*tps_col] + "'");
    }
  }
  if (current) reports.push_back(*current);
  return reports;
}

std::vector<SamplerRow> sample_disk_activity(double seconds, const std::string& out_csv, unsigned interval_ms) {
  if (interval_ms == 0) throw std::invalid_argument("sample_disk_activity: interval must be positive");
  const auto count = static_cast<std::size_t>(std::max(1.0, std::round(seconds * 1000.0 / interval_ms)));
  std::vector<SamplerRow> rows;

  if (auto iostat = find_iostat(); iostat && interval_ms % 1000 == 0) {
    // -y drops the since-boot report.
    const std::string cmd = *iostat + " -d -y " + std::to_string(interval_ms / 1000) + " " + std::to_string(count) +
                            " 2>/dev/null";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(cmd.c_str(), "r"), ::pclose);
    if (!pipe) throw UnsupportedPlatform("unsupported_platform: cannot run iostat");
    const std::int64_t start = unix_seconds_now();
    std::string text;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe.get())) text += buf.data();
    const auto tps = parse_iostat_reports(text);
    for (std::size_t i = 0; i < tps.size(); ++i) {
      rows.push_back(SamplerRow{start + static_cast<std::int64_t>((i + 1) * interval_ms / 1000), tps[i]});
    }
  } else {
    DiskCounters prev = read_diskstats();
    for (std::size_t i = 0; i < count; ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(interval_ms));
      const DiskCounters now = read_diskstats();
      const double delta = now.ios >= prev.ios ? static_cast<double>(now.ios - prev.ios) : 0.0;
      rows.push_back(SamplerRow{unix_seconds_now(), delta * 1000.0 / interval_ms});
      prev = now;
    }
  }

  CsvWriter out(out_csv, {"unix_s", "tps"});
  for (const auto& r : rows) out.write({std::to_string(r.unix_s), shortest(r.tps)});
  return rows;
}

}  // namespace ckpt
