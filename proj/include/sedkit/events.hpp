#pragma once

// Event annotations and detections: (label, onset, offset) per clip, plus
// the tab-separated interchange formats used for ground truth, detection
// output and clip durations.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"

namespace sedkit {

struct TimedEvent {
  double onset = 0.0;
  double offset = 0.0;
  std::string label;
};

// All events of one corpus keyed by clip id; events kept sorted by
// (label, onset) for stable output.
using ClipEvents = std::map<std::string, std::vector<TimedEvent>>;

inline void sort_events(std::vector<TimedEvent>& events) {
  std::sort(events.begin(), events.end(), [](const TimedEvent& a, const TimedEvent& b) {
    return std::tie(a.label, a.onset, a.offset) < std::tie(b.label, b.onset, b.offset);
  });
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": not a number: '" + s + "'");
  }
}

}  // namespace detail

// Rows are `clip_id<TAB>onset<TAB>offset<TAB>class_name`.
inline ClipEvents read_events_tsv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  ClipEvents out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = path + ":" + std::to_string(lineno);
    const auto parts = detail::split_tabs(line);
    if (parts.size() != 4) throw ParseError(where + ": expected 4 tab-separated fields");
    TimedEvent ev;
    ev.onset = detail::parse_double(parts[1], where);
    ev.offset = detail::parse_double(parts[2], where);
    ev.label = parts[3];
    if (ev.label.empty()) throw ParseError(where + ": empty class name");
    if (!(ev.onset >= 0.0 && ev.onset < ev.offset)) throw ParseError(where + ": need 0 <= onset < offset");
    out[parts[0]].push_back(std::move(ev));
  }
  for (auto& [clip, events] : out) sort_events(events);
  return out;
}

inline void write_events_tsv(const std::string& path, const ClipEvents& events) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << std::fixed << std::setprecision(3);
  for (const auto& [clip, list] : events)
    for (const auto& ev : list) os << clip << '\t' << ev.onset << '\t' << ev.offset << '\t' << ev.label << '\n';
  if (!os) throw IoError("failed writing " + path);
}

// Rows are `clip_id<TAB>duration_seconds`.
inline std::map<std::string, double> read_durations_tsv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::map<std::string, double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = path + ":" + std::to_string(lineno);
    const auto parts = detail::split_tabs(line);
    if (parts.size() != 2) throw ParseError(where + ": expected 2 tab-separated fields");
    const double dur = detail::parse_double(parts[1], where);
    if (dur <= 0.0) throw ParseError(where + ": duration must be positive");
    out[parts[0]] = dur;
  }
  return out;
}

inline void write_durations_tsv(const std::string& path, const std::map<std::string, double>& durations) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << std::fixed << std::setprecision(6);
  for (const auto& [clip, dur] : durations) os << clip << '\t' << dur << '\n';
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace sedkit
