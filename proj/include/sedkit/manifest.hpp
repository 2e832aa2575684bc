#pragma once

// Dataset manifests: a directory holding weak.tsv (`path<TAB>comma,separated,
// labels`), strong.tsv (`path<TAB>onset<TAB>offset<TAB>class`), unlabeled.tsv
// (one path per line) and classes.txt (ordered vocabulary, one per line).
// Paths are relative to the manifest directory.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/events.hpp"

namespace sedkit {

struct WeakRow {
  std::string path;
  std::vector<std::string> labels;
};

struct StrongRow {
  std::string path;
  double onset = 0.0;
  double offset = 0.0;
  std::string label;
};

struct DatasetManifest {
  std::vector<WeakRow> weak;
  std::vector<StrongRow> strong;
  std::vector<std::string> unlabeled;
  std::vector<std::string> classes;
};

// Clip id of a referenced audio file: the filename without extension.
inline std::string clip_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

inline std::vector<std::string> split_comma(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(',', start);
    if (pos == std::string::npos) {
      if (start < s.size()) parts.push_back(s.substr(start));
      return parts;
    }
    if (pos > start) parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

inline DatasetManifest load_manifest(const std::string& dir, bool check_paths = true) {
  namespace fs = std::filesystem;
  DatasetManifest m;

  const auto classes_path = (fs::path(dir) / "classes.txt").string();
  for (const auto& line : detail::read_lines(classes_path)) {
    if (line.empty()) continue;
    if (std::find(m.classes.begin(), m.classes.end(), line) != m.classes.end())
      throw ParseError(classes_path + ": duplicate class " + line);
    m.classes.push_back(line);
  }
  if (m.classes.empty()) throw ParseError(classes_path + ": no classes");
  const std::set<std::string> known(m.classes.begin(), m.classes.end());

  const auto weak_path = (fs::path(dir) / "weak.tsv").string();
  {
    int lineno = 0;
    for (const auto& line : detail::read_lines(weak_path)) {
      ++lineno;
      if (line.empty()) continue;
      const auto where = weak_path + ":" + std::to_string(lineno);
      const auto parts = detail::split_tabs(line);
      if (parts.size() != 2) throw ParseError(where + ": expected `path<TAB>labels`");
      WeakRow row;
      row.path = parts[0];
      row.labels = detail::split_comma(parts[1]);
      if (row.labels.empty()) throw ParseError(where + ": no labels");
      std::sort(row.labels.begin(), row.labels.end());
      row.labels.erase(std::unique(row.labels.begin(), row.labels.end()), row.labels.end());
      for (const auto& label : row.labels)
        if (known.find(label) == known.end()) throw DataError(where + ": unknown class " + label);
      m.weak.push_back(std::move(row));
    }
  }

  const auto strong_path = (fs::path(dir) / "strong.tsv").string();
  {
    int lineno = 0;
    for (const auto& line : detail::read_lines(strong_path)) {
      ++lineno;
      if (line.empty()) continue;
      const auto where = strong_path + ":" + std::to_string(lineno);
      const auto parts = detail::split_tabs(line);
      if (parts.size() != 4) throw ParseError(where + ": expected `path<TAB>onset<TAB>offset<TAB>class`");
      StrongRow row;
      row.path = parts[0];
      row.onset = detail::parse_double(parts[1], where);
      row.offset = detail::parse_double(parts[2], where);
      row.label = parts[3];
      if (!(row.onset >= 0.0 && row.onset < row.offset)) throw ParseError(where + ": need 0 <= onset < offset");
      if (known.find(row.label) == known.end()) throw DataError(where + ": unknown class " + row.label);
      m.strong.push_back(std::move(row));
    }
  }

  const auto unlabeled_path = (fs::path(dir) / "unlabeled.tsv").string();
  {
    int lineno = 0;
    for (const auto& line : detail::read_lines(unlabeled_path)) {
      ++lineno;
      if (line.empty()) continue;
      if (line.find('\t') != std::string::npos)
        throw ParseError(unlabeled_path + ":" + std::to_string(lineno) + ": expected a bare path");
      m.unlabeled.push_back(line);
    }
  }

  if (check_paths) {
    std::vector<std::string> missing;
    const auto check = [&](const std::string& rel) {
      if (!fs::exists(fs::path(dir) / rel)) missing.push_back(rel);
    };
    for (const auto& row : m.weak) check(row.path);
    for (const auto& row : m.strong) check(row.path);
    for (const auto& path : m.unlabeled) check(path);
    if (!missing.empty()) throw DataError("manifest references missing files, first: " + missing.front());
  }
  return m;
}

inline void save_manifest(const std::string& dir, const DatasetManifest& m) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream classes(fs::path(dir) / "classes.txt");
  for (const auto& c : m.classes) classes << c << "\n";

  std::ofstream weak(fs::path(dir) / "weak.tsv");
  for (const auto& row : m.weak) {
    auto labels = row.labels;
    std::sort(labels.begin(), labels.end());
    weak << row.path << '\t';
    for (std::size_t i = 0; i < labels.size(); ++i) weak << (i ? "," : "") << labels[i];
    weak << '\n';
  }

  std::ofstream strong(fs::path(dir) / "strong.tsv");
  strong << std::fixed << std::setprecision(6);
  for (const auto& row : m.strong) strong << row.path << '\t' << row.onset << '\t' << row.offset << '\t'
                                          << row.label << '\n';

  std::ofstream unlabeled(fs::path(dir) / "unlabeled.tsv");
  for (const auto& path : m.unlabeled) unlabeled << path << '\n';

  if (!classes || !weak || !strong || !unlabeled) throw IoError("failed writing manifest to " + dir);
}

}  // namespace sedkit
