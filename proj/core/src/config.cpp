#include "focuslab/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "focuslab/error.hpp"

namespace focuslab::config {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail_at(const std::string& source, int line, const std::string& message) {
  throw FormatError(source + ":" + std::to_string(line) + ": " + message);
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

} // namespace

Section::Section(std::string source, std::string kind, std::string label, int line)
    : source_(std::move(source)), kind_(std::move(kind)), label_(std::move(label)), line_(line) {}

void Section::add(Entry entry) {
  if (find(entry.key)) fail_at(source_, entry.line, "duplicate key '" + entry.key + "'");
  entries_.push_back(std::move(entry));
}

const Entry* Section::find(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.key == key) return &e;
  return nullptr;
}

bool Section::has(const std::string& key) const { return find(key) != nullptr; }

void Section::fail(const std::string& key, const std::string& message) const {
  const Entry* e = find(key);
  fail_at(source_, e ? e->line : line_, message);
}

std::string Section::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

std::string Section::require_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) fail(key, "[" + kind_ + "] requires key '" + key + "'");
  return e->value;
}

double Section::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  double v = 0.0;
  if (!parse_number(e->value, v)) fail(key, "'" + key + "' expects a number, got '" + e->value + "'");
  return v;
}

long long Section::get_int(const std::string& key, long long fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  long long v = 0;
  if (!parse_number(e->value, v)) fail(key, "'" + key + "' expects an integer, got '" + e->value + "'");
  return v;
}

std::uint64_t Section::get_u64(const std::string& key, std::uint64_t fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  if (!parse_number(e->value, v))
    fail(key, "'" + key + "' expects a non-negative integer, got '" + e->value + "'");
  return v;
}

std::vector<int> Section::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<int> out;
  std::stringstream ss(e->value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    if (!parse_number(trim(item), v)) fail(key, "'" + key + "' expects comma-separated integers");
    out.push_back(v);
  }
  if (out.empty()) fail(key, "'" + key + "' is empty");
  return out;
}

void Section::reject_unknown(const std::set<std::string>& allowed) const {
  for (const auto& e : entries_)
    if (!allowed.count(e.key)) fail_at(source_, e.line, "unknown key '" + e.key + "' in [" + kind_ + "]");
}

std::vector<const Section*> Document::all(const std::string& kind) const {
  std::vector<const Section*> out;
  for (const auto& s : sections)
    if (s.kind() == kind) out.push_back(&s);
  return out;
}

const Section* Document::find(const std::string& kind) const {
  const auto matches = all(kind);
  if (matches.size() > 1) fail_at(source, matches[1]->line(), "section [" + kind + "] appears more than once");
  return matches.empty() ? nullptr : matches.front();
}

void Document::reject_unknown(const std::set<std::string>& allowed) const {
  for (const auto& s : sections)
    if (!allowed.count(s.kind())) fail_at(source, s.line(), "unknown section [" + s.kind() + "]");
}

Document parse(const std::string& text, const std::string& source) {
  Document doc;
  doc.source = source;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s[0] == '[') {
      if (s.back() != ']') fail_at(source, line, "unterminated section header");
      const std::string inner = trim(std::string_view(s).substr(1, s.size() - 2));
      if (inner.empty()) fail_at(source, line, "empty section header");
      const auto space = inner.find_first_of(" \t");
      std::string kind = inner.substr(0, space);
      std::string label = space == std::string::npos ? std::string() : trim(std::string_view(inner).substr(space));
      for (const auto& other : doc.sections)
        if (other.kind() == kind && other.label() == label)
          fail_at(source, line, "section [" + inner + "] already defined at line " + std::to_string(other.line()));
      doc.sections.emplace_back(source, std::move(kind), std::move(label), line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail_at(source, line, "expected 'key = value' or '[section]'");
    if (doc.sections.empty()) fail_at(source, line, "key outside of any section");
    std::string key = trim(std::string_view(s).substr(0, eq));
    std::string value = trim(std::string_view(s).substr(eq + 1));
    if (key.empty()) fail_at(source, line, "missing key before '='");
    // Trailing comments need whitespace before the marker so paths may contain '#'.
    for (const char* marker : {" #", "\t#", " ;", "\t;"}) {
      const auto pos = value.find(marker);
      if (pos != std::string::npos) value = trim(std::string_view(value).substr(0, pos));
    }
    doc.sections.back().add({std::move(key), std::move(value), line});
  }
  return doc;
}

Document load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot read config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

} // namespace focuslab::config
