#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

/// Sectioned key-value config files:
///
///   # comment            ; comment
///   [section]            [section label]
///   key = value
///
/// Keys are unique within a section; the same (section, label) pair may not repeat.
/// Every error carries "source:line: ".
namespace focuslab::config {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

class Section {
public:
  Section(std::string source, std::string kind, std::string label, int line);

  const std::string& kind() const noexcept { return kind_; }
  /// Text after the kind in the header; empty when absent.
  const std::string& label() const noexcept { return label_; }
  int line() const noexcept { return line_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  void add(Entry entry);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  /// Comma-separated integers.
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  /// Throws FormatError at the first key not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  /// FormatError prefixed with this section's source and the key's line (header line if absent).
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

private:
  const Entry* find(const std::string& key) const;

  std::string source_;
  std::string kind_;
  std::string label_;
  int line_;
  std::vector<Entry> entries_;
};

struct Document {
  std::string source;
  std::vector<Section> sections;

  /// Sections of the given kind in file order.
  std::vector<const Section*> all(const std::string& kind) const;
  /// The single section of the given kind; throws FormatError when repeated.
  const Section* find(const std::string& kind) const;
  /// Throws FormatError at the first section whose kind is not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;
};

Document parse(const std::string& text, const std::string& source);
/// Throws FormatError naming the path when it cannot be read.
Document load(const std::filesystem::path& path);

} // namespace focuslab::config
