#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rng.hpp"

namespace wfdual {

/// Ulam-Harris word. Root particles are (i); the k-th child of a is (a, k).
class Label {
 public:
  Label() = default;
  Label(std::initializer_list<std::uint32_t> entries) : entries_(entries) { check(); }
  explicit Label(std::vector<std::uint32_t> entries) : entries_(std::move(entries)) { check(); }

  static Label root(std::uint32_t i) { return Label({i}); }

  Label child(std::uint32_t k) const {
    if (k == 0) throw std::invalid_argument("label entries are positive");
    Label c;
    c.entries_.reserve(entries_.size() + 1);
    c.entries_.assign(entries_.begin(), entries_.end());
    c.entries_.push_back(k);
    c.norm_ = std::max(norm_, k);
    return c;
  }

  Label parent() const {
    if (entries_.size() < 2) throw std::logic_error("root labels have no parent");
    return Label(std::vector<std::uint32_t>(entries_.begin(), entries_.end() - 1));
  }

  const std::vector<std::uint32_t>& entries() const noexcept { return entries_; }
  std::size_t length() const noexcept { return entries_.size(); }
  /// Largest entry.
  std::uint32_t norm() const noexcept { return norm_; }

  /// Hash chained along the word, so a child's key derives from its parent's.
  std::uint64_t key() const noexcept {
    std::uint64_t h = 0x4C4142454C000000ULL;
    for (auto e : entries_) h = combine(h, e);
    return h;
  }
  static std::uint64_t child_key(std::uint64_t parent_key, std::uint32_t k) noexcept {
    return combine(parent_key, k);
  }

  std::size_t common_prefix(const Label& other) const noexcept {
    const auto n = std::min(entries_.size(), other.entries_.size());
    std::size_t i = 0;
    while (i < n && entries_[i] == other.entries_[i]) ++i;
    return i;
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (i) s += '.';
      s += std::to_string(entries_[i]);
    }
    return s;
  }

  static Label parse(std::string_view text) {
    std::vector<std::uint32_t> e;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto dot = text.find('.', pos);
      const auto part = text.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
      if (part.empty()) throw std::invalid_argument("malformed label");
      std::uint64_t v = 0;
      for (char c : part) {
        if (c < '0' || c > '9') throw std::invalid_argument("malformed label");
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
        if (v > UINT32_MAX) throw std::invalid_argument("label entry out of range");
      }
      e.push_back(static_cast<std::uint32_t>(v));
      if (dot == std::string_view::npos) break;
      pos = dot + 1;
    }
    return Label(std::move(e));
  }

  bool operator==(const Label& other) const noexcept { return entries_ == other.entries_; }

 private:
  void check() {
    norm_ = 0;
    for (auto e : entries_) {
      if (e == 0) throw std::invalid_argument("label entries are positive");
      norm_ = std::max(norm_, e);
    }
  }

  std::vector<std::uint32_t> entries_;
  std::uint32_t norm_ = 0;
};

/// a precedes b: smaller largest entry, then shorter, then lexicographically smaller.
inline bool label_less(const Label& a, const Label& b) noexcept {
  if (a.norm() != b.norm()) return a.norm() < b.norm();
  if (a.length() != b.length()) return a.length() < b.length();
  return a.entries() < b.entries();
}

struct LabelLess {
  bool operator()(const Label& a, const Label& b) const noexcept { return label_less(a, b); }
};

inline std::ostream& operator<<(std::ostream& os, const Label& l) { return os << l.to_string(); }

}  // namespace wfdual

template <>
struct std::hash<wfdual::Label> {
  std::size_t operator()(const wfdual::Label& l) const noexcept { return static_cast<std::size_t>(l.key()); }
};
