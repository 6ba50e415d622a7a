#pragma once

// Finite alphabets with stable integer indexing. Labels and observation
// symbols use distinct wrapper types so they cannot be mixed up in calls.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace genclass {

class Alphabet {
 public:
  Alphabet() = default;

  explicit Alphabet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw std::invalid_argument("Alphabet: needs at least one symbol");
    index_.reserve(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) {
      auto [it, inserted] = index_.emplace(names_[i], static_cast<int>(i));
      if (!inserted) throw std::invalid_argument("Alphabet: duplicate symbol '" + names_[i] + "'");
    }
  }

  int size() const { return static_cast<int>(names_.size()); }
  bool empty() const { return names_.empty(); }
  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<int> index(std::string_view s) const {
    auto it = index_.find(std::string(s));
    return it == index_.end() ? std::nullopt : std::optional<int>(it->second);
  }

  int index_or_throw(std::string_view s) const {
    if (auto i = index(s)) return *i;
    throw std::out_of_range("Alphabet: unknown symbol '" + std::string(s) + "'");
  }

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

struct LabelSet : Alphabet {
  using Alphabet::Alphabet;
};

struct ObsSet : Alphabet {
  using Alphabet::Alphabet;
};

}  // namespace genclass
