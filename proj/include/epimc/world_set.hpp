#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace epimc {

/// Dense bitset indexed by world id.
class WorldSet {
 public:
  WorldSet() = default;
  explicit WorldSet(std::size_t n, bool value = false)
      : size_(n), words_((n + 63) / 64, value ? ~std::uint64_t{0} : 0) {
    trim();
  }

  std::size_t size() const { return size_; }

  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool v = true) {
    auto mask = std::uint64_t{1} << (i & 63);
    if (v)
      words_[i >> 6] |= mask;
    else
      words_[i >> 6] &= ~mask;
  }

  WorldSet& operator&=(const WorldSet& o) {
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= o.words_[k];
    return *this;
  }
  WorldSet& operator|=(const WorldSet& o) {
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= o.words_[k];
    return *this;
  }
  void flip() {
    for (auto& w : words_) w = ~w;
    trim();
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool all() const { return count() == size_; }
  bool none() const {
    for (auto w : words_)
      if (w) return false;
    return true;
  }

  std::optional<std::size_t> first_set() const {
    for (std::size_t k = 0; k < words_.size(); ++k)
      if (words_[k]) return k * 64 + static_cast<std::size_t>(std::countr_zero(words_[k]));
    return std::nullopt;
  }
  std::optional<std::size_t> first_unset() const {
    for (std::size_t k = 0; k < words_.size(); ++k) {
      auto inv = ~words_[k];
      if (k + 1 == words_.size() && (size_ & 63)) inv &= (std::uint64_t{1} << (size_ & 63)) - 1;
      if (inv) return k * 64 + static_cast<std::size_t>(std::countr_zero(inv));
    }
    return std::nullopt;
  }

  std::span<std::uint64_t> words() { return words_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool operator==(const WorldSet&) const = default;

 private:
  void trim() {
    if ((size_ & 63) && !words_.empty()) words_.back() &= (std::uint64_t{1} << (size_ & 63)) - 1;
  }

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace epimc
