#pragma once

// psi_{h_1} ... psi_{h_n} conj(psi_{a_1}) ... conj(psi_{a_n}) with both index lists sorted.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fourier_state.hpp"

namespace nlsgibbs {

class Monomial {
 public:
  static constexpr int kMaxHalf = 6;

  Monomial() = default;

  static Monomial make(std::span<const int> holo, std::span<const int> anti) {
    if (holo.size() != anti.size()) throw InvalidArgument("Monomial: holomorphic and antiholomorphic halves differ in size");
    if (holo.size() > static_cast<std::size_t>(kMaxHalf)) throw InvalidArgument("Monomial: degree above 12 unsupported");
    Monomial m;
    m.half_ = static_cast<std::int8_t>(holo.size());
    for (std::size_t i = 0; i < holo.size(); ++i) {
      if (std::abs(holo[i]) > 127 || std::abs(anti[i]) > 127) throw InvalidMode("Monomial: mode index out of range");
      m.holo_[i] = static_cast<std::int8_t>(holo[i]);
      m.anti_[i] = static_cast<std::int8_t>(anti[i]);
    }
    m.canonicalize();
    return m;
  }
  static Monomial make(std::initializer_list<int> holo, std::initializer_list<int> anti) {
    return make(std::span<const int>(holo.begin(), holo.size()), std::span<const int>(anti.begin(), anti.size()));
  }
  static Monomial action(int k) { return make({k}, {k}); }

  int half_degree() const { return half_; }
  int degree() const { return 2 * half_; }
  int holo(int i) const { return holo_[static_cast<std::size_t>(i)]; }
  int anti(int i) const { return anti_[static_cast<std::size_t>(i)]; }
  std::vector<int> holo_modes() const { return {holo_.begin(), holo_.begin() + half_}; }
  std::vector<int> anti_modes() const { return {anti_.begin(), anti_.begin() + half_}; }

  int momentum() const {
    int s = 0;
    for (int i = 0; i < half_; ++i) s += holo(i) - anti(i);
    return s;
  }
  /// Σ holo k² - Σ anti k²; the monomial is resonant when this vanishes.
  int frequency() const {
    int s = 0;
    for (int i = 0; i < half_; ++i) s += holo(i) * holo(i) - anti(i) * anti(i);
    return s;
  }
  bool resonant() const { return frequency() == 0; }
  /// Same multiset on both sides: the monomial is a product of actions.
  bool action_only() const { return holo_ == anti_; }

  int max_abs_mode() const {
    int m = 0;
    for (int i = 0; i < half_; ++i) m = std::max({m, std::abs(holo(i)), std::abs(anti(i))});
    return m;
  }
  int holo_count(int k) const { return static_cast<int>(std::count(holo_.begin(), holo_.begin() + half_, k)); }
  int anti_count(int k) const { return static_cast<int>(std::count(anti_.begin(), anti_.begin() + half_, k)); }

  /// Distinct modes in increasing order.
  std::vector<int> distinct_modes() const {
    std::set<int> s(holo_.begin(), holo_.begin() + half_);
    s.insert(anti_.begin(), anti_.begin() + half_);
    return {s.begin(), s.end()};
  }

  Monomial conjugate() const {
    Monomial m = *this;
    std::swap(m.holo_, m.anti_);
    return m;
  }

  /// Product of a and b with one psi_k removed from a's holomorphic half and one conj(psi_k) from b's antiholomorphic half.
  static Monomial contract(const Monomial& a, int k_holo_a, const Monomial& b, int k_anti_b) {
    const int half = a.half_ + b.half_ - 1;
    if (half > kMaxHalf) throw InvalidArgument("Monomial: bracket degree above 12 unsupported");
    Monomial m;
    m.half_ = static_cast<std::int8_t>(half);
    std::size_t h = 0, an = 0;
    bool skipped_h = false, skipped_a = false;
    for (int i = 0; i < a.half_; ++i) {
      if (!skipped_h && a.holo(i) == k_holo_a) {
        skipped_h = true;
      } else {
        m.holo_[h++] = a.holo_[static_cast<std::size_t>(i)];
      }
    }
    for (int i = 0; i < b.half_; ++i) m.holo_[h++] = b.holo_[static_cast<std::size_t>(i)];
    for (int i = 0; i < a.half_; ++i) m.anti_[an++] = a.anti_[static_cast<std::size_t>(i)];
    for (int i = 0; i < b.half_; ++i) {
      if (!skipped_a && b.anti(i) == k_anti_b) {
        skipped_a = true;
      } else {
        m.anti_[an++] = b.anti_[static_cast<std::size_t>(i)];
      }
    }
    m.canonicalize();
    return m;
  }

  static Monomial product(const Monomial& a, const Monomial& b) {
    const int half = a.half_ + b.half_;
    if (half > kMaxHalf) throw InvalidArgument("Monomial: product degree above 12 unsupported");
    Monomial m;
    m.half_ = static_cast<std::int8_t>(half);
    for (int i = 0; i < a.half_; ++i) {
      m.holo_[static_cast<std::size_t>(i)] = a.holo_[static_cast<std::size_t>(i)];
      m.anti_[static_cast<std::size_t>(i)] = a.anti_[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < b.half_; ++i) {
      m.holo_[static_cast<std::size_t>(a.half_ + i)] = b.holo_[static_cast<std::size_t>(i)];
      m.anti_[static_cast<std::size_t>(a.half_ + i)] = b.anti_[static_cast<std::size_t>(i)];
    }
    m.canonicalize();
    return m;
  }

  Complex evaluate(const FourierState& s) const {
    Complex p(1.0, 0.0);
    for (int i = 0; i < half_; ++i) p *= s[holo(i)] * std::conj(s[anti(i)]);
    return p;
  }

  std::string to_string() const {
    std::string out = "(";
    for (int i = 0; i < half_; ++i) out += (i ? "," : "") + std::to_string(holo(i));
    out += "|";
    for (int i = 0; i < half_; ++i) out += (i ? "," : "") + std::to_string(anti(i));
    return out + ")";
  }

  friend bool operator==(const Monomial&, const Monomial&) = default;
  friend auto operator<=>(const Monomial& a, const Monomial& b) {
    if (auto c = a.half_ <=> b.half_; c != 0) return c;
    if (auto c = a.holo_ <=> b.holo_; c != 0) return c;
    return a.anti_ <=> b.anti_;
  }

  std::size_t hash() const {
    std::uint64_t x = 0, y = 0;
    std::memcpy(&x, holo_.data(), sizeof(std::int8_t) * kMaxHalf);
    std::memcpy(&y, anti_.data(), sizeof(std::int8_t) * kMaxHalf);
    x ^= static_cast<std::uint64_t>(static_cast<std::uint8_t>(half_)) << 56;
    std::uint64_t h = x * 0x9e3779b97f4a7c15ULL;
    h ^= (y + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2)) * 0xbf58476d1ce4e5b9ULL;
    return static_cast<std::size_t>(h ^ (h >> 31));
  }

 private:
  void canonicalize() {
    std::sort(holo_.begin(), holo_.begin() + half_);
    std::sort(anti_.begin(), anti_.begin() + half_);
  }

  std::array<std::int8_t, kMaxHalf> holo_{};
  std::array<std::int8_t, kMaxHalf> anti_{};
  std::int8_t half_ = 0;
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const { return m.hash(); }
};

/// A relation Σ a_i k_i = tk with integer |a_i| <= M over the monomial's 2n indices.
struct Admissibility {
  int m = 1;
  int tk = 0;
  friend bool operator==(const Admissibility&, const Admissibility&) = default;
};

/// Whether some integer combination with coefficients bounded by M of the monomial's indices equals tk.
inline bool admits_relation(const Monomial& mono, int max_coefficient, int tk) {
  std::set<int> reachable{0};
  auto extend = [&](int k) {
    std::set<int> next;
    for (int r : reachable) {
      for (int a = -max_coefficient; a <= max_coefficient; ++a) next.insert(r + a * k);
    }
    reachable = std::move(next);
  };
  for (int i = 0; i < mono.half_degree(); ++i) {
    extend(mono.holo(i));
    extend(mono.anti(i));
  }
  return reachable.count(tk) > 0;
}

}  // namespace nlsgibbs
