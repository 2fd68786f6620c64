#pragma once

#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace bgpoison {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

#define BGPOISON_ERROR(Name)        \
  class Name : public Error {       \
   public:                          \
    using Error::Error;             \
  }

BGPOISON_ERROR(ConflictError);
BGPOISON_ERROR(NotFoundError);
BGPOISON_ERROR(GenerationError);
BGPOISON_ERROR(InvalidPathError);
BGPOISON_ERROR(UnknownOriginError);
BGPOISON_ERROR(InvalidScenarioError);
BGPOISON_ERROR(NoSubprefixError);
BGPOISON_ERROR(InsufficientDataError);
BGPOISON_ERROR(TrainingError);
BGPOISON_ERROR(InvalidChangeError);
BGPOISON_ERROR(EstimationError);
BGPOISON_ERROR(InfeasiblePollutionError);
BGPOISON_ERROR(UndefinedRateError);
BGPOISON_ERROR(ConfigError);
BGPOISON_ERROR(DependencyError);
BGPOISON_ERROR(InvariantError);

#undef BGPOISON_ERROR

// ---------------------------------------------------------------------------
// Asn
// ---------------------------------------------------------------------------

/// Autonomous system number. Zero is reserved and rejected.
class Asn {
 public:
  constexpr explicit Asn(std::uint32_t value) : value_(value) {
    if (value == 0) throw std::invalid_argument("ASN 0 is reserved");
  }

  constexpr std::uint32_t value() const noexcept { return value_; }

  friend constexpr auto operator<=>(Asn, Asn) = default;

  friend std::ostream& operator<<(std::ostream& os, Asn asn) {
    return os << asn.value_;
  }

 private:
  std::uint32_t value_;
};

inline std::string to_string(Asn asn) { return std::to_string(asn.value()); }

/// An AS path ordered receiver-first, origin-last.
using AsPath = std::vector<Asn>;

/// Unordered AS adjacency, stored with `low < high`.
struct AsLink {
  Asn low;
  Asn high;

  static AsLink between(Asn a, Asn b) {
    if (a == b) throw std::invalid_argument("self-link " + to_string(a));
    return a < b ? AsLink{a, b} : AsLink{b, a};
  }

  bool touches(Asn asn) const noexcept { return low == asn || high == asn; }
  Asn other(Asn asn) const noexcept { return asn == low ? high : low; }

  friend constexpr auto operator<=>(const AsLink&, const AsLink&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const AsLink& link) {
  return os << '(' << link.low << ',' << link.high << ')';
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), ptr);
}

}  // namespace detail

inline Asn parse_asn(std::string_view text) {
  std::uint32_t v = 0;
  if (!detail::parse_int(text, v) || v == 0) {
    throw ParseError("invalid ASN '" + std::string(text) + "'");
  }
  return Asn{v};
}

// ---------------------------------------------------------------------------
// Prefix
// ---------------------------------------------------------------------------

/// IPv4 prefix. Host bits below `length` must be zero.
class Prefix {
 public:
  Prefix(std::uint32_t base, int length) : base_(base), length_(static_cast<std::uint8_t>(length)) {
    if (length < 0 || length > 32) throw std::invalid_argument("prefix length out of range");
    if ((base & ~mask(length)) != 0) {
      throw std::invalid_argument("host bits set in prefix " + to_string());
    }
  }

  static Prefix parse(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) throw ParseError("prefix without length: " + std::string(text));
    const auto octets = detail::split(text.substr(0, slash), '.');
    if (octets.size() != 4) throw ParseError("malformed IPv4 address: " + std::string(text));
    std::uint32_t base = 0;
    for (const auto o : octets) {
      unsigned v = 0;
      if (!detail::parse_int(o, v) || v > 255) throw ParseError("malformed octet in " + std::string(text));
      base = (base << 8) | v;
    }
    int len = 0;
    if (!detail::parse_int(text.substr(slash + 1), len) || len < 0 || len > 32) {
      throw ParseError("malformed prefix length in " + std::string(text));
    }
    if ((base & ~mask(len)) != 0) throw ParseError("host bits set in " + std::string(text));
    return Prefix(base, len);
  }

  std::uint32_t base() const noexcept { return base_; }
  int length() const noexcept { return length_; }

  /// True when `other` is this prefix or one of its more-specifics.
  bool contains(const Prefix& other) const noexcept {
    return other.length_ >= length_ && (other.base_ & mask(length_)) == base_;
  }

  /// The two halves one bit longer. Requires length < 32.
  std::array<Prefix, 2> halves() const {
    if (length_ >= 32) throw NoSubprefixError("prefix " + to_string() + " has no sub-prefix");
    const auto bit = std::uint32_t{1} << (31 - length_);
    return {Prefix(base_, length_ + 1), Prefix(base_ | bit, length_ + 1)};
  }

  std::string to_string() const {
    std::ostringstream os;
    os << ((base_ >> 24) & 255) << '.' << ((base_ >> 16) & 255) << '.' << ((base_ >> 8) & 255)
       << '.' << (base_ & 255) << '/' << static_cast<int>(length_);
    return os.str();
  }

  friend constexpr auto operator<=>(const Prefix&, const Prefix&) = default;

  friend std::ostream& operator<<(std::ostream& os, const Prefix& p) { return os << p.to_string(); }

 private:
  static constexpr std::uint32_t mask(int length) noexcept {
    return length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
  }

  std::uint32_t base_;
  std::uint8_t length_;
};

inline std::string path_to_string(const AsPath& path, char sep = ' ') {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += sep;
    out += to_string(path[i]);
  }
  return out;
}

}  // namespace bgpoison

template <>
struct std::hash<bgpoison::Asn> {
  std::size_t operator()(bgpoison::Asn a) const noexcept { return std::hash<std::uint32_t>{}(a.value()); }
};

template <>
struct std::hash<bgpoison::AsLink> {
  std::size_t operator()(const bgpoison::AsLink& l) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{l.low.value()} << 32) | l.high.value());
  }
};

template <>
struct std::hash<bgpoison::Prefix> {
  std::size_t operator()(const bgpoison::Prefix& p) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{p.base()} << 8) | static_cast<std::uint64_t>(p.length()));
  }
};
