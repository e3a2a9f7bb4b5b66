#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <type_traits>

namespace nvzeno {

/// 64-bit FNV-1a; stable across platforms of the same endianness.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& text(std::string_view s) { return bytes(s.data(), s.size()); }
  template <class T>
    requires std::is_trivially_copyable_v<T>
  Fnv1a& value(const T& v) {
    return bytes(&v, sizeof(T));
  }
  template <class T>
  Fnv1a& values(std::span<const T> v) {
    return bytes(v.data(), v.size_bytes());
  }
  [[nodiscard]] std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace nvzeno
