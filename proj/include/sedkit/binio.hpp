#pragma once

// Little-endian binary stream helpers shared by the WAVE reader, the
// feature cache and the checkpoint format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "sedkit/errors.hpp"

namespace sedkit::binio {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("unexpected end of stream");
  return value;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_le<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError("unexpected end of stream");
  return s;
}

inline void expect_tag(std::istream& is, const char* tag) {
  char got[4];
  is.read(got, 4);
  if (!is || std::memcmp(got, tag, 4) != 0) throw IoError(std::string("bad file tag, expected ") + tag);
}

}  // namespace sedkit::binio
