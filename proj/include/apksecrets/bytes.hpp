#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace apksecrets {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using SharedBytes = std::shared_ptr<const Bytes>;

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteView data);
void write_file(const std::string& path, std::string_view text);

std::string sha256_hex(ByteView data);
std::string sha256_hex(std::string_view text);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace apksecrets
