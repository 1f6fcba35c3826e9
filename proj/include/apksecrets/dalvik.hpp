#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "apksecrets/bytes.hpp"

namespace apksecrets::dalvik {

enum class Format {
  k10x, k12x, k11n, k11x, k10t, k20t, k22x, k21t, k21s, k21h, k21c, k23x, k22b, k22t,
  k22s, k22c, k30t, k32x, k31i, k31t, k31c, k35c, k3rc, k45cc, k4rcc, k51l,
};

enum class RefKind { None, String, Type, Field, Method, CallSite, MethodHandle, Proto };

struct OpcodeInfo {
  std::string_view mnemonic;
  Format format;
  RefKind ref;
};

const OpcodeInfo& opcode_info(std::uint8_t opcode);

// Width in 16-bit code units.
unsigned format_width(Format f);

enum class Payload { None, PackedSwitch, SparseSwitch, FillArrayData };

struct Instruction {
  std::uint32_t offset = 0;  // code units from the start of insns
  std::uint32_t width = 0;   // code units, payloads included
  std::uint8_t opcode = 0;
  Payload payload = Payload::None;
};

// View over a method's insns array (little-endian 16-bit units).
class CodeUnits {
 public:
  explicit CodeUnits(ByteView bytes) : bytes_(bytes) {}
  std::size_t size() const { return bytes_.size() / 2; }
  std::uint16_t operator[](std::size_t i) const {
    return static_cast<std::uint16_t>(bytes_[2 * i] | (bytes_[2 * i + 1] << 8));
  }

 private:
  ByteView bytes_;
};

// Decodes the instruction stream by format width, stepping over switch and
// array-data payloads. Throws Error(OffsetOutOfBounds) if an instruction or
// payload runs past the end of the stream.
std::vector<Instruction> decode_instructions(const CodeUnits& code);

}  // namespace apksecrets::dalvik
