#include "apksecrets/dalvik.hpp"

#include <array>

#include "apksecrets/error.hpp"

namespace apksecrets::dalvik {
namespace {

constexpr std::array<OpcodeInfo, 256> kOpcodes = {{
    {"nop", Format::k10x, RefKind::None},  // 0x00
    {"move", Format::k12x, RefKind::None},  // 0x01
    {"move/from16", Format::k22x, RefKind::None},  // 0x02
    {"move/16", Format::k32x, RefKind::None},  // 0x03
    {"move-wide", Format::k12x, RefKind::None},  // 0x04
    {"move-wide/from16", Format::k22x, RefKind::None},  // 0x05
    {"move-wide/16", Format::k32x, RefKind::None},  // 0x06
    {"move-object", Format::k12x, RefKind::None},  // 0x07
    {"move-object/from16", Format::k22x, RefKind::None},  // 0x08
    {"move-object/16", Format::k32x, RefKind::None},  // 0x09
    {"move-result", Format::k11x, RefKind::None},  // 0x0a
    {"move-result-wide", Format::k11x, RefKind::None},  // 0x0b
    {"move-result-object", Format::k11x, RefKind::None},  // 0x0c
    {"move-exception", Format::k11x, RefKind::None},  // 0x0d
    {"return-void", Format::k10x, RefKind::None},  // 0x0e
    {"return", Format::k11x, RefKind::None},  // 0x0f
    {"return-wide", Format::k11x, RefKind::None},  // 0x10
    {"return-object", Format::k11x, RefKind::None},  // 0x11
    {"const/4", Format::k11n, RefKind::None},  // 0x12
    {"const/16", Format::k21s, RefKind::None},  // 0x13
    {"const", Format::k31i, RefKind::None},  // 0x14
    {"const/high16", Format::k21h, RefKind::None},  // 0x15
    {"const-wide/16", Format::k21s, RefKind::None},  // 0x16
    {"const-wide/32", Format::k31i, RefKind::None},  // 0x17
    {"const-wide", Format::k51l, RefKind::None},  // 0x18
    {"const-wide/high16", Format::k21h, RefKind::None},  // 0x19
    {"const-string", Format::k21c, RefKind::String},  // 0x1a
    {"const-string/jumbo", Format::k31c, RefKind::String},  // 0x1b
    {"const-class", Format::k21c, RefKind::Type},  // 0x1c
    {"monitor-enter", Format::k11x, RefKind::None},  // 0x1d
    {"monitor-exit", Format::k11x, RefKind::None},  // 0x1e
    {"check-cast", Format::k21c, RefKind::Type},  // 0x1f
    {"instance-of", Format::k22c, RefKind::Type},  // 0x20
    {"array-length", Format::k12x, RefKind::None},  // 0x21
    {"new-instance", Format::k21c, RefKind::Type},  // 0x22
    {"new-array", Format::k22c, RefKind::Type},  // 0x23
    {"filled-new-array", Format::k35c, RefKind::Type},  // 0x24
    {"filled-new-array/range", Format::k3rc, RefKind::Type},  // 0x25
    {"fill-array-data", Format::k31t, RefKind::None},  // 0x26
    {"throw", Format::k11x, RefKind::None},  // 0x27
    {"goto", Format::k10t, RefKind::None},  // 0x28
    {"goto/16", Format::k20t, RefKind::None},  // 0x29
    {"goto/32", Format::k30t, RefKind::None},  // 0x2a
    {"packed-switch", Format::k31t, RefKind::None},  // 0x2b
    {"sparse-switch", Format::k31t, RefKind::None},  // 0x2c
    {"cmpl-float", Format::k23x, RefKind::None},  // 0x2d
    {"cmpg-float", Format::k23x, RefKind::None},  // 0x2e
    {"cmpl-double", Format::k23x, RefKind::None},  // 0x2f
    {"cmpg-double", Format::k23x, RefKind::None},  // 0x30
    {"cmp-long", Format::k23x, RefKind::None},  // 0x31
    {"if-eq", Format::k22t, RefKind::None},  // 0x32
    {"if-ne", Format::k22t, RefKind::None},  // 0x33
    {"if-lt", Format::k22t, RefKind::None},  // 0x34
    {"if-ge", Format::k22t, RefKind::None},  // 0x35
    {"if-gt", Format::k22t, RefKind::None},  // 0x36
    {"if-le", Format::k22t, RefKind::None},  // 0x37
    {"if-eqz", Format::k21t, RefKind::None},  // 0x38
    {"if-nez", Format::k21t, RefKind::None},  // 0x39
    {"if-ltz", Format::k21t, RefKind::None},  // 0x3a
    {"if-gez", Format::k21t, RefKind::None},  // 0x3b
    {"if-gtz", Format::k21t, RefKind::None},  // 0x3c
    {"if-lez", Format::k21t, RefKind::None},  // 0x3d
    {"unused-3e", Format::k10x, RefKind::None},  // 0x3e
    {"unused-3f", Format::k10x, RefKind::None},  // 0x3f
    {"unused-40", Format::k10x, RefKind::None},  // 0x40
    {"unused-41", Format::k10x, RefKind::None},  // 0x41
    {"unused-42", Format::k10x, RefKind::None},  // 0x42
    {"unused-43", Format::k10x, RefKind::None},  // 0x43
    {"aget", Format::k23x, RefKind::None},  // 0x44
    {"aget-wide", Format::k23x, RefKind::None},  // 0x45
    {"aget-object", Format::k23x, RefKind::None},  // 0x46
    {"aget-boolean", Format::k23x, RefKind::None},  // 0x47
    {"aget-byte", Format::k23x, RefKind::None},  // 0x48
    {"aget-char", Format::k23x, RefKind::None},  // 0x49
    {"aget-short", Format::k23x, RefKind::None},  // 0x4a
    {"aput", Format::k23x, RefKind::None},  // 0x4b
    {"aput-wide", Format::k23x, RefKind::None},  // 0x4c
    {"aput-object", Format::k23x, RefKind::None},  // 0x4d
    {"aput-boolean", Format::k23x, RefKind::None},  // 0x4e
    {"aput-byte", Format::k23x, RefKind::None},  // 0x4f
    {"aput-char", Format::k23x, RefKind::None},  // 0x50
    {"aput-short", Format::k23x, RefKind::None},  // 0x51
    {"iget", Format::k22c, RefKind::Field},  // 0x52
    {"iget-wide", Format::k22c, RefKind::Field},  // 0x53
    {"iget-object", Format::k22c, RefKind::Field},  // 0x54
    {"iget-boolean", Format::k22c, RefKind::Field},  // 0x55
    {"iget-byte", Format::k22c, RefKind::Field},  // 0x56
    {"iget-char", Format::k22c, RefKind::Field},  // 0x57
    {"iget-short", Format::k22c, RefKind::Field},  // 0x58
    {"iput", Format::k22c, RefKind::Field},  // 0x59
    {"iput-wide", Format::k22c, RefKind::Field},  // 0x5a
    {"iput-object", Format::k22c, RefKind::Field},  // 0x5b
    {"iput-boolean", Format::k22c, RefKind::Field},  // 0x5c
    {"iput-byte", Format::k22c, RefKind::Field},  // 0x5d
    {"iput-char", Format::k22c, RefKind::Field},  // 0x5e
    {"iput-short", Format::k22c, RefKind::Field},  // 0x5f
    {"sget", Format::k21c, RefKind::Field},  // 0x60
    {"sget-wide", Format::k21c, RefKind::Field},  // 0x61
    {"sget-object", Format::k21c, RefKind::Field},  // 0x62
    {"sget-boolean", Format::k21c, RefKind::Field},  // 0x63
    {"sget-byte", Format::k21c, RefKind::Field},  // 0x64
    {"sget-char", Format::k21c, RefKind::Field},  // 0x65
    {"sget-short", Format::k21c, RefKind::Field},  // 0x66
    {"sput", Format::k21c, RefKind::Field},  // 0x67
    {"sput-wide", Format::k21c, RefKind::Field},  // 0x68
    {"sput-object", Format::k21c, RefKind::Field},  // 0x69
    {"sput-boolean", Format::k21c, RefKind::Field},  // 0x6a
    {"sput-byte", Format::k21c, RefKind::Field},  // 0x6b
    {"sput-char", Format::k21c, RefKind::Field},  // 0x6c
    {"sput-short", Format::k21c, RefKind::Field},  // 0x6d
    {"invoke-virtual", Format::k35c, RefKind::Method},  // 0x6e
    {"invoke-super", Format::k35c, RefKind::Method},  // 0x6f
    {"invoke-direct", Format::k35c, RefKind::Method},  // 0x70
    {"invoke-static", Format::k35c, RefKind::Method},  // 0x71
    {"invoke-interface", Format::k35c, RefKind::Method},  // 0x72
    {"unused-73", Format::k10x, RefKind::None},  // 0x73
    {"invoke-virtual/range", Format::k3rc, RefKind::Method},  // 0x74
    {"invoke-super/range", Format::k3rc, RefKind::Method},  // 0x75
    {"invoke-direct/range", Format::k3rc, RefKind::Method},  // 0x76
    {"invoke-static/range", Format::k3rc, RefKind::Method},  // 0x77
    {"invoke-interface/range", Format::k3rc, RefKind::Method},  // 0x78
    {"unused-79", Format::k10x, RefKind::None},  // 0x79
    {"unused-7a", Format::k10x, RefKind::None},  // 0x7a
    {"neg-int", Format::k12x, RefKind::None},  // 0x7b
    {"not-int", Format::k12x, RefKind::None},  // 0x7c
    {"neg-long", Format::k12x, RefKind::None},  // 0x7d
    {"not-long", Format::k12x, RefKind::None},  // 0x7e
    {"neg-float", Format::k12x, RefKind::None},  // 0x7f
    {"neg-double", Format::k12x, RefKind::None},  // 0x80
    {"int-to-long", Format::k12x, RefKind::None},  // 0x81
    {"int-to-float", Format::k12x, RefKind::None},  // 0x82
    {"int-to-double", Format::k12x, RefKind::None},  // 0x83
    {"long-to-int", Format::k12x, RefKind::None},  // 0x84
    {"long-to-float", Format::k12x, RefKind::None},  // 0x85
    {"long-to-double", Format::k12x, RefKind::None},  // 0x86
    {"float-to-int", Format::k12x, RefKind::None},  // 0x87
    {"float-to-long", Format::k12x, RefKind::None},  // 0x88
    {"float-to-double", Format::k12x, RefKind::None},  // 0x89
    {"double-to-int", Format::k12x, RefKind::None},  // 0x8a
    {"double-to-long", Format::k12x, RefKind::None},  // 0x8b
    {"double-to-float", Format::k12x, RefKind::None},  // 0x8c
    {"int-to-byte", Format::k12x, RefKind::None},  // 0x8d
    {"int-to-char", Format::k12x, RefKind::None},  // 0x8e
    {"int-to-short", Format::k12x, RefKind::None},  // 0x8f
    {"add-int", Format::k23x, RefKind::None},  // 0x90
    {"sub-int", Format::k23x, RefKind::None},  // 0x91
    {"mul-int", Format::k23x, RefKind::None},  // 0x92
    {"div-int", Format::k23x, RefKind::None},  // 0x93
    {"rem-int", Format::k23x, RefKind::None},  // 0x94
    {"and-int", Format::k23x, RefKind::None},  // 0x95
    {"or-int", Format::k23x, RefKind::None},  // 0x96
    {"xor-int", Format::k23x, RefKind::None},  // 0x97
    {"shl-int", Format::k23x, RefKind::None},  // 0x98
    {"shr-int", Format::k23x, RefKind::None},  // 0x99
    {"ushr-int", Format::k23x, RefKind::None},  // 0x9a
    {"add-long", Format::k23x, RefKind::None},  // 0x9b
    {"sub-long", Format::k23x, RefKind::None},  // 0x9c
    {"mul-long", Format::k23x, RefKind::None},  // 0x9d
    {"div-long", Format::k23x, RefKind::None},  // 0x9e
    {"rem-long", Format::k23x, RefKind::None},  // 0x9f
    {"and-long", Format::k23x, RefKind::None},  // 0xa0
    {"or-long", Format::k23x, RefKind::None},  // 0xa1
    {"xor-long", Format::k23x, RefKind::None},  // 0xa2
    {"shl-long", Format::k23x, RefKind::None},  // 0xa3
    {"shr-long", Format::k23x, RefKind::None},  // 0xa4
    {"ushr-long", Format::k23x, RefKind::None},  // 0xa5
    {"add-float", Format::k23x, RefKind::None},  // 0xa6
    {"sub-float", Format::k23x, RefKind::None},  // 0xa7
    {"mul-float", Format::k23x, RefKind::None},  // 0xa8
    {"div-float", Format::k23x, RefKind::None},  // 0xa9
    {"rem-float", Format::k23x, RefKind::None},  // 0xaa
    {"add-double", Format::k23x, RefKind::None},  // 0xab
    {"sub-double", Format::k23x, RefKind::None},  // 0xac
    {"mul-double", Format::k23x, RefKind::None},  // 0xad
    {"div-double", Format::k23x, RefKind::None},  // 0xae
    {"rem-double", Format::k23x, RefKind::None},  // 0xaf
    {"add-int/2addr", Format::k12x, RefKind::None},  // 0xb0
    {"sub-int/2addr", Format::k12x, RefKind::None},  // 0xb1
    {"mul-int/2addr", Format::k12x, RefKind::None},  // 0xb2
    {"div-int/2addr", Format::k12x, RefKind::None},  // 0xb3
    {"rem-int/2addr", Format::k12x, RefKind::None},  // 0xb4
    {"and-int/2addr", Format::k12x, RefKind::None},  // 0xb5
    {"or-int/2addr", Format::k12x, RefKind::None},  // 0xb6
    {"xor-int/2addr", Format::k12x, RefKind::None},  // 0xb7
    {"shl-int/2addr", Format::k12x, RefKind::None},  // 0xb8
    {"shr-int/2addr", Format::k12x, RefKind::None},  // 0xb9
    {"ushr-int/2addr", Format::k12x, RefKind::None},  // 0xba
    {"add-long/2addr", Format::k12x, RefKind::None},  // 0xbb
    {"sub-long/2addr", Format::k12x, RefKind::None},  // 0xbc
    {"mul-long/2addr", Format::k12x, RefKind::None},  // 0xbd
    {"div-long/2addr", Format::k12x, RefKind::None},  // 0xbe
    {"rem-long/2addr", Format::k12x, RefKind::None},  // 0xbf
    {"and-long/2addr", Format::k12x, RefKind::None},  // 0xc0
    {"or-long/2addr", Format::k12x, RefKind::None},  // 0xc1
    {"xor-long/2addr", Format::k12x, RefKind::None},  // 0xc2
    {"shl-long/2addr", Format::k12x, RefKind::None},  // 0xc3
    {"shr-long/2addr", Format::k12x, RefKind::None},  // 0xc4
    {"ushr-long/2addr", Format::k12x, RefKind::None},  // 0xc5
    {"add-float/2addr", Format::k12x, RefKind::None},  // 0xc6
    {"sub-float/2addr", Format::k12x, RefKind::None},  // 0xc7
    {"mul-float/2addr", Format::k12x, RefKind::None},  // 0xc8
    {"div-float/2addr", Format::k12x, RefKind::None},  // 0xc9
    {"rem-float/2addr", Format::k12x, RefKind::None},  // 0xca
    {"add-double/2addr", Format::k12x, RefKind::None},  // 0xcb
    {"sub-double/2addr", Format::k12x, RefKind::None},  // 0xcc
    {"mul-double/2addr", Format::k12x, RefKind::None},  // 0xcd
    {"div-double/2addr", Format::k12x, RefKind::None},  // 0xce
    {"rem-double/2addr", Format::k12x, RefKind::None},  // 0xcf
    {"add-int/lit16", Format::k22s, RefKind::None},  // 0xd0
    {"rsub-int", Format::k22s, RefKind::None},  // 0xd1
    {"mul-int/lit16", Format::k22s, RefKind::None},  // 0xd2
    {"div-int/lit16", Format::k22s, RefKind::None},  // 0xd3
    {"rem-int/lit16", Format::k22s, RefKind::None},  // 0xd4
    {"and-int/lit16", Format::k22s, RefKind::None},  // 0xd5
    {"or-int/lit16", Format::k22s, RefKind::None},  // 0xd6
    {"xor-int/lit16", Format::k22s, RefKind::None},  // 0xd7
    {"add-int/lit8", Format::k22b, RefKind::None},  // 0xd8
    {"rsub-int/lit8", Format::k22b, RefKind::None},  // 0xd9
    {"mul-int/lit8", Format::k22b, RefKind::None},  // 0xda
    {"div-int/lit8", Format::k22b, RefKind::None},  // 0xdb
    {"rem-int/lit8", Format::k22b, RefKind::None},  // 0xdc
    {"and-int/lit8", Format::k22b, RefKind::None},  // 0xdd
    {"or-int/lit8", Format::k22b, RefKind::None},  // 0xde
    {"xor-int/lit8", Format::k22b, RefKind::None},  // 0xdf
    {"shl-int/lit8", Format::k22b, RefKind::None},  // 0xe0
    {"shr-int/lit8", Format::k22b, RefKind::None},  // 0xe1
    {"ushr-int/lit8", Format::k22b, RefKind::None},  // 0xe2
    {"unused-e3", Format::k10x, RefKind::None},  // 0xe3
    {"unused-e4", Format::k10x, RefKind::None},  // 0xe4
    {"unused-e5", Format::k10x, RefKind::None},  // 0xe5
    {"unused-e6", Format::k10x, RefKind::None},  // 0xe6
    {"unused-e7", Format::k10x, RefKind::None},  // 0xe7
    {"unused-e8", Format::k10x, RefKind::None},  // 0xe8
    {"unused-e9", Format::k10x, RefKind::None},  // 0xe9
    {"unused-ea", Format::k10x, RefKind::None},  // 0xea
    {"unused-eb", Format::k10x, RefKind::None},  // 0xeb
    {"unused-ec", Format::k10x, RefKind::None},  // 0xec
    {"unused-ed", Format::k10x, RefKind::None},  // 0xed
    {"unused-ee", Format::k10x, RefKind::None},  // 0xee
    {"unused-ef", Format::k10x, RefKind::None},  // 0xef
    {"unused-f0", Format::k10x, RefKind::None},  // 0xf0
    {"unused-f1", Format::k10x, RefKind::None},  // 0xf1
    {"unused-f2", Format::k10x, RefKind::None},  // 0xf2
    {"unused-f3", Format::k10x, RefKind::None},  // 0xf3
    {"unused-f4", Format::k10x, RefKind::None},  // 0xf4
    {"unused-f5", Format::k10x, RefKind::None},  // 0xf5
    {"unused-f6", Format::k10x, RefKind::None},  // 0xf6
    {"unused-f7", Format::k10x, RefKind::None},  // 0xf7
    {"unused-f8", Format::k10x, RefKind::None},  // 0xf8
    {"unused-f9", Format::k10x, RefKind::None},  // 0xf9
    {"invoke-polymorphic", Format::k45cc, RefKind::Method},  // 0xfa
    {"invoke-polymorphic/range", Format::k4rcc, RefKind::Method},  // 0xfb
    {"invoke-custom", Format::k35c, RefKind::CallSite},  // 0xfc
    {"invoke-custom/range", Format::k3rc, RefKind::CallSite},  // 0xfd
    {"const-method-handle", Format::k21c, RefKind::MethodHandle},  // 0xfe
    {"const-method-type", Format::k21c, RefKind::Proto},  // 0xff
}};

constexpr std::uint16_t kPackedSwitchIdent = 0x0100;
constexpr std::uint16_t kSparseSwitchIdent = 0x0200;
constexpr std::uint16_t kFillArrayDataIdent = 0x0300;

}  // namespace

const OpcodeInfo& opcode_info(std::uint8_t opcode) { return kOpcodes[opcode]; }

unsigned format_width(Format f) {
  switch (f) {
    case Format::k10x:
    case Format::k12x:
    case Format::k11n:
    case Format::k11x:
    case Format::k10t:
      return 1;
    case Format::k20t:
    case Format::k22x:
    case Format::k21t:
    case Format::k21s:
    case Format::k21h:
    case Format::k21c:
    case Format::k23x:
    case Format::k22b:
    case Format::k22t:
    case Format::k22s:
    case Format::k22c:
      return 2;
    case Format::k30t:
    case Format::k32x:
    case Format::k31i:
    case Format::k31t:
    case Format::k31c:
    case Format::k35c:
    case Format::k3rc:
      return 3;
    case Format::k45cc:
    case Format::k4rcc:
      return 4;
    case Format::k51l:
      return 5;
  }
  return 1;
}

std::vector<Instruction> decode_instructions(const CodeUnits& code) {
  std::vector<Instruction> out;
  const std::size_t n = code.size();
  std::size_t pc = 0;
  auto fail = [&](const char* what) {
    throw Error(ErrorCode::OffsetOutOfBounds,
                std::string(what) + " at code unit " + std::to_string(pc));
  };
  while (pc < n) {
    const std::uint16_t unit = code[pc];
    Instruction insn;
    insn.offset = static_cast<std::uint32_t>(pc);
    insn.opcode = static_cast<std::uint8_t>(unit & 0xff);
    std::uint64_t width = format_width(kOpcodes[insn.opcode].format);
    if (unit == kPackedSwitchIdent) {
      if (pc + 2 > n) fail("truncated packed-switch payload");
      insn.payload = Payload::PackedSwitch;
      width = 4 + std::uint64_t{code[pc + 1]} * 2;
    } else if (unit == kSparseSwitchIdent) {
      if (pc + 2 > n) fail("truncated sparse-switch payload");
      insn.payload = Payload::SparseSwitch;
      width = 2 + std::uint64_t{code[pc + 1]} * 4;
    } else if (unit == kFillArrayDataIdent) {
      if (pc + 4 > n) fail("truncated fill-array-data payload");
      insn.payload = Payload::FillArrayData;
      const std::uint64_t element_width = code[pc + 1];
      const std::uint64_t count = code[pc + 2] | (std::uint64_t{code[pc + 3]} << 16);
      width = 4 + (element_width * count + 1) / 2;
    }
    if (width > n - pc) fail("instruction runs past end of code");
    insn.width = static_cast<std::uint32_t>(width);
    out.push_back(insn);
    pc += static_cast<std::size_t>(width);
  }
  return out;
}

}  // namespace apksecrets::dalvik
