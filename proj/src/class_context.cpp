#include "apksecrets/class_context.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "apksecrets/error.hpp"

namespace apksecrets {
namespace {

using dalvik::CodeUnits;
using dalvik::Format;
using dalvik::Instruction;
using dalvik::RefKind;

std::int32_t sext(std::uint32_t v, unsigned bits) {
  const std::uint32_t m = 1u << (bits - 1);
  return static_cast<std::int32_t>((v ^ m) - m);
}

std::string reference(const DexLayout& d, RefKind kind, std::uint32_t idx) {
  try {
    switch (kind) {
      case RefKind::String:
        return quote_literal(d.string_at(idx));
      case RefKind::Type:
        return d.type_name(idx);
      case RefKind::Field: {
        const FieldId& f = d.field_ids.at(idx);
        return d.type_name(f.class_idx) + "." + d.string_at(f.name_idx) + ":" + d.type_name(f.type_idx);
      }
      case RefKind::Method: {
        const MethodId& m = d.method_ids.at(idx);
        return d.type_name(m.class_idx) + "." + d.method_signature(idx);
      }
      default:
        return fmt::format("@{}", idx);
    }
  } catch (const std::exception&) {
    return fmt::format("<bad ref @{}>", idx);
  }
}

std::string reg_list_35c(const CodeUnits& c, std::uint32_t pc) {
  const std::uint16_t u0 = c[pc];
  const std::uint16_t u2 = c[pc + 2];
  const unsigned count = u0 >> 12;
  const unsigned regs[5] = {u2 & 0xfu, (u2 >> 4) & 0xfu, (u2 >> 8) & 0xfu, (u2 >> 12) & 0xfu,
                            (u0 >> 8) & 0xfu};
  std::string out = "{";
  for (unsigned i = 0; i < count && i < 5; ++i) {
    if (i) out += ", ";
    out += fmt::format("v{}", regs[i]);
  }
  return out + "}";
}

std::string reg_range(const CodeUnits& c, std::uint32_t pc) {
  const unsigned count = c[pc] >> 8;
  const unsigned first = c[pc + 2];
  if (count == 0) return "{}";
  return fmt::format("{{v{} .. v{}}}", first, first + count - 1);
}

}  // namespace

std::string quote_literal(std::string_view s, std::size_t max_chars) {
  std::string out = "\"";
  std::size_t n = 0;
  for (const char ch : s) {
    if (n++ >= max_chars) {
      out += "...";
      break;
    }
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          out += fmt::format("\\u{:04x}", static_cast<unsigned>(ch));
        } else {
          out.push_back(ch);
        }
    }
  }
  return out + "\"";
}

std::string_view mnemonic(const Instruction& insn) {
  switch (insn.payload) {
    case dalvik::Payload::PackedSwitch: return "packed-switch-payload";
    case dalvik::Payload::SparseSwitch: return "sparse-switch-payload";
    case dalvik::Payload::FillArrayData: return "fill-array-data-payload";
    case dalvik::Payload::None: break;
  }
  return dalvik::opcode_info(insn.opcode).mnemonic;
}

std::string disassemble(const DexLayout& d, const CodeUnits& c, const Instruction& insn) {
  if (insn.payload != dalvik::Payload::None) return std::string(mnemonic(insn));
  const auto& info = dalvik::opcode_info(insn.opcode);
  const std::uint32_t pc = insn.offset;
  const std::uint16_t u0 = c[pc];
  const unsigned a4 = (u0 >> 8) & 0xf;
  const unsigned b4 = u0 >> 12;
  const unsigned aa = u0 >> 8;
  auto u = [&](unsigned i) { return c[pc + i]; };
  auto u32 = [&](unsigned i) { return std::uint32_t{c[pc + i]} | (std::uint32_t{c[pc + i + 1]} << 16); };
  std::string ops;
  switch (info.format) {
    case Format::k10x: break;
    case Format::k12x: ops = fmt::format("v{}, v{}", a4, b4); break;
    case Format::k11n: ops = fmt::format("v{}, #{}", a4, sext(b4, 4)); break;
    case Format::k11x: ops = fmt::format("v{}", aa); break;
    case Format::k10t: ops = fmt::format("{:+}", sext(aa, 8)); break;
    case Format::k20t: ops = fmt::format("{:+}", sext(u(1), 16)); break;
    case Format::k22x: ops = fmt::format("v{}, v{}", aa, u(1)); break;
    case Format::k21t: ops = fmt::format("v{}, {:+}", aa, sext(u(1), 16)); break;
    case Format::k21s: ops = fmt::format("v{}, #{}", aa, sext(u(1), 16)); break;
    case Format::k21h: ops = fmt::format("v{}, #0x{:x}", aa, u(1)); break;
    case Format::k21c: ops = fmt::format("v{}, {}", aa, reference(d, info.ref, u(1))); break;
    case Format::k23x: ops = fmt::format("v{}, v{}, v{}", aa, u(1) & 0xff, u(1) >> 8); break;
    case Format::k22b: ops = fmt::format("v{}, v{}, #{}", aa, u(1) & 0xff, sext(u(1) >> 8, 8)); break;
    case Format::k22t: ops = fmt::format("v{}, v{}, {:+}", a4, b4, sext(u(1), 16)); break;
    case Format::k22s: ops = fmt::format("v{}, v{}, #{}", a4, b4, sext(u(1), 16)); break;
    case Format::k22c: ops = fmt::format("v{}, v{}, {}", a4, b4, reference(d, info.ref, u(1))); break;
    case Format::k30t: ops = fmt::format("{:+}", static_cast<std::int32_t>(u32(1))); break;
    case Format::k32x: ops = fmt::format("v{}, v{}", u(1), u(2)); break;
    case Format::k31i: ops = fmt::format("v{}, #{}", aa, static_cast<std::int32_t>(u32(1))); break;
    case Format::k31t: ops = fmt::format("v{}, {:+}", aa, static_cast<std::int32_t>(u32(1))); break;
    case Format::k31c: ops = fmt::format("v{}, {}", aa, reference(d, info.ref, u32(1))); break;
    case Format::k35c:
    case Format::k45cc:
      ops = fmt::format("{}, {}", reg_list_35c(c, pc), reference(d, info.ref, u(1)));
      break;
    case Format::k3rc:
    case Format::k4rcc:
      ops = fmt::format("{}, {}", reg_range(c, pc), reference(d, info.ref, u(1)));
      break;
    case Format::k51l: {
      const std::uint64_t lit = u32(1) | (std::uint64_t{u32(3)} << 32);
      ops = fmt::format("v{}, #{}", aa, static_cast<std::int64_t>(lit));
      break;
    }
  }
  return ops.empty() ? std::string(info.mnemonic) : fmt::format("{} {}", info.mnemonic, ops);
}

ClassContext render_class_context(const DexLayout& d, std::string_view class_name,
                                  std::span<const CodeSite> candidate_sites,
                                  const ClassContextOptions& opts) {
  const ClassDef* def = d.find_class(class_name);
  if (!def) throw Error(ErrorCode::ClassNotFound, std::string(class_name));

  ClassContext ctx;
  ctx.class_name = std::string(class_name);
  if (def->superclass_idx != kNoIndex) ctx.superclass_name = d.type_name(def->superclass_idx);
  for (const auto t : d.type_list(def->interfaces_off)) ctx.interfaces.push_back(d.type_name(t));

  const ClassData cd = d.class_data(*def);
  for (const auto* list : {&cd.static_fields, &cd.instance_fields}) {
    for (const auto& f : *list) {
      if (f.field_idx >= d.field_ids.size()) {
        throw Error(ErrorCode::OffsetOutOfBounds, "field index " + std::to_string(f.field_idx));
      }
      const FieldId& id = d.field_ids[f.field_idx];
      ctx.field_summaries.push_back(d.string_at(id.name_idx) + ":" + d.type_name(id.type_idx));
    }
  }

  struct Decoded {
    std::string signature;
    CodeItem code;
    std::vector<Instruction> insns;
  };
  std::vector<Decoded> decoded;
  for (const auto* list : {&cd.direct_methods, &cd.virtual_methods}) {
    for (const auto& m : *list) {
      std::string sig = d.method_signature(m.method_idx);
      ctx.method_summaries.push_back(sig);
      if (m.code_off == 0) continue;
      try {
        const CodeItem code = d.code_item(m.code_off);
        auto insns = dalvik::decode_instructions(CodeUnits(code.insns(d.data())));
        MethodStrings ms{sig, {}};
        const CodeUnits units(code.insns(d.data()));
        for (const auto& insn : insns) {
          if (insn.payload != dalvik::Payload::None) continue;
          if (insn.opcode == 0x1a) ms.strings.push_back(d.string_at(units[insn.offset + 1]));
          if (insn.opcode == 0x1b) {
            ms.strings.push_back(d.string_at(units[insn.offset + 1] |
                                             (std::uint32_t{units[insn.offset + 2]} << 16)));
          }
        }
        if (!ms.strings.empty()) ctx.string_constants.push_back(std::move(ms));
        decoded.push_back({std::move(sig), code, std::move(insns)});
      } catch (const Error&) {
        // Unwalkable method: listed by signature only.
      }
    }
  }

  for (const auto& site : candidate_sites) {
    if (site.class_name != class_name) continue;
    if (!site.is_instruction()) {
      ctx.disasm_windows.push_back(fmt::format("static field {} (initial value)", site.method_signature));
      continue;
    }
    const auto m = std::find_if(decoded.begin(), decoded.end(),
                                [&](const Decoded& x) { return x.signature == site.method_signature; });
    if (m == decoded.end()) continue;
    const auto at = std::find_if(m->insns.begin(), m->insns.end(),
                                 [&](const Instruction& i) { return i.offset == site.insn_offset; });
    if (at == m->insns.end()) continue;
    const std::size_t center = static_cast<std::size_t>(at - m->insns.begin());
    const std::size_t lo = center >= opts.window ? center - opts.window : 0;
    const std::size_t hi = std::min(m->insns.size(), center + opts.window + 1);
    const CodeUnits units(m->code.insns(d.data()));
    std::string w = fmt::format("{} @{:04x}\n", site.method_signature, site.insn_offset);
    for (std::size_t i = lo; i < hi; ++i) {
      w += fmt::format("  {} {:04x}: {}\n", i == center ? '>' : ' ', m->insns[i].offset,
                       disassemble(d, units, m->insns[i]));
    }
    ctx.disasm_windows.push_back(std::move(w));
  }

  std::string t = "class " + ctx.class_name;
  if (!ctx.superclass_name.empty()) t += " extends " + ctx.superclass_name;
  for (std::size_t i = 0; i < ctx.interfaces.size(); ++i) {
    t += (i == 0 ? " implements " : ", ") + ctx.interfaces[i];
  }
  t += "\nfields:\n";
  for (const auto& f : ctx.field_summaries) t += "  " + f + "\n";
  if (!ctx.method_summaries.empty()) {
    t += "methods:\n";
    for (const auto& m : ctx.method_summaries) t += "  " + m + "\n";
  }
  if (!ctx.string_constants.empty()) {
    t += "strings:\n";
    for (const auto& ms : ctx.string_constants) {
      t += "  " + ms.method_signature + "\n";
      for (const auto& s : ms.strings) t += "    " + quote_literal(s) + "\n";
    }
  }
  if (!ctx.disasm_windows.empty()) {
    t += "code:\n";
    for (const auto& w : ctx.disasm_windows) t += w;
  }

  if (t.size() > opts.char_budget) {
    std::size_t keep = opts.char_budget > kTruncationMarker.size()
                           ? opts.char_budget - kTruncationMarker.size()
                           : 0;
    while (keep > 0 && (static_cast<unsigned char>(t[keep]) & 0xC0) == 0x80) --keep;
    t.resize(keep);
    if (opts.char_budget >= kTruncationMarker.size()) t += kTruncationMarker;
    ctx.truncated = true;
  }
  ctx.text = std::move(t);
  return ctx;
}

}  // namespace apksecrets
