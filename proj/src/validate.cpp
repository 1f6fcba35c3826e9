#include <array>
#include <cctype>

#include "apksecrets/validators.hpp"

namespace apksecrets {

std::string_view to_string(ValidationStatus s) {
  switch (s) {
    case ValidationStatus::Confirmed: return "CONFIRMED";
    case ValidationStatus::ConfirmedAfterBase64: return "CONFIRMED_AFTER_BASE64";
    case ValidationStatus::PublicOrTest: return "PUBLIC_OR_TEST";
    case ValidationStatus::Unconfirmed: return "UNCONFIRMED";
  }
  return "?";
}

std::optional<ValidationStatus> validation_status_from_string(std::string_view s) {
  for (auto v : {ValidationStatus::Confirmed, ValidationStatus::ConfirmedAfterBase64,
                 ValidationStatus::PublicOrTest, ValidationStatus::Unconfirmed}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

ValidationResult validate(std::string_view value, const Catalog& catalog) {
  ValidationResult out;
  if (value.empty()) return out;
  for (const auto& rule : catalog.rules) {
    if (rule.tier == RuleTier::Indicative) {
      if (!out.indicative_service && rule.matches(value)) out.indicative_service = rule.service;
      continue;
    }
    if (!rule.matches(value)) continue;
    out.status = rule.public_or_test ? ValidationStatus::PublicOrTest : ValidationStatus::Confirmed;
    out.matched_service = rule.service;
    out.rule_id = rule.id;
    out.indicative_service.reset();
    return out;
  }
  return out;
}

namespace {

constexpr std::array<int8_t, 256> decode_table(bool url_safe) {
  std::array<int8_t, 256> t{};
  for (auto& v : t) v = -1;
  const char* alpha = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  for (int i = 0; i < 62; ++i) t[static_cast<unsigned char>(alpha[i])] = static_cast<int8_t>(i);
  t[url_safe ? '-' : '+'] = 62;
  t[url_safe ? '_' : '/'] = 63;
  return t;
}

constexpr auto kStd = decode_table(false);
constexpr auto kUrl = decode_table(true);

bool printable(std::string_view s) {
  for (unsigned char c : s) {
    if (c == '\t' || c == '\n' || c == '\r') continue;
    if (c < 0x20 || c == 0x7f) return false;
  }
  return true;
}

}  // namespace

std::optional<std::string> base64_decode(std::string_view value) {
  if (value.size() < kMinBase64Length) return std::nullopt;
  std::string_view body = value;
  std::size_t pad = 0;
  while (!body.empty() && body.back() == '=' && pad < 2) {
    body.remove_suffix(1);
    ++pad;
  }
  if (body.empty()) return std::nullopt;
  const std::size_t rem = body.size() % 4;
  if (rem == 1) return std::nullopt;
  if (pad && (body.size() + pad) % 4 != 0) return std::nullopt;

  bool has_std = false, has_url = false;
  for (unsigned char c : body) {
    if (c == '+' || c == '/') has_std = true;
    else if (c == '-' || c == '_') has_url = true;
    else if (kStd[c] < 0) return std::nullopt;
  }
  if (has_std && has_url) return std::nullopt;
  const auto& table = has_url ? kUrl : kStd;

  std::string out;
  out.reserve(body.size() * 3 / 4);
  uint32_t acc = 0;
  int bits = 0;
  for (unsigned char c : body) {
    acc = (acc << 6) | static_cast<uint32_t>(table[c]);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  // Leftover bits must be zero for a canonical encoding.
  if (bits > 0 && (acc & ((1u << bits) - 1)) != 0) return std::nullopt;
  return out;
}

ValidationResult base64_rescan(std::string_view value, const Catalog& catalog) {
  ValidationResult none;
  auto decoded = base64_decode(value);
  if (!decoded || decoded->empty() || !printable(*decoded)) return none;
  ValidationResult inner = validate(*decoded, catalog);
  if (inner.status == ValidationStatus::Confirmed) {
    inner.status = ValidationStatus::ConfirmedAfterBase64;
    inner.decoded_form = std::move(*decoded);
    return inner;
  }
  if (inner.status == ValidationStatus::PublicOrTest) return inner;
  return none;
}

ValidationResult validate_with_rescan(std::string_view value, const Catalog& catalog) {
  ValidationResult direct = validate(value, catalog);
  if (direct.status != ValidationStatus::Unconfirmed) return direct;
  ValidationResult rescanned = base64_rescan(value, catalog);
  if (rescanned.status != ValidationStatus::Unconfirmed) return rescanned;
  return direct;
}

std::string normalize_label_form(std::string_view raw) {
  std::string out;
  bool pending_sep = false;
  for (unsigned char c : raw) {
    if (std::isalnum(c)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::toupper(c)));
    } else if (c >= 0x80) {
      // Keep non-ASCII bytes verbatim; they are part of the label text.
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(c));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

std::string normalize_label(std::string_view raw, const Catalog& catalog) {
  std::string form = normalize_label_form(raw);
  if (form.empty()) return "UNLABELED";
  if (form == "NOT_SECRET") return std::string(kNotSecretLabel);
  auto it = catalog.synonyms.find(form);
  return it == catalog.synonyms.end() ? form : it->second;
}

bool is_not_secret_label(std::string_view raw) { return normalize_label_form(raw) == "NOT_SECRET"; }

}  // namespace apksecrets
