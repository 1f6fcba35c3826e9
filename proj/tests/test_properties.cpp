#include <doctest.h>

#include <algorithm>
#include <random>
#include <regex>
#include <set>

#include "apksecrets/code_strings.hpp"
#include "apksecrets/dalvik.hpp"
#include "apksecrets/error.hpp"
#include "apksecrets/llm.hpp"
#include "apksecrets/mutf8.hpp"
#include "apksecrets/prefilter.hpp"
#include "apksecrets/report.hpp"
#include "apksecrets/validators.hpp"
#include "fixture_apps.hpp"
#include "reference.hpp"
#include "samples.hpp"
#include "test_util.hpp"

using namespace apksecrets;

namespace {

std::u16string random_units(std::mt19937_64& rng, bool paired_only) {
  std::u16string u;
  const int n = static_cast<int>(rng() % 24);
  for (int i = 0; i < n; ++i) {
    switch (rng() % 6) {
      case 0: u += static_cast<char16_t>(rng() % 0x80); break;  // NUL included
      case 1: u += static_cast<char16_t>(0x80 + rng() % 0x780); break;
      case 2: u += static_cast<char16_t>(0x800 + rng() % (0xD800 - 0x800)); break;
      case 3: u += static_cast<char16_t>(0xE000 + rng() % 0x2000); break;
      case 4:
        u += static_cast<char16_t>(0xD800 + rng() % 0x400);
        u += static_cast<char16_t>(0xDC00 + rng() % 0x400);
        break;
      default:
        if (paired_only) {
          u += static_cast<char16_t>('a' + rng() % 26);
        } else {
          u += static_cast<char16_t>(0xD800 + rng() % 0x800);  // lone surrogate
        }
    }
  }
  return u;
}

std::string random_ascii(std::mt19937_64& rng, std::size_t lo, std::size_t hi, const std::string& alphabet) {
  std::string s(lo + rng() % (hi - lo + 1), ' ');
  for (auto& c : s) c = alphabet[rng() % alphabet.size()];
  return s;
}

const std::string kPrintable = [] {
  std::string s;
  for (char c = ' '; c <= '~'; ++c) s += c;
  return s;
}();

// Small edits biased towards the regex boundaries.
std::string mutate(std::mt19937_64& rng, std::string s) {
  const int edits = 1 + static_cast<int>(rng() % 3);
  for (int e = 0; e < edits; ++e) {
    const std::size_t pos = s.empty() ? 0 : rng() % s.size();
    switch (rng() % 4) {
      case 0:
        if (!s.empty()) s.erase(pos, 1);
        break;
      case 1: s.insert(s.begin() + static_cast<long>(pos), kPrintable[rng() % kPrintable.size()]); break;
      case 2:
        if (!s.empty()) s[pos] = kPrintable[rng() % kPrintable.size()];
        break;
      default: s += kPrintable[rng() % kPrintable.size()];
    }
  }
  return s;
}

Finding make_finding(const std::string& value, const std::string& label) {
  Finding f;
  f.value = value;
  f.value_sha256 = sha256_hex(value);
  f.raw_label = label;
  f.canonical_label = label;
  f.validation.status = ValidationStatus::Confirmed;
  f.validation.matched_service = label;
  f.resource_entry = "e";
  return f;
}

}  // namespace

TEST_SUITE("property_mutf8") {
  TEST_CASE("round trip of well-formed unit sequences") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 10000; ++t) {
      const auto units = random_units(rng, true);
      const auto bytes = reference::encode_mutf8(units);
      const auto d = decode_mutf8(bytes);
      REQUIRE(d.ok);
      CHECK(d.utf16_length == units.size());
      CHECK(d.utf8 == *reference::utf16_to_utf8(units));
    }
  }

  TEST_CASE("random bytes agree with the reference decoder") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20000; ++t) {
      std::vector<std::uint8_t> bytes;
      if (t % 2) {
        bytes = reference::encode_mutf8(random_units(rng, false));
        if (!bytes.empty() && rng() % 2) bytes[rng() % bytes.size()] = static_cast<std::uint8_t>(rng());
      } else {
        bytes.resize(rng() % 16);
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
      }
      const auto d = decode_mutf8(bytes);
      std::optional<std::string> expect;
      if (const auto units = reference::decode_mutf8_units(bytes)) {
        expect = reference::utf16_to_utf8(*units);
        if (expect) CHECK(d.utf16_length == units->size());
      }
      CHECK(d.ok == expect.has_value());
      if (expect) CHECK(d.utf8 == *expect);
      CHECK(reference::valid_utf8(d.utf8));
    }
  }

  TEST_CASE("string_data never reads past the buffer") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10000; ++t) {
      Bytes data(rng() % 12);
      for (auto& b : data) b = static_cast<std::uint8_t>(rng() % 4 == 0 ? 0 : rng());
      const std::uint64_t off = rng() % (data.size() + 3);
      try {
        const auto s = decode_string_data(data, off);
        CHECK(reference::valid_utf8(s.utf8));
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OffsetOutOfBounds);
      }
    }
  }
}

TEST_SUITE("property_dalvik") {
  // Width in code units is the first digit of the format id.
  constexpr unsigned kWidths[] = {1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 4, 4, 5};

  TEST_CASE("format widths follow the format id") {
    for (int f = 0; f <= static_cast<int>(dalvik::Format::k51l); ++f) {
      CHECK(dalvik::format_width(static_cast<dalvik::Format>(f)) == kWidths[f]);
    }
  }

  TEST_CASE("random streams decode to widths summing to the stream length") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 5000; ++t) {
      std::vector<std::uint16_t> units;
      std::vector<std::uint32_t> starts;
      const int n = 1 + static_cast<int>(rng() % 40);
      for (int i = 0; i < n; ++i) {
        starts.push_back(static_cast<std::uint32_t>(units.size()));
        const auto op = static_cast<std::uint8_t>(rng());
        const unsigned w = kWidths[static_cast<int>(dalvik::opcode_info(op).format)];
        units.push_back(op == 0 ? 0 : static_cast<std::uint16_t>(op | (rng() & 0xFF00)));
        for (unsigned k = 1; k < w; ++k) units.push_back(static_cast<std::uint16_t>(rng()));
        if (rng() % 10 == 0) {
          // A packed-switch payload with `size` targets.
          starts.push_back(static_cast<std::uint32_t>(units.size()));
          const std::uint16_t size = rng() % 5;
          units.push_back(0x0100);
          units.push_back(size);
          for (int k = 0; k < 2 + 2 * size; ++k) units.push_back(static_cast<std::uint16_t>(rng()));
        }
      }
      Bytes bytes;
      for (auto u : units) {
        bytes.push_back(static_cast<std::uint8_t>(u));
        bytes.push_back(static_cast<std::uint8_t>(u >> 8));
      }
      const auto insns = dalvik::decode_instructions(dalvik::CodeUnits(bytes));
      REQUIRE(insns.size() == starts.size());
      std::uint32_t sum = 0;
      for (std::size_t i = 0; i < insns.size(); ++i) {
        CHECK(insns[i].offset == starts[i]);
        sum += insns[i].width;
      }
      CHECK(sum == units.size());
    }
  }

  TEST_CASE("fixture methods cover insns exactly") {
    for (const auto& app : fixtures::all_fixture_apps()) {
      const auto a = testutil::artifact_from(app.apk);
      for (const auto& layout : testutil::layouts_of(a)) {
        for (const auto& def : layout.class_defs) {
          if (def.class_data_off == 0) continue;
          const auto cd = layout.class_data(def);
          for (const auto* list : {&cd.direct_methods, &cd.virtual_methods}) {
            for (const auto& m : *list) {
              if (m.code_off == 0) continue;
              const auto item = layout.code_item(m.code_off);
              const auto insns = dalvik::decode_instructions(dalvik::CodeUnits(item.insns(layout.data())));
              std::uint32_t sum = 0;
              for (const auto& i : insns) sum += i.width;
              CHECK(sum == item.insns_size);
            }
          }
        }
      }
    }
  }
}

TEST_SUITE("property_prefilter") {
  TEST_CASE("uuid rule equals a brute-force regex") {
    std::mt19937_64 rng(5);
    const std::string hex = "0123456789abcdefABCDEF";
    for (int t = 0; t < 20000; ++t) {
      std::string s;
      for (int g : {8, 4, 4, 4, 12}) {
        if (!s.empty()) s += '-';
        s += random_ascii(rng, static_cast<std::size_t>(g), static_cast<std::size_t>(g), hex);
      }
      if (rng() % 3) s = mutate(rng, s);
      if (rng() % 5 == 0) s[rng() % s.size()] = "-gGzZ: "[rng() % 7];
      CAPTURE(s);
      CHECK(is_uuid_like(s) == reference::uuid_like(s));
    }
  }

  TEST_CASE("partition and stricter configs keep subsets") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 200; ++t) {
      std::vector<ExtractedString> in;
      for (int i = 0; i < 60; ++i) {
        ExtractedString s;
        s.value = rng() % 4 == 0 ? "eyJ" + random_ascii(rng, 0, 20, kPrintable) : random_ascii(rng, 0, 50, kPrintable);
        in.push_back(s);
      }
      PrefilterConfig loose;
      loose.min_length = rng() % 12;
      loose.max_length = 30 + rng() % 30;
      loose.max_space_ratio = static_cast<double>(rng() % 5) / 10.0;
      loose.min_charset_classes = static_cast<int>(rng() % 3);
      loose.min_entropy = static_cast<double>(rng() % 3);
      PrefilterConfig strict = loose;
      strict.min_length += rng() % 5;
      strict.max_length -= rng() % 5;
      strict.max_space_ratio = std::max(0.0, strict.max_space_ratio - 0.1 * static_cast<double>(rng() % 2));
      strict.min_charset_classes = std::min(4, strict.min_charset_classes + static_cast<int>(rng() % 2));
      strict.min_entropy += static_cast<double>(rng() % 2);
      if (rng() % 2) strict.allowlist_prefixes.clear();

      const auto a = prefilter(in, loose);
      const auto b = prefilter(in, strict);
      CHECK(a.kept.size() + a.dropped.size() == in.size());
      CHECK(b.kept.size() + b.dropped.size() == in.size());
      // Kept strings keep their input order.
      std::multiset<std::string> all, seen;
      for (const auto& s : in) all.insert(s.value);
      for (const auto& s : a.kept) seen.insert(s.value);
      for (const auto& d : a.dropped) seen.insert(d.string.value);
      CHECK(seen == all);
      std::size_t j = 0;
      for (const auto& s : in) {
        if (j < a.kept.size() && a.kept[j].value == s.value) ++j;
      }
      CHECK(j == a.kept.size());
      std::multiset<std::string> ka, kb;
      for (const auto& s : a.kept) ka.insert(s.value);
      for (const auto& s : b.kept) kb.insert(s.value);
      CHECK(std::includes(ka.begin(), ka.end(), kb.begin(), kb.end()));
    }
  }
}

TEST_SUITE("property_validators") {
  TEST_CASE("label normalization is idempotent") {
    std::mt19937_64 rng(7);
    const auto& cat = default_catalog();
    for (int t = 0; t < 5000; ++t) {
      const std::string raw = random_ascii(rng, 0, 24, "abcXYZ _-.09");
      const auto once = normalize_label_form(raw);
      CHECK(normalize_label_form(once) == once);
      const auto canon = normalize_label(raw, cat);
      CHECK(normalize_label(canon, cat) == canon);
    }
    for (const auto& [canon, _] : cat.synonyms) CHECK(normalize_label(canon, cat) == normalize_label(canon, cat));
  }

  TEST_CASE("base64 of a confirming sample confirms after decoding") {
    const auto& cat = default_catalog();
    for (const auto& [id, sample] : testutil::conforming_samples()) {
      const auto direct = validate(sample, cat);
      if (direct.status == ValidationStatus::Unconfirmed) continue;
      const std::string enc = reference::base64(sample);
      if (validate(enc, cat).status != ValidationStatus::Unconfirmed) continue;
      CAPTURE(id);
      const auto r = validate_with_rescan(enc, cat);
      CHECK(r.matched_service == direct.matched_service);
      if (direct.status == ValidationStatus::Confirmed) {
        CHECK(r.status == ValidationStatus::ConfirmedAfterBase64);
        CHECK(r.decoded_form == sample);
      } else {
        // decoded_form only accompanies CONFIRMED_AFTER_BASE64
        CHECK(r.status == ValidationStatus::PublicOrTest);
        CHECK_FALSE(r.decoded_form.has_value());
      }
    }
  }

  TEST_CASE("rule matching agrees with std::regex") {
    std::mt19937_64 rng(8);
    const auto& cat = default_catalog();
    const auto samples = testutil::conforming_samples();
    std::size_t hits = 0;
    for (const auto& rule : cat.rules) {
      CAPTURE(rule.id);
      auto flags = std::regex::ECMAScript;
      if (rule.icase) flags |= std::regex::icase;
      const std::regex re(rule.pattern, flags);
      auto ref = [&](const std::string& s) {
        return rule.mode == MatchMode::Full ? std::regex_match(s, re) : std::regex_search(s, re);
      };
      for (const auto& [id, sample] : samples) {
        for (int t = 0; t < 40; ++t) {
          const std::string s = t == 0 ? sample : mutate(rng, sample);
          CAPTURE(s);
          const bool got = rule.matches(s);
          CHECK(got == ref(s));
          hits += got;
        }
      }
    }
    CHECK(hits > samples.size());
  }
}

TEST_SUITE("property_ledger") {
  TEST_CASE("totals equal a hand sum") {
    std::mt19937_64 rng(9);
    ProviderSpec spec;
    for (int t = 0; t < 500; ++t) {
      CostLedger ledger;
      std::int64_t pico = 0, pt = 0, ct = 0;
      std::size_t calls = 0, cached = 0;
      const int n = static_cast<int>(rng() % 30);
      for (int i = 0; i < n; ++i) {
        LedgerRecord r;
        r.phase = static_cast<Phase>(rng() % 4);
        r.item = static_cast<std::size_t>(i);
        r.cached = rng() % 5 == 0;
        if (!r.cached) {
          r.prompt_tokens = static_cast<std::int64_t>(rng() % 100000);
          r.completion_tokens = static_cast<std::int64_t>(rng() % 5000);
          r.cost = call_cost(spec, r.prompt_tokens, r.completion_tokens);
          // nanodollars per 1k tokens are picodollars per token
          CHECK(r.cost.pico ==
                r.prompt_tokens * spec.prompt_price_nano_per_1k + r.completion_tokens * spec.completion_price_nano_per_1k);
          pico += r.cost.pico;
          pt += r.prompt_tokens;
          ct += r.completion_tokens;
          ++calls;
        } else {
          ++cached;
        }
        ledger.append(r);
      }
      const auto tot = ledger.totals();
      CHECK(tot.cost.pico == pico);
      CHECK(tot.calls == calls);
      CHECK(tot.cached == cached);
      CHECK(tot.prompt_tokens == pt);
      CHECK(tot.completion_tokens == ct);
      CHECK(sum_ledger(ledger.records()) == tot);
    }
  }
}

TEST_SUITE("property_report") {
  TEST_CASE("disclosure never leaks six characters of a value") {
    std::mt19937_64 rng(10);
    const std::vector<std::string> labels = {"GOOGLE_API_KEY", "JWT_TOKEN", "STRIPE_STANDARD_API_KEY", "RAZORPAY",
                                             "SOME_NEW_SERVICE"};
    const std::string alnum = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    for (int t = 0; t < 1000; ++t) {
      ScanReport r;
      r.app_sha256 = sha256_hex(std::to_string(t));
      r.package_name = "com.example.t" + std::to_string(t);
      const int n = 1 + static_cast<int>(rng() % 5);
      for (int i = 0; i < n; ++i) {
        r.findings.push_back(make_finding(random_ascii(rng, 10, 60, alnum), labels[rng() % labels.size()]));
      }
      if (rng() % 2) r = redacted(r);
      const auto doc = disclosure_export(r, std::string("security@example.com"));
      for (const auto& f : r.findings) {
        for (const std::string& v : {f.value, f.value_sha256}) {
          for (std::size_t i = 0; i + 6 <= v.size(); ++i) {
            if (v.substr(i, 6).find('*') != std::string::npos) continue;
            if (doc.find(v.substr(i, 6)) != std::string::npos) {
              FAIL("leak of " << v.substr(i, 6));
            }
          }
        }
      }
    }
  }

  TEST_CASE("aggregate ignores report order") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
      std::vector<ScanReport> rs;
      for (int i = 0; i < 12; ++i) {
        ScanReport r;
        r.app_sha256 = "app" + std::to_string(i);
        const int n = static_cast<int>(rng() % 3);
        for (int k = 0; k < n; ++k) r.findings.push_back(make_finding("v" + std::to_string(rng()), "L" + std::to_string(rng() % 3)));
        if (rng() % 6 == 0) r.errors.push_back(PhaseError{Phase::B1, "ProviderError", "x"});
        rs.push_back(r);
      }
      const auto base = render_json(aggregate(rs));
      std::shuffle(rs.begin(), rs.end(), rng);
      CHECK(render_json(aggregate(rs)) == base);
    }
  }

  TEST_CASE("compare agrees with a brute-force set computation") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 300; ++t) {
      std::vector<ScanReport> rs;
      std::vector<std::pair<std::string, std::vector<std::string>>> ours;
      std::vector<GroundTruthEntry> gt;
      std::vector<std::pair<std::string, std::string>> base;
      auto pick = [&] { return "secret" + std::to_string(rng() % 15); };
      for (int a = 0; a < 6; ++a) {
        ScanReport r;
        r.app_sha256 = "app" + std::to_string(a);
        const int n = static_cast<int>(rng() % 4);
        for (int k = 0; k < n; ++k) {
          Finding f = make_finding(pick(), "X");
          std::vector<std::string> forms{f.value};
          if (rng() % 3 == 0) {
            f.validation.decoded_form = pick();
            f.decoded_sha256 = sha256_hex(*f.validation.decoded_form);
            forms.push_back(*f.validation.decoded_form);
          }
          ours.push_back({r.app_sha256, forms});
          r.findings.push_back(f);
        }
        const int m = static_cast<int>(rng() % 4);
        for (int k = 0; k < m; ++k) {
          const std::string v = pick();
          gt.push_back({r.app_sha256, v, "C"});
          base.push_back({r.app_sha256, v});
        }
        rs.push_back(rng() % 2 ? redacted(r) : r);
      }
      const auto got = compare_with_baseline(rs, gt);
      const auto want = reference::overlap(ours, base);
      CHECK(got.both == want.both);
      CHECK(got.only_ours == want.only_ours);
      CHECK(got.only_baseline == want.only_baseline);
      CHECK(got.recall == doctest::Approx(want.recall).epsilon(1e-12));
    }
  }
}

TEST_SUITE("property_hallucination") {
  TEST_CASE("values absent from the app never become findings") {
    const auto apk = fixtures::planted_apk();
    const auto artifact = testutil::artifact_from(apk);
    std::set<std::string> present;
    for (const auto& s : extract_xml_strings(artifact).strings) present.insert(s.value);
    for (const auto& s : extract_code_strings(testutil::layouts_of(artifact)).strings) present.insert(s.value);

    std::mt19937_64 rng(13);
    const std::vector<std::string> real = {fixtures::kPlantedGoogleKey, fixtures::kPlantedJwt, fixtures::kPlantedUuid,
                                           fixtures::planted_base64_key()};
    for (int t = 0; t < 100; ++t) {
      std::vector<std::string> fake;
      for (int k = 0; k < 4; ++k) {
        const std::string& r = real[rng() % real.size()];
        std::string h;
        switch (rng() % 6) {
          case 0: h = r.substr(0, r.size() - 1 - rng() % 5); break;
          case 1: h = r + static_cast<char>('a' + rng() % 26); break;
          case 2: h = " " + r; break;
          case 3: h = mutate(rng, r); break;
          case 4: {
            h = r;
            std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::toupper(c); });
            break;
          }
          default: h = "AIza" + random_ascii(rng, 35, 35, kPrintable);
        }
        if (!present.count(h)) fake.push_back(h);
      }
      MockScript script = default_mock_script();
      script.hallucinations = fake;
      script.b1_answer_with_values = rng() % 2 == 0;
      testutil::MockRig rig(script);
      rig.config.redact = false;
      if (rng() % 2) rig.config.mode = ScanMode::ContextualB1;
      const auto rep = rig.scan(artifact);
      CHECK(rep.hallucinations >= fake.size());
      for (const auto& f : rep.findings) {
        CHECK(present.count(f.value) == 1);
        for (const auto& h : fake) CHECK(f.value != h);
      }
    }
  }
}
