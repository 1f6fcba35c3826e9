#include "apksecrets/bytes.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>

#include "apksecrets/error.hpp"

namespace apksecrets {

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  if (end < 0) throw Error(ErrorCode::IoError, "cannot size " + path);
  in.seekg(0, std::ios::beg);
  Bytes out(static_cast<std::size_t>(end));
  if (!out.empty() && !in.read(reinterpret_cast<char*>(out.data()), end)) {
    throw Error(ErrorCode::IoError, "short read on " + path);
  }
  return out;
}

void write_file(const std::string& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write on " + path);
}

void write_file(const std::string& path, std::string_view text) {
  write_file(path, as_bytes(text));
}

std::string sha256_hex(ByteView data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) { return sha256_hex(as_bytes(text)); }

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotAnArchive: return "NotAnArchive";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::OffsetOutOfBounds: return "OffsetOutOfBounds";
    case ErrorCode::ClassNotFound: return "ClassNotFound";
    case ErrorCode::EmptyString: return "EmptyString";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::RuleParseError: return "RuleParseError";
    case ErrorCode::GroundTruthParseError: return "GroundTruthParseError";
    case ErrorCode::ReportParseError: return "ReportParseError";
    case ErrorCode::NoFindings: return "NoFindings";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::HashMismatch: return "HashMismatch";
  }
  return "Unknown";
}

}  // namespace apksecrets
