#pragma once

// Text serialization of sample multisets and run manifests.
//
// A sample file is a header line
//   # derand v1 kind=<kind> alphabet=<a> n=<n> count=<c> params=<k:v,...>
// followed by one word per line: binary words as runs of 0/1 characters,
// larger alphabets as space-separated decimal symbols.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "derand/error.hpp"
#include "derand/sample.hpp"

namespace derand::cli {

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

struct SampleFile {
  std::string kind;
  std::map<std::string, std::string> params;
  SampleMultiset set;
};

/// "k1:v1,k2:v2" with keys in sorted order.
std::string canonical_params(const std::map<std::string, std::string>& params);

/// Throws ParseError on a malformed parameter string.
std::map<std::string, std::string> parse_params(std::string_view text);

/// Header params come from set.provenance.params.
std::string serialize_sample(const SampleMultiset& set, std::string_view kind);

/// Throws ParseError with a line number on any malformed input.
SampleFile parse_sample(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

SampleFile read_sample_file(const std::filesystem::path& path);

/// Sidecar record of one construct or compose run.
struct RunManifest {
  /// Arguments after the program name.
  std::vector<std::string> command;
  std::string kind;
  std::map<std::string, std::string> params;
  std::string version;
  std::string output;
  std::string output_sha256;
  double wall_time_seconds = 0;
  std::uint64_t size = 0;
  std::uint64_t size_bound = 0;
  std::vector<std::string> trace_digests;

  std::string serialize() const;
  /// Throws ParseError on unknown layout or missing required keys.
  static RunManifest parse(std::string_view text);
};

/// Sidecar location for an output file: "<output>.manifest".
std::filesystem::path manifest_path(const std::filesystem::path& output);

}  // namespace derand::cli
