#include "derand/cli/format.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <system_error>

#include "derand/error.hpp"

namespace derand::cli {
namespace {

constexpr std::string_view kSampleMagic = "# derand v1 ";
constexpr std::string_view kManifestMagic = "# derand manifest v1";

[[noreturn]] void fail_at(std::size_t line, const std::string& message) {
  throw ParseError("line " + std::to_string(line) + ": " + message);
}

template <typename T>
T parse_unsigned(std::string_view text, std::size_t line, std::string_view what) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    fail_at(line, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

bool valid_token(std::string_view text) {
  for (char c : text) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == ',' || c == ':' || c == '=') {
      return false;
    }
  }
  return !text.empty();
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace

std::string canonical_params(const std::map<std::string, std::string>& params) {
  std::string out;
  for (const auto& [key, value] : params) {
    if (!valid_token(key) || !valid_token(value)) {
      throw ParameterError("parameter '" + key + "' cannot be written in a header");
    }
    if (!out.empty()) out += ',';
    out += key + ':' + value;
  }
  return out;
}

std::map<std::string, std::string> parse_params(std::string_view text) {
  std::map<std::string, std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view item = text.substr(start, end - start);
    const std::size_t colon = item.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == item.size()) {
      throw ParseError("bad parameter '" + std::string(item) + "'");
    }
    out[std::string(item.substr(0, colon))] = std::string(item.substr(colon + 1));
    start = end + 1;
  }
  return out;
}

std::string serialize_sample(const SampleMultiset& set, std::string_view kind) {
  set.validate();
  if (!valid_token(kind)) throw ParameterError("invalid kind '" + std::string(kind) + "'");
  std::string out;
  out.reserve(64 + set.size() * (set.word_length + 1) * (set.alphabet == 2 ? 1 : 4));
  out += kSampleMagic;
  out += "kind=" + std::string(kind) + " alphabet=" + std::to_string(set.alphabet) +
         " n=" + std::to_string(set.word_length) + " count=" + std::to_string(set.size()) +
         " params=" + canonical_params(set.provenance.params) + '\n';
  for (const Word& w : set.words) {
    out += format_word(w, set.alphabet, ' ');
    out += '\n';
  }
  return out;
}

SampleFile parse_sample(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || !lines[0].starts_with(kSampleMagic)) {
    fail_at(1, "missing '# derand v1' header");
  }
  SampleFile file;
  bool have_alphabet = false, have_n = false, have_count = false;
  std::uint64_t count = 0;
  std::string_view header = lines[0].substr(kSampleMagic.size());
  while (!header.empty()) {
    const std::size_t space = header.find(' ');
    const std::string_view token = header.substr(0, space);
    header = space == std::string_view::npos ? std::string_view{} : header.substr(space + 1);
    if (token.empty()) continue;
    const std::size_t eq = token.find('=');
    if (eq == std::string_view::npos) fail_at(1, "bad header field '" + std::string(token) + "'");
    const std::string_view key = token.substr(0, eq);
    const std::string_view value = token.substr(eq + 1);
    if (key == "kind") {
      file.kind = value;
    } else if (key == "alphabet") {
      file.set.alphabet = parse_unsigned<std::uint32_t>(value, 1, "alphabet");
      have_alphabet = true;
    } else if (key == "n") {
      file.set.word_length = parse_unsigned<std::size_t>(value, 1, "word length");
      have_n = true;
    } else if (key == "count") {
      count = parse_unsigned<std::uint64_t>(value, 1, "count");
      have_count = true;
    } else if (key == "params") {
      try {
        file.params = parse_params(value);
      } catch (const ParseError& e) {
        fail_at(1, e.what());
      }
    } else {
      fail_at(1, "unknown header field '" + std::string(key) + "'");
    }
  }
  if (!have_alphabet || !have_n || !have_count) {
    fail_at(1, "header needs alphabet, n and count");
  }
  if (file.set.alphabet < 2) fail_at(1, "alphabet must be at least 2");

  const std::uint32_t alphabet = file.set.alphabet;
  const std::size_t n = file.set.word_length;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.empty()) continue;
    Word w;
    w.reserve(n);
    if (alphabet == 2 && line.find(' ') == std::string_view::npos) {
      for (char c : line) {
        if (c != '0' && c != '1') fail_at(i + 1, "expected 0/1 characters");
        w.push_back(static_cast<Symbol>(c - '0'));
      }
    } else {
      std::string_view rest = line;
      while (!rest.empty()) {
        const std::size_t space = rest.find(' ');
        const std::string_view token = rest.substr(0, space);
        rest = space == std::string_view::npos ? std::string_view{} : rest.substr(space + 1);
        if (token.empty()) continue;
        w.push_back(parse_unsigned<Symbol>(token, i + 1, "symbol"));
      }
    }
    if (w.size() != n) {
      fail_at(i + 1, "word has " + std::to_string(w.size()) + " symbols, expected " +
                         std::to_string(n));
    }
    for (Symbol s : w) {
      if (s >= alphabet) fail_at(i + 1, "symbol " + std::to_string(s) + " outside the alphabet");
    }
    file.set.words.push_back(std::move(w));
  }
  if (file.set.words.size() != count) {
    throw ParseError("header says count=" + std::to_string(count) + " but the file has " +
                     std::to_string(file.set.words.size()) + " words");
  }
  file.set.provenance.construction = file.kind;
  file.set.provenance.params = file.params;
  return file;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return content;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

SampleFile read_sample_file(const std::filesystem::path& path) {
  try {
    return parse_sample(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string RunManifest::serialize() const {
  std::ostringstream out;
  out << kManifestMagic << '\n';
  for (std::size_t i = 0; i < command.size(); ++i) {
    if (command[i].find('\n') != std::string::npos) {
      throw ParameterError("command arguments cannot contain newlines");
    }
    out << "command." << i << '=' << command[i] << '\n';
  }
  char seconds[32];
  std::snprintf(seconds, sizeof seconds, "%.3f", wall_time_seconds);
  out << "kind=" << kind << '\n'
      << "params=" << canonical_params(params) << '\n'
      << "version=" << version << '\n'
      << "output=" << output << '\n'
      << "output_sha256=" << output_sha256 << '\n'
      << "wall_time_seconds=" << seconds << '\n'
      << "size=" << size << '\n'
      << "size_bound=" << size_bound << '\n';
  for (std::size_t i = 0; i < trace_digests.size(); ++i) {
    out << "trace_digest." << i << '=' << trace_digests[i] << '\n';
  }
  return out.str();
}

RunManifest RunManifest::parse(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kManifestMagic) fail_at(1, "missing manifest header");
  RunManifest m;
  std::map<std::size_t, std::string> command;
  std::map<std::size_t, std::string> traces;
  bool have_output = false, have_digest = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) fail_at(i + 1, "expected key=value");
    const std::string_view key = line.substr(0, eq);
    const std::string value(line.substr(eq + 1));
    if (key.starts_with("command.")) {
      command[parse_unsigned<std::size_t>(key.substr(8), i + 1, "command index")] = value;
    } else if (key.starts_with("trace_digest.")) {
      traces[parse_unsigned<std::size_t>(key.substr(13), i + 1, "trace index")] = value;
    } else if (key == "kind") {
      m.kind = value;
    } else if (key == "params") {
      m.params = parse_params(value);
    } else if (key == "version") {
      m.version = value;
    } else if (key == "output") {
      m.output = value;
      have_output = true;
    } else if (key == "output_sha256") {
      m.output_sha256 = value;
      have_digest = true;
    } else if (key == "wall_time_seconds") {
      m.wall_time_seconds = std::stod(value);
    } else if (key == "size") {
      m.size = parse_unsigned<std::uint64_t>(value, i + 1, "size");
    } else if (key == "size_bound") {
      m.size_bound = parse_unsigned<std::uint64_t>(value, i + 1, "size bound");
    } else {
      fail_at(i + 1, "unknown manifest key '" + std::string(key) + "'");
    }
  }
  if (!have_output || !have_digest || command.empty()) {
    throw ParseError("manifest needs command, output and output_sha256");
  }
  std::size_t expected = 0;
  for (auto& [index, arg] : command) {
    if (index != expected++) throw ParseError("manifest command indices are not contiguous");
    m.command.push_back(std::move(arg));
  }
  for (auto& [index, digest] : traces) m.trace_digests.push_back(std::move(digest));
  return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& output) {
  return std::filesystem::path(output.string() + ".manifest");
}

}  // namespace derand::cli
