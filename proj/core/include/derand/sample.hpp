#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace derand {

using Symbol = std::uint32_t;
using Word = std::vector<Symbol>;

/// Renders a word: bits as a run of 0/1 characters, larger alphabets as
/// decimal symbols joined by `separator`.
std::string format_word(const Word& word, std::uint32_t alphabet, char separator = ' ');

struct Provenance {
  std::string construction;
  std::map<std::string, std::string> params;
  std::string trace_digest;
};

/// Ordered multiset of equal-length words over [alphabet]. Duplicates are kept.
struct SampleMultiset {
  std::uint32_t alphabet = 2;
  std::size_t word_length = 0;
  std::vector<Word> words;
  Provenance provenance;

  std::size_t size() const { return words.size(); }
  /// Throws ParameterError if a word has the wrong length or a symbol is out of range.
  void validate() const;
};

}  // namespace derand
