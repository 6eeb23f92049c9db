#include "derand/sample.hpp"

#include <string>

#include "derand/error.hpp"

namespace derand {

std::string format_word(const Word& word, std::uint32_t alphabet, char separator) {
  std::string out;
  if (alphabet == 2) {
    out.reserve(word.size());
    for (Symbol s : word) out.push_back(s ? '1' : '0');
    return out;
  }
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (i > 0) out.push_back(separator);
    out += std::to_string(word[i]);
  }
  return out;
}

void SampleMultiset::validate() const {
  if (alphabet < 2) throw ParameterError("alphabet must have at least 2 symbols");
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i].size() != word_length) {
      throw ParameterError("word " + std::to_string(i) + " has length " +
                           std::to_string(words[i].size()) + ", expected " +
                           std::to_string(word_length));
    }
    for (Symbol s : words[i]) {
      if (s >= alphabet) {
        throw ParameterError("word " + std::to_string(i) + " has symbol " + std::to_string(s) +
                             " outside alphabet " + std::to_string(alphabet));
      }
    }
  }
}

}  // namespace derand
