#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "eags/corpus.hpp"

namespace eags {

// Topic-conditioned toy grammar. The condition is `<topic> <subject noun>`;
// the target is one clause `NP V NP (P NP)* .` whose subject NP is headed by
// the subject noun. Each NP draws a number that its determiner, head and (for
// the subject) the verb agree with; adjectives are restricted per noun and
// objects per verb. `length` fixes the skeleton: the number of prepositional
// phrases and how many NPs, from the left, carry an adjective.
struct GrammarCorpusConfig {
  std::size_t pairs = 2000;
  std::size_t length = 12;
  std::uint64_t seed = 7;
};

std::vector<RawPair> make_grammar_corpus(const GrammarCorpusConfig& cfg);

// Every condition the grammar can emit, in a fixed order.
std::vector<std::string> grammar_conditions();

}  // namespace eags
