#include "eags/synthetic.hpp"

#include <array>
#include <string>

#include "eags/error.hpp"
#include "eags/rng.hpp"

namespace eags {

namespace {

struct Word {
  const char* singular;
  const char* plural;
};

// Verbs are listed as {third-person singular, plural}.
struct Topic {
  const char* name;
  std::array<Word, 10> nouns;
  std::array<Word, 6> verbs;
  std::array<const char*, 6> adjectives;
};

const std::array<Topic, 6>& topics() {
  static const std::array<Topic, 6> t{{
      {"animals",
       {{{"fox", "foxes"}, {"owl", "owls"}, {"goat", "goats"}, {"wolf", "wolves"}, {"hare", "hares"},
         {"bear", "bears"}, {"crow", "crows"}, {"frog", "frogs"}, {"moth", "moths"}, {"lynx", "lynxes"}}},
       {{{"chases", "chase"}, {"watches", "watch"}, {"follows", "follow"}, {"hunts", "hunt"}, {"greets", "greet"},
         {"sniffs", "sniff"}}},
       {"quick", "wild", "shy", "gray", "old", "small"}},
      {"kitchen",
       {{{"pot", "pots"}, {"knife", "knives"}, {"spoon", "spoons"}, {"bowl", "bowls"}, {"stove", "stoves"},
         {"kettle", "kettles"}, {"plate", "plates"}, {"cup", "cups"}, {"oven", "ovens"}, {"pan", "pans"}}},
       {{{"heats", "heat"}, {"fills", "fill"}, {"cleans", "clean"}, {"stirs", "stir"}, {"holds", "hold"},
         {"cools", "cool"}}},
       {"hot", "spotless", "heavy", "shiny", "cracked", "deep"}},
      {"city",
       {{{"bus", "buses"}, {"tower", "towers"}, {"bridge", "bridges"}, {"market", "markets"}, {"street", "streets"},
         {"taxi", "taxis"}, {"station", "stations"}, {"cafe", "cafes"}, {"park", "parks"}, {"crowd", "crowds"}}},
       {{{"passes", "pass"}, {"crosses", "cross"}, {"faces", "face"}, {"blocks", "block"}, {"joins", "join"},
         {"circles", "circle"}}},
       {"busy", "tall", "noisy", "narrow", "bright", "crowded"}},
      {"forest",
       {{{"oak", "oaks"}, {"pine", "pines"}, {"fern", "ferns"}, {"moss", "mosses"}, {"stream", "streams"},
         {"trail", "trails"}, {"log", "logs"}, {"root", "roots"}, {"branch", "branches"}, {"mushroom", "mushrooms"}}},
       {{{"shades", "shade"}, {"covers", "cover"}, {"hides", "hide"}, {"feeds", "feed"}, {"touches", "touch"},
         {"frames", "frame"}}},
       {"green", "damp", "ancient", "thick", "tangled", "mossy"}},
      {"ocean",
       {{{"wave", "waves"}, {"reef", "reefs"}, {"shark", "sharks"}, {"whale", "whales"}, {"shell", "shells"},
         {"tide", "tides"}, {"boat", "boats"}, {"gull", "gulls"}, {"crab", "crabs"}, {"coral", "corals"}}},
       {{{"strikes", "strike"}, {"carries", "carry"}, {"rocks", "rock"}, {"splashes", "splash"}, {"drags", "drag"},
         {"lifts", "lift"}}},
       {"salty", "blue", "vast", "cold", "foamy", "rough"}},
      {"school",
       {{{"teacher", "teachers"}, {"pupil", "pupils"}, {"desk", "desks"}, {"book", "books"}, {"ruler", "rulers"},
         {"lesson", "lessons"}, {"bell", "bells"}, {"board", "boards"}, {"pencil", "pencils"}, {"map", "maps"}}},
       {{{"reads", "read"}, {"writes", "write"}, {"marks", "mark"}, {"opens", "open"}, {"studies", "study"},
         {"erases", "erase"}}},
       {"strict", "new", "dusty", "blank", "long", "quiet"}},
  }};
  return t;
}

constexpr std::array<const char*, 4> kSingularDet{"a", "every", "this", "that"};
constexpr std::array<const char*, 4> kPluralDet{"some", "these", "those", "many"};
constexpr std::array<const char*, 6> kPrepositions{"near", "under", "with", "behind", "beside", "above"};
constexpr std::size_t kAdjectivesPerNoun = 3;
constexpr std::size_t kObjectsPerVerb = 4;

// Clause skeleton for a target length: prepositional phrases after the object
// and how many noun phrases (from the left) carry an adjective.
struct Skeleton {
  std::size_t pps = 0;
  std::size_t adjectives = 0;
};

Skeleton skeleton(std::size_t length) {
  Skeleton s;
  s.pps = length > 8 ? (length - 8 + 3) / 4 : 0;
  s.adjectives = length - 6 - 3 * s.pps;
  return s;
}

class Sampler {
 public:
  Sampler(const Topic& topic, Rng& rng) : topic_(topic), rng_(rng) {}

  std::vector<std::string> sentence(std::size_t subject, const Skeleton& sk) {
    std::vector<std::string> out;
    std::size_t adjectives = sk.adjectives;
    const bool plural = noun_phrase(out, subject, adjectives);
    const std::size_t v = rng_.below(topic_.verbs.size());
    out.emplace_back(plural ? topic_.verbs[v].plural : topic_.verbs[v].singular);
    noun_phrase(out, (v * 3 + rng_.below(kObjectsPerVerb)) % topic_.nouns.size(), adjectives);
    for (std::size_t p = 0; p < sk.pps; ++p) {
      out.emplace_back(kPrepositions[rng_.below(kPrepositions.size())]);
      noun_phrase(out, rng_.below(topic_.nouns.size()), adjectives);
    }
    out.emplace_back(".");
    return out;
  }

 private:
  // Determiner, optional adjective and head agree with one number draw.
  bool noun_phrase(std::vector<std::string>& out, std::size_t noun, std::size_t& adjectives) {
    const bool plural = rng_.uniform() < 0.5;
    out.emplace_back(plural ? kPluralDet[rng_.below(kPluralDet.size())] : kSingularDet[rng_.below(kSingularDet.size())]);
    if (adjectives > 0) {
      --adjectives;
      out.emplace_back(topic_.adjectives[(noun + rng_.below(kAdjectivesPerNoun)) % topic_.adjectives.size()]);
    }
    out.emplace_back(plural ? topic_.nouns[noun].plural : topic_.nouns[noun].singular);
    return plural;
  }

  const Topic& topic_;
  Rng& rng_;
};

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
  return s;
}

}  // namespace

std::vector<std::string> grammar_conditions() {
  std::vector<std::string> out;
  for (const Topic& t : topics())
    for (const Word& n : t.nouns) out.push_back(std::string(t.name) + " " + n.singular);
  return out;
}

std::vector<RawPair> make_grammar_corpus(const GrammarCorpusConfig& cfg) {
  if (cfg.length < 6) throw InputError("grammar corpus: length must be >= 6");
  const Skeleton sk = skeleton(cfg.length);
  Rng rng = Rng::stream(cfg.seed, "grammar-corpus");
  std::vector<RawPair> out;
  out.reserve(cfg.pairs);
  for (std::size_t k = 0; k < cfg.pairs; ++k) {
    const Topic& topic = topics()[rng.below(topics().size())];
    const std::size_t subject = rng.below(topic.nouns.size());
    Sampler s(topic, rng);
    out.push_back(RawPair{std::string(topic.name) + " " + topic.nouns[subject].singular, join(s.sentence(subject, sk)),
                          k + 1});
  }
  return out;
}

}  // namespace eags
