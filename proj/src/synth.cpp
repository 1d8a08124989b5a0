#include "genret/synth.hpp"

#include <array>
#include <cstdio>
#include <random>
#include <set>

#include "genret/text.hpp"

namespace genret {
namespace {

constexpr std::array kAdjectives = {
    "ancient", "bright", "quiet",  "hidden",  "northern", "southern", "coastal", "golden", "frozen", "narrow",
    "broad",   "silent", "rapid",  "gentle",  "rugged",   "fertile",  "remote",  "urban",  "rural",  "sacred",
    "modern",  "early",  "late",   "crimson", "hollow",   "sturdy",   "fragile", "vast",   "humble", "royal",
    "eastern", "western", "misty", "sunny",   "wooden",   "stone",    "iron",    "silver", "amber",  "scarlet"};

constexpr std::array kNouns = {
    "river",    "harbor",   "castle",   "forest",  "valley",  "bridge",   "market",  "library", "garden",   "tower",
    "village",  "mountain", "lake",     "island",  "canal",   "mill",     "temple",  "meadow",  "quarry",   "lighthouse",
    "railway",  "orchard",  "monastery", "fortress", "plateau", "glacier", "desert",  "reef",    "vineyard", "observatory",
    "festival", "treaty",   "guild",    "academy", "dynasty", "expedition", "chronicle", "council", "colony", "parish"};

constexpr std::array kPlaces = {
    "Arden",   "Belmora", "Calder",  "Dunmere", "Elstow",  "Fenwick", "Galloway", "Harwick", "Ilsford", "Jarrow",
    "Kelso",   "Lindham", "Marlow",  "Norcott", "Oakhurst", "Penrith", "Quarley", "Rosslyn", "Selby",   "Thornby",
    "Ulverby", "Varden",  "Wexley",  "Yarmont", "Zelham",  "Ashby",   "Brenton", "Corwen",  "Dalby",   "Eskdale"};

constexpr std::array kVerbs = {"borders", "supplies", "shelters", "overlooks", "connects", "surrounds", "protects",
                               "feeds",   "guards",   "crosses",  "follows",   "faces",    "joins",     "serves"};

constexpr std::array kPastVerbs = {"founded", "rebuilt", "expanded", "restored", "abandoned", "visited",
                                   "mapped",  "painted", "described", "excavated", "renamed", "fortified"};

constexpr std::array kGroups = {"merchants", "monks",    "farmers", "sailors",  "scholars", "miners",
                                "weavers",   "pilgrims", "soldiers", "traders", "builders", "fishermen"};

constexpr std::array kMaterials = {"granite", "timber", "wool",  "salt", "copper", "grain",
                                   "slate",   "clay",   "honey", "tin",  "marble", "flax"};

template <class Array>
const char* pick(std::mt19937_64& rng, const Array& a) {
  return a[rng() % a.size()];
}

int pick_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string sentence(std::mt19937_64& rng, const std::string& noun, const std::string& place) {
  const std::string adj = pick(rng, kAdjectives);
  const std::string other = pick(rng, kNouns);
  switch (rng() % 6) {
    case 0:
      return "The " + noun + " " + pick(rng, kVerbs) + " the " + adj + " " + other + " of " + place + ".";
    case 1:
      return "It was " + std::string(pick(rng, kPastVerbs)) + " by " + pick(rng, kGroups) + " in " +
             std::to_string(pick_int(rng, 1100, 1950)) + ".";
    case 2:
      return "Local " + std::string(pick(rng, kGroups)) + " trade " + pick(rng, kMaterials) + " near the " + adj +
             " " + other + ".";
    case 3:
      return "Visitors reach it from " + std::string(pick(rng, kPlaces)) + " along the " + adj + " " + other + ".";
    case 4:
      return "A " + adj + " " + other + " stands " + std::to_string(pick_int(rng, 2, 40)) + " miles from " + place +
             ".";
    default:
      return "Records from " + std::to_string(pick_int(rng, 1200, 1990)) + " mention its " + pick(rng, kMaterials) +
             " and " + pick(rng, kMaterials) + ".";
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (n_records < 1) throw ValidationError("synth: n_records must be >= 1");
  if (min_sentences < 1 || max_sentences < min_sentences) throw ValidationError("synth: bad sentence range");
  if (second_url_fraction < 0.0 || second_url_fraction > 1.0) {
    throw ValidationError("synth: second_url_fraction must be in [0, 1]");
  }
}

std::string slugify(std::string_view text) {
  std::string out;
  bool pending_dash = false;
  for (unsigned char c : text) {
    if (std::isalnum(c) && c < 0x80) {
      if (pending_dash && !out.empty()) out += '-';
      pending_dash = false;
      out += static_cast<char>(std::tolower(c));
    } else {
      pending_dash = true;
    }
  }
  return out;
}

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(cfg.seed, std::string_view("synth")));
  SynthCorpus out;
  std::set<std::string> titles;
  for (int i = 0; i < cfg.n_records; ++i) {
    std::string adj, noun, place, title;
    for (int attempt = 0;; ++attempt) {
      adj = pick(rng, kAdjectives);
      noun = pick(rng, kNouns);
      place = pick(rng, kPlaces);
      title = capitalize(adj) + " " + noun + " of " + place;
      // The pool has 48k combinations; beyond that, disambiguate with a number.
      if (attempt > 50) title += " " + std::to_string(i);
      if (titles.insert(title).second) break;
    }

    std::string passage = "The " + adj + " " + noun + " of " + place + " is a " + pick(rng, kAdjectives) + " " +
                          noun + " in the " + pick(rng, kAdjectives) + " region of " + pick(rng, kPlaces) + ".";
    const int n_sent = pick_int(rng, cfg.min_sentences, cfg.max_sentences);
    for (int s = 0; s < n_sent; ++s) passage += " " + sentence(rng, noun, place);

    char id[32];
    std::snprintf(id, sizeof id, "doc%05d", i);
    PassageRecord rec;
    rec.id = id;
    rec.title = title;
    rec.passage = passage;
    const std::string slug = slugify(title) + "-" + std::to_string(i);
    rec.urls.push_back("https://example.org/doc/" + slug);
    if (static_cast<double>(rng() % 1000000) / 1e6 < cfg.second_url_fraction) {
      rec.urls.push_back("https://example.org/archive/" + slug);
    }
    rec.assigned_url = rec.urls.front();

    // A short question built from title words plus one passage detail.
    const auto words = split_whitespace(passage);
    std::string detail;
    for (int tries = 0; tries < 8 && detail.size() < 4; ++tries) {
      detail = words[static_cast<std::size_t>(pick_int(rng, 10, static_cast<int>(words.size()) - 1))];
      while (!detail.empty() && !std::isalnum(static_cast<unsigned char>(detail.back()))) detail.pop_back();
    }
    std::string question;
    switch (rng() % 3) {
      case 0:
        question = "where is the " + adj + " " + noun + " of " + place;
        break;
      case 1:
        question = "what is known about the " + noun + " of " + place + " and " + detail;
        break;
      default:
        question = adj + " " + noun + " " + place + " " + detail;
        break;
    }
    char qid[32];
    std::snprintf(qid, sizeof qid, "q%05d", i);
    out.queries.push_back({qid, question, {rec.id}});
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace genret
