#include <set>
#include <string>

#include "ctxsel/errors.hpp"
#include "ctxsel/synthenv.hpp"

namespace ctxsel {

const std::vector<std::string>& human_pool() {
  static const std::vector<std::string> pool = {
      "A man",        "A woman",     "A boy",          "A girl",
      "An elder",     "A nurse",     "A policeman",    "A chef",
      "A firefighter", "A teacher",  "A street artist", "A delivery rider",
  };
  return pool;
}

const std::vector<std::string>& action_pool() {
  static const std::vector<std::string> pool = {
      "drinking water",          "eating an apple",        "playing a guitar",
      "writing in a notebook",   "making a phone call",    "carrying a basket of fruit",
      "dancing to the music",    "counting coins",         "holding an umbrella",
      "playing with a dog",      "playing with a cat",     "tying a shoelace",
      "waving at a friend",      "reading a newspaper",    "stretching both arms",
      "sipping a cup of tea",
  };
  return pool;
}

const std::vector<std::string>& background_pool() {
  static const std::vector<std::string> pool = {
      "at the train platform",     "at the bus stop",           "at the coffee shop",
      "in the school hallway",     "in the kitchen corner",     "by the riverbank path",
      "in the park pavilion",      "in the grocery aisle",      "at the gas station",
      "at the hotel lobby",        "in the hotel room",         "on the bike lane",
      "in the art gallery",        "at the hospital ward",      "on the fishing pier",
      "at the poolside lounge",    "at the city fountain",      "on the church steps",
      "by the garden gate",        "in the coffee queue",       "on the mountain summit",
      "at the convention center",  "in the concert hall",       "on the running track",
      "at the subway entrance",    "on the tennis court",       "at the soccer stadium",
      "in the waiting room",       "on the hiking path",        "at the night market",
      "in the music studio",       "on the ferry deck",         "at the bakery counter",
      "in the dance studio",       "on the golf course",        "on the airport tarmac",
      "on the bookstore floor",    "on the bridge railing",     "at the zoo entrance",
      "in the flower market",      "on the skateboard ramp",    "at the farmers market",
      "in the wine cellar",        "at the library entrance",   "on the beach boardwalk",
      "in the shopping mall",      "at the ice rink",           "on the rooftop terrace",
      "in the botanical garden",   "at the amusement park",     "on the village square",
      "in the parking garage",     "at the ski lodge",          "on the harbor dock",
      "in the lecture hall",       "at the street corner",      "on the palace steps",
      "in the aquarium tunnel",    "at the food court",         "on the camping ground",
      "in the barber shop",        "at the laundromat",         "on the observation deck",
      "in the greenhouse",         "at the vineyard",           "on the carousel platform",
      "in the museum atrium",      "at the car wash",           "on the pedestrian bridge",
      "in the toy store",          "at the planetarium",        "on the river ferry",
      "in the climbing gym",       "at the opera house",        "on the castle wall",
      "in the pottery workshop",   "at the radio station",      "on the lighthouse balcony",
      "in the orchard",            "at the fire station",       "on the subway platform",
      "in the courtyard",          "at the marina",             "on the terrace cafe",
      "in the arcade",             "at the bowling alley",      "on the country road",
      "in the train carriage",     "at the newsstand",          "in the reading room",
  };
  return pool;
}

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Deterministic dense token from a pool string; the prompt embedding is the
// (identity, action, background) token triple.
Vector hash_token(const std::string& text, std::size_t dim) {
  Rng rng(Rng::mix(fnv1a(text)));
  Vector v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

std::vector<EventPromptSet> generate_eps(const PromptSetSpec& spec, std::size_t count, Rng& rng) {
  if (spec.identities == 0 || spec.actions == 0 || spec.backgrounds == 0) {
    throw ConfigError("empty concept pool");
  }
  if (spec.identities > human_pool().size() || spec.actions > action_pool().size() ||
      spec.backgrounds > background_pool().size()) {
    throw ConfigError("concept pool smaller than requested size");
  }
  if (spec.prompts_per_set > spec.actions * spec.backgrounds) {
    throw ConfigError("prompts per set exceeds distinct action-background pairs");
  }
  if (spec.prompts_per_set == 0) throw ConfigError("prompts per set must be >= 1");

  std::vector<EventPromptSet> sets;
  sets.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    EventPromptSet eps;
    eps.identity = rng.below(spec.identities);
    std::set<std::pair<std::size_t, std::size_t>> used;
    while (eps.pairs.size() < spec.prompts_per_set) {
      const std::size_t a = rng.below(spec.actions);
      const std::size_t b = rng.below(spec.backgrounds);
      if (!used.insert({a, b}).second) continue;
      eps.pairs.emplace_back(a, b);
    }
    for (const auto& [a, b] : eps.pairs) {
      const std::string& human = human_pool()[eps.identity];
      const std::string& action = action_pool()[a];
      const std::string& background = background_pool()[b];
      eps.prompts.push_back(human + " " + action + " " + background);

      Matrix tokens(3, spec.embed_dim);
      tokens.set_row(0, hash_token(human, spec.embed_dim));
      tokens.set_row(1, hash_token(action, spec.embed_dim));
      tokens.set_row(2, hash_token(background, spec.embed_dim));
      eps.embeddings.push_back(std::move(tokens));
    }
    sets.push_back(std::move(eps));
  }
  return sets;
}

}  // namespace ctxsel
