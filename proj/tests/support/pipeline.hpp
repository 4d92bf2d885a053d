#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mock_server.hpp"
#include "temp_dir.hpp"

namespace ladder::testing {

/// German-English pairs where a scripted "translator" gets every third
/// sentence exactly right and drops the final word of the others.
struct SyntheticCorpus {
  std::vector<std::string> sources;
  std::vector<std::string> references;
  std::vector<std::string> intermediates;

  std::string tsv() const {
    std::string out;
    for (std::size_t i = 0; i < sources.size(); ++i) out += sources[i] + "\t" + references[i] + "\n";
    return out;
  }
  std::size_t imperfect() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < sources.size(); ++i) n += intermediates[i] != references[i];
    return n;
  }
};

inline SyntheticCorpus make_corpus(std::size_t n, std::size_t first = 0) {
  static const char* nouns[] = {"house", "river", "garden", "letter", "train", "market", "window", "bridge"};
  static const char* verbs[] = {"sees", "builds", "paints", "finds", "opens", "crosses", "sells", "keeps"};
  SyntheticCorpus c;
  for (std::size_t k = first; k < first + n; ++k) {
    const std::string num = std::to_string(k);
    c.sources.push_back("Satz " + num + ": der Nachbar " + std::string(verbs[k % 8]) + " das " + nouns[(k / 8) % 8] + ".");
    std::string ref = "In sentence " + num + " the neighbour " + verbs[k % 8] + " the old " + nouns[(k / 8) % 8] +
                      " near the station today";
    c.references.push_back(ref);
    if (k % 3 == 0) {
      c.intermediates.push_back(ref);
    } else {
      c.intermediates.push_back(ref.substr(0, ref.rfind(' ')));
    }
  }
  return c;
}

enum class RefinerMode { Identity, Perfect, Echo };

/// One chat handler serving sampler, target and ladder roles: direct
/// prompts get the scripted intermediate, refine prompts go through `mode`.
inline MockServer::ChatFn scripted_translator(const std::vector<SyntheticCorpus>& corpora, RefinerMode mode) {
  std::map<std::string, std::pair<std::string, std::string>> by_source;
  for (const auto& c : corpora) {
    for (std::size_t i = 0; i < c.sources.size(); ++i) by_source[c.sources[i]] = {c.intermediates[i], c.references[i]};
  }
  return [by_source, mode](const std::string& prompt, int) -> MockReply {
    const auto source = line_after(prompt, "German: ");
    auto it = by_source.find(source);
    if (it == by_source.end()) return status_reply(400);
    const bool refine = prompt.find("\nIntermediate translation: ") != std::string::npos;
    if (!refine) return chat_reply(it->second.first);
    switch (mode) {
      case RefinerMode::Identity: return chat_reply(line_after(prompt, "Intermediate translation: "));
      case RefinerMode::Perfect: return chat_reply("Refined translation: " + it->second.second);
      case RefinerMode::Echo: return chat_reply(prompt);
    }
    return status_reply(500);
  };
}

/// TOML run config wiring all chat roles to `chat_url`.
inline std::string pipeline_config(const std::string& chat_url, const std::string& extra = "") {
  std::string roles;
  for (const char* role : {"sampler", "target", "ladder", "weak"}) {
    roles += "[endpoints." + std::string(role) + "]\nbase_url = \"" + chat_url + "\"\nmodel = \"mock-" + role +
             "\"\nmax_in_flight = 8\nretries = 1\nbackoff_base_ms = 1\nbackoff_cap_ms = 2\n\n";
  }
  return "[run]\nout = \"out\"\nseed = 7\n\n" + roles +
         "[scorer]\nkind = \"chrf\"\n\n[hierarchy]\npreset = \"HFT2\"\nstrategy = \"hft\"\n\n"
         "[[corpus]]\nsrc = \"de\"\ntgt = \"en\"\ntrain = \"data/train.tsv\"\ntest = \"data/test.tsv\"\n\n" +
         extra;
}

}  // namespace ladder::testing
