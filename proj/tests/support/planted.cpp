#include "planted.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "mgcs/common/rng.hpp"

namespace mgcs::testing {
namespace {

class Words {
 public:
  explicit Words(Rng& rng) : rng_(rng) {}

  // Fresh pronounceable word never handed out before.
  std::string fresh() {
    static const char* kOnset[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr", "pl", "gl"};
    static const char* kVowel[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    static const char* kCoda[] = {"", "n", "r", "x", "k", "m", "sh", "th"};
    for (;;) {
      std::string w;
      const std::size_t syllables = 2 + rng_.below(2);
      for (std::size_t i = 0; i < syllables; ++i) {
        w += kOnset[rng_.below(std::size(kOnset))];
        w += kVowel[rng_.below(std::size(kVowel))];
      }
      w += kCoda[rng_.below(std::size(kCoda))];
      if (used_.insert(w).second) return w;
    }
  }

  template <std::size_t N>
  const char* pick(const char* const (&pool)[N]) {
    return pool[rng_.below(N)];
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

const char* const kVerbs[] = {"compute", "update", "collect", "merge", "scale", "measure", "record", "adjust"};
const char* const kFillers[] = {"value", "entry", "item", "result", "state", "count"};
const char* const kParams[] = {"data", "size", "limit", "source", "target", "total", "rows", "cols"};

// A concept is named one way in comments and another way in code, so the
// association has to be learned from the training pairs.
struct Concept {
  std::string comment;
  std::string code;
};

class Concepts {
 public:
  Concepts(Words& w, Rng& rng, std::size_t n) : rng_(rng) {
    for (std::size_t i = 0; i < n; ++i) all_.push_back({w.fresh(), w.fresh()});
  }

  std::vector<const Concept*> draw(std::size_t k) {
    std::vector<const Concept*> out;
    while (out.size() < k) {
      const Concept* c = &all_[rng_.below(all_.size())];
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
  }

 private:
  Rng& rng_;
  std::vector<Concept> all_;
};

std::string code_name(const std::vector<const Concept*>& cs) {
  std::string out;
  for (const auto* c : cs) out += (out.empty() ? "" : "_") + c->code;
  return out;
}

std::string comment_words(const std::vector<const Concept*>& cs) {
  std::string out;
  for (const auto* c : cs) out += (out.empty() ? "" : " ") + c->comment;
  return out;
}

std::string function_text(Words& w, Concepts& concepts, Rng& rng, std::size_t per_snippet) {
  const auto head = concepts.draw(per_snippet);
  // Every snippet of the function mentions its subject, in code and comment.
  const Concept& subject = *head.front();
  const std::string a = subject.code;
  const std::string b = w.pick(kParams);
  std::string out;
  out += "def " + code_name(head) + "(" + a + ", " + b + "):\n";
  out += "    \"\"\"" + std::string(w.pick(kVerbs)) + " the " + comment_words(head) + " " + w.pick(kFillers) +
         ".\"\"\"\n";

  auto statement = [&](const std::string& indent, bool comment) {
    const auto cs = concepts.draw(per_snippet);
    std::string line = indent + code_name(cs) + " = " + a + " * " + std::to_string(rng.below(9) + 2);
    if (comment)
      line += "  # " + std::string(w.pick(kVerbs)) + " the " + comment_words(cs) + " " + w.pick(kFillers) + " of the " +
              subject.comment;
    return line + "\n";
  };

  const std::size_t n_blocks = 1 + rng.below(3);
  out += statement("    ", true);
  for (std::size_t k = 0; k < n_blocks; ++k) {
    const auto cs = concepts.draw(per_snippet);
    const std::string var = code_name(cs);
    out += "    # " + std::string(w.pick(kVerbs)) + " each " + comment_words(cs) + " " + w.pick(kFillers) + " of the " + subject.comment + "\n";
    switch (rng.below(4)) {
      case 0:
        out += "    for " + var + " in range(" + a + "):\n";
        out += "        " + b + " = " + b + " + " + var + "\n";
        break;
      case 1:
        out += "    while " + var + " < " + b + ":\n";
        out += "        " + b + " = " + b + " - " + a + "\n";
        break;
      case 2:
        out += "    with open(" + a + ") as " + var + ":\n";
        out += "        " + var + ".write(" + b + ")\n";
        break;
      default:
        out += "    if " + var + "(" + a + ") > " + b + ":\n";
        out += "        " + b + " = " + var + "(" + b + ")\n";
        out += "    else:\n";
        out += "        " + b + " = " + var + "(" + a + ") - 1\n";
        break;
    }
    if (rng.below(2) == 0) out += statement("    ", true);
  }
  out += statement("    ", false);
  out += "    return " + b + "\n";
  return out;
}

}  // namespace

std::vector<PlantedFile> planted_corpus(const PlantedOptions& options) {
  Rng rng(options.seed ^ 0x706c616e746564ULL);
  Words words(rng);
  Concepts concepts(words, rng, options.concepts);
  std::vector<PlantedFile> files;
  for (std::size_t i = 0; i < options.functions; ++i) {
    if (i % options.functions_per_file == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "module_%03zu.py", files.size());
      files.push_back({name, ""});
    }
    if (!files.back().text.empty()) files.back().text += "\n\n";
    files.back().text += function_text(words, concepts, rng, options.concepts_per_snippet);
  }
  return files;
}

void write_planted(const std::filesystem::path& dir, const PlantedOptions& options) {
  std::filesystem::create_directories(dir);
  for (const auto& f : planted_corpus(options)) {
    std::ofstream out(dir / f.path, std::ios::binary);
    out << f.text;
  }
}

}  // namespace mgcs::testing
