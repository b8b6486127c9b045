#pragma once

// The atomic action vocabulary: canonical verbs plus an alias table.
// Config file format: one canonical verb per line, aliases written as
// "alias=canonical", '#' starts a comment, blank lines are skipped.

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "planbench/core.hpp"

namespace planbench {

enum class VerbVerdict { canonical, aliased, unknown };

struct VerbResolution {
  VerbVerdict verdict = VerbVerdict::unknown;
  std::string canonical;  // canonical spelling when verdict != unknown
};

class ActionSet {
 public:
  // Verb lookups are case-insensitive; the stored spelling is what callers get back.
  void add_verb(const std::string& verb) {
    std::string key = to_lower(verb);
    if (by_key_.count(key)) return;
    by_key_[key] = verb;
    verbs_.push_back(verb);
  }

  void add_alias(const std::string& alias, const std::string& canonical) {
    auto it = by_key_.find(to_lower(canonical));
    if (it == by_key_.end())
      throw config_error("action set alias '" + alias + "' targets unknown verb '" + canonical + "'");
    aliases_[to_lower(alias)] = it->second;
  }

  VerbResolution resolve(const std::string& verb) const {
    auto it = by_key_.find(to_lower(verb));
    if (it != by_key_.end()) return {VerbVerdict::canonical, it->second};
    auto al = aliases_.find(to_lower(verb));
    if (al != aliases_.end()) return {VerbVerdict::aliased, al->second};
    return {VerbVerdict::unknown, ""};
  }

  bool contains(const std::string& verb) const {
    return resolve(verb).verdict != VerbVerdict::unknown;
  }

  const std::vector<std::string>& verbs() const { return verbs_; }
  size_t size() const { return verbs_.size(); }

  // "Search, Find, Navigate, ..." for prompt substitution.
  std::string joined() const { return join(verbs_, ", "); }

  static ActionSet from_stream(std::istream& in) {
    ActionSet set;
    std::vector<std::pair<std::string, std::string>> pending;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        set.add_verb(line);
        continue;
      }
      std::string alias = trim(line.substr(0, eq));
      std::string canonical = trim(line.substr(eq + 1));
      if (alias.empty() || canonical.empty())
        throw config_error("action set line " + std::to_string(lineno) + ": malformed alias");
      pending.emplace_back(alias, canonical);
    }
    // aliases may precede their canonical verb in the file, resolve last
    for (auto& [alias, canonical] : pending) set.add_alias(alias, canonical);
    return set;
  }

  static ActionSet from_string(const std::string& text) {
    std::istringstream in(text);
    return from_stream(in);
  }

  static ActionSet from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open action set file: " + path);
    return from_stream(in);
  }

  static ActionSet defaults() {
    ActionSet set;
    for (const char* v : {"Search", "Find", "Navigate", "GotoObject", "Map", "Pick", "Place",
                          "Put", "Open", "Close", "Adjust", "Toggle", "Clean", "Heat", "Cool",
                          "Slice"})
      set.add_verb(v);
    return set;
  }

 private:
  std::vector<std::string> verbs_;
  std::unordered_map<std::string, std::string> by_key_;   // lower(verb) -> spelling
  std::unordered_map<std::string, std::string> aliases_;  // lower(alias) -> canonical
};

}  // namespace planbench
