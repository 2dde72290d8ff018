#pragma once

#include <random>
#include <string>
#include <vector>

#include "mpcprobe/corpus.hpp"
#include "mpcprobe/util.hpp"

namespace mpcprobe {

// Synthetic IRC-like conversations for tests, demos and the bundled corpus.

struct SyntheticSpec {
  int users = 4;
  int turns = 15;
  bool connected = true;
  bool next_speaker_in_context = true;
};

namespace detail {

inline constexpr std::string_view kSynthWords[] = {
    "anyone",  "knows",   "how",     "to",      "fix",     "the",    "wireless", "driver",  "after",  "upgrade",
    "try",     "running", "sudo",    "apt",     "get",     "update", "then",     "reboot",  "grub",   "menu",
    "shows",   "nothing", "check",   "dmesg",   "output",  "maybe",  "kernel",   "module",  "is",     "missing",
    "works",   "now",     "thanks",  "which",   "version", "of",     "ubuntu",   "are",     "you",    "on",
    "mount",   "the",     "partition", "first", "paste",   "your",   "xorg",     "log",     "please", "sound",
    "card",    "not",     "detected", "did",    "that",    "help",   "yes",      "no",      "hmm",    "ok"};

inline std::string synth_text(std::mt19937_64& rng, const std::string& addressee) {
  std::string out;
  if (uniform_index(rng, 10) < 3) out = addressee + ": ";
  const std::size_t n = 3 + uniform_index(rng, 9);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kSynthWords[uniform_index(rng, std::size(kSynthWords))];
  }
  return out;
}

inline std::string synth_name(std::mt19937_64& rng, int k) {
  static constexpr std::string_view kStems[] = {"ubu", "tux", "grub", "apt", "kern", "deb", "xorg", "gnome"};
  return std::string(kStems[uniform_index(rng, std::size(kStems))]) + "_" + std::to_string(k) +
         std::to_string(uniform_index(rng, 100));
}

}  // namespace detail

/// One conversation with exactly `spec.users` users and `spec.turns` turns.
/// `spec.turns` must be at least `spec.users` (one turn to introduce each user
/// plus the final turn) and `spec.users` at least 3 for the disconnected shape.
inline Conversation synthesize_conversation(std::uint64_t seed, std::string id, const SyntheticSpec& spec) {
  std::mt19937_64 rng(mix64(fnv1a(id, fnv1a_u64(seed))));
  const int k = spec.users;
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back(detail::synth_name(rng, i));

  // Users reachable before the final turn; a late joiner only speaks last.
  const int context_users = spec.next_speaker_in_context ? k : k - 1;
  std::vector<std::pair<int, int>> pairs;

  if (spec.connected) {
    for (int i = 1; i < context_users; ++i) {
      const int j = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(i)));
      pairs.emplace_back(uniform_index(rng, 2) ? std::make_pair(i, j) : std::make_pair(j, i));
    }
  } else {
    // Two components: {0, 1} and {2, ..., context_users - 1}.
    pairs.emplace_back(0, 1);
    if (context_users == 3) {
      pairs.emplace_back(2, 2);
    } else {
      for (int i = 3; i < context_users; ++i) {
        pairs.emplace_back(i, 2 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(i - 2))));
      }
    }
  }

  auto same_component = [&](int a, int b) { return spec.connected || ((a < 2) == (b < 2)); };
  while (static_cast<int>(pairs.size()) < spec.turns - 1) {
    const int s = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(context_users)));
    int a = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(context_users)));
    if (a == s || !same_component(s, a)) continue;
    pairs.emplace_back(s, a);
  }
  for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[uniform_index(rng, i)]);

  // Final turn.
  int final_speaker;
  int final_addressee;
  if (spec.next_speaker_in_context) {
    // A disconnected shape may have a one-user component, so speak from {0, 1}.
    final_speaker = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec.connected ? k : 2)));
    do {
      final_addressee = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(k)));
    } while (final_addressee == final_speaker || !same_component(final_speaker, final_addressee));
  } else {
    final_speaker = k - 1;
    final_addressee = spec.connected ? static_cast<int>(uniform_index(rng, static_cast<std::size_t>(k - 1))) : 0;
  }
  pairs.emplace_back(final_speaker, final_addressee);

  std::vector<std::array<std::string, 3>> rows;
  for (const auto& [s, a] : pairs) rows.push_back({names[s], names[a], detail::synth_text(rng, names[a])});
  return make_conversation(std::move(id), rows);
}

/// `count` well-formed conversations that all pass the default filter for
/// their user count.
inline std::vector<Conversation> synthesize_corpus(std::uint64_t seed, int count, int users, int turns = 15) {
  std::vector<Conversation> out;
  char id[32];
  for (int i = 0; i < count; ++i) {
    std::snprintf(id, sizeof(id), "syn-%04d", i + 1);
    SyntheticSpec spec;
    spec.users = users;
    spec.turns = turns;
    out.push_back(synthesize_conversation(seed, id, spec));
  }
  return out;
}

}  // namespace mpcprobe
