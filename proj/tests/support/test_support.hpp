#pragma once

// Helpers shared by the unit tests and the acceptance binary. The oracles
// here deliberately avoid the library's own graph and filter code.

#include <unistd.h>

#include <array>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mpcprobe/corpus.hpp"
#include "mpcprobe/prompt.hpp"
#include "mpcprobe/util.hpp"

#ifndef MPCPROBE_SOURCE_DIR
#define MPCPROBE_SOURCE_DIR "."
#endif

namespace mpcprobe::support {

inline std::filesystem::path source_dir() { return MPCPROBE_SOURCE_DIR; }
inline std::filesystem::path golden_dir() { return source_dir() / "tests" / "golden"; }
inline std::filesystem::path fixture_dir() { return source_dir() / "tests" / "fixtures"; }

inline bool regenerate_goldens() {
  const char* v = std::getenv("MPC_PROBE_REGEN_GOLDENS");
  return v && std::string(v) == "1";
}

/// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mpcprobe-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Golden files

inline std::string golden_name(Task t, Combination c, Scheme s) {
  std::string combo(to_string(c));
  for (auto& ch : combo) {
    if (ch == '+') ch = '_';
  }
  return std::string(to_string(t)) + "__" + combo + "__" + std::string(to_string(s)) + ".txt";
}

/// Every system prompt that has a golden: 33 classification + 6 generation.
struct PromptCase {
  Task task;
  Combination combo;
  Scheme scheme;
};

inline std::vector<PromptCase> golden_prompt_cases() {
  std::vector<PromptCase> out;
  for (Task t : {Task::kAR, Task::kRS, Task::kSummGen, Task::kDescGen}) {
    for (auto c : legal_combinations(t)) {
      for (auto s : kAllSchemes) out.push_back({t, c, s});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Published accuracy and gap tables (datasets U3..U6)

struct PublishedAccuracy {
  Task task;
  Combination combo;
  // [dataset][scheme] with scheme order verbose, medium, concise
  std::array<std::array<double, 3>, 4> acc;
};

struct PublishedGap {
  Task task;
  Combination combo;
  std::array<double, 4> gap_percent;
  std::array<Scheme, 4> best;
};

inline std::vector<PublishedAccuracy> published_accuracy_tables() {
  using C = Combination;
  auto col = [](std::array<double, 4> v, std::array<double, 4> m, std::array<double, 4> c) {
    std::array<std::array<double, 3>, 4> out{};
    for (int d = 0; d < 4; ++d) out[d] = {v[d], m[d], c[d]};
    return out;
  };
  return {
      {Task::kAR, C::kConv, col({0.613, 0.414, 0.352, 0.277}, {0.582, 0.409, 0.344, 0.283}, {0.595, 0.416, 0.298, 0.289})},
      {Task::kAR, C::kConvStruct,
       col({0.660, 0.584, 0.525, 0.449}, {0.609, 0.501, 0.513, 0.431}, {0.571, 0.477, 0.465, 0.400})},
      {Task::kAR, C::kStructSumm,
       col({0.623, 0.517, 0.448, 0.397}, {0.644, 0.491, 0.465, 0.429}, {0.617, 0.441, 0.433, 0.374})},
      {Task::kAR, C::kStructDesc,
       col({0.637, 0.499, 0.456, 0.406}, {0.604, 0.457, 0.442, 0.380}, {0.618, 0.458, 0.404, 0.323})},
      {Task::kAR, C::kStructSummDesc,
       col({0.628, 0.472, 0.429, 0.383}, {0.620, 0.455, 0.444, 0.374}, {0.607, 0.433, 0.417, 0.323})},
      {Task::kAR, C::kStruct, col({0.654, 0.572, 0.537, 0.454}, {0.626, 0.515, 0.498, 0.434}, {0.573, 0.487, 0.438, 0.389})},
      {Task::kRS, C::kConv, col({0.625, 0.627, 0.619, 0.640}, {0.624, 0.619, 0.613, 0.646}, {0.612, 0.617, 0.610, 0.649})},
      {Task::kRS, C::kConvStruct,
       col({0.626, 0.611, 0.602, 0.620}, {0.626, 0.609, 0.606, 0.631}, {0.618, 0.616, 0.590, 0.629})},
      {Task::kRS, C::kStructSumm,
       col({0.572, 0.570, 0.569, 0.626}, {0.575, 0.556, 0.573, 0.614}, {0.564, 0.572, 0.587, 0.623})},
      {Task::kRS, C::kStructDesc,
       col({0.565, 0.553, 0.540, 0.597}, {0.553, 0.565, 0.550, 0.586}, {0.542, 0.562, 0.538, 0.606})},
      {Task::kRS, C::kStructSummDesc,
       col({0.576, 0.570, 0.573, 0.623}, {0.574, 0.570, 0.575, 0.614}, {0.573, 0.583, 0.585, 0.620})},
  };
}

inline std::vector<PublishedGap> published_gap_table() {
  using C = Combination;
  constexpr Scheme V = Scheme::kVerbose, M = Scheme::kMedium, K = Scheme::kConcise;
  return {
      {Task::kAR, C::kConv, {2.7, 0.6, 5.8, 2.0}, {V, K, V, K}},
      {Task::kRS, C::kConv, {0.8, 0.9, 0.8, 0.6}, {V, V, V, K}},
      {Task::kAR, C::kConvStruct, {7.1, 10.9, 4.5, 4.9}, {V, V, V, V}},
      {Task::kRS, C::kConvStruct, {0.4, 0.6, 1.1, 0.8}, {V, K, M, M}},
      {Task::kAR, C::kStructSumm, {2.5, 6.5, 3.6, 6.7}, {M, V, M, M}},
      {Task::kRS, C::kStructSumm, {0.8, 1.0, 1.7, 0.8}, {M, K, K, V}},
      {Task::kAR, C::kStructDesc, {2.7, 5.6, 4.8, 8.9}, {V, V, V, V}},
      {Task::kRS, C::kStructDesc, {2.1, 0.9, 1.3, 1.6}, {V, M, M, K}},
      {Task::kAR, C::kStructSummDesc, {1.5, 4.0, 3.2, 6.0}, {V, V, M, V}},
      {Task::kRS, C::kStructSummDesc, {0.2, 1.4, 1.2, 0.6}, {V, K, K, V}},
      {Task::kAR, C::kStruct, {5.6, 8.3, 8.5, 6.3}, {V, V, V, V}},
  };
}

// ---------------------------------------------------------------------------
// Brute-force graph oracle over an adjacency matrix indexed by sorted user id

struct MatrixOracle {
  std::vector<std::string> ids;
  std::vector<std::vector<long>> counts;  // counts[s][a] = messages s -> a

  explicit MatrixOracle(const std::vector<Turn>& turns) {
    std::set<std::string> all;
    for (const auto& t : turns) {
      all.insert(t.speaker.value);
      all.insert(t.addressee.value);
    }
    ids.assign(all.begin(), all.end());
    counts.assign(ids.size(), std::vector<long>(ids.size(), 0));
    for (const auto& t : turns) counts[index(t.speaker.value)][index(t.addressee.value)]++;
  }

  std::size_t index(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == id) return i;
    }
    return ids.size();
  }

  long degree(const std::string& id) const {
    const auto u = index(id);
    long d = 0;
    for (std::size_t v = 0; v < ids.size(); ++v) {
      if (v != u && (counts[u][v] > 0 || counts[v][u] > 0)) ++d;
    }
    return d;
  }

  // Exact fraction (messages, recipients); (0, 1) when u sent nothing to others.
  std::pair<long, long> avg_outgoing_weight(const std::string& id) const {
    const auto u = index(id);
    long msgs = 0, recipients = 0;
    for (std::size_t v = 0; v < ids.size(); ++v) {
      if (v == u || counts[u][v] == 0) continue;
      msgs += counts[u][v];
      ++recipients;
    }
    if (recipients == 0) return {0, 1};
    return {msgs, recipients};
  }

  bool connected() const {
    if (ids.empty()) return false;
    std::vector<bool> seen(ids.size(), false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < ids.size(); ++v) {
        if (!seen[v] && v != u && (counts[u][v] > 0 || counts[v][u] > 0)) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
    for (bool s : seen) {
      if (!s) return false;
    }
    return true;
  }
};

/// Random conversation with up to `max_users` users and `max_turns` turns;
/// self-addressed turns are allowed so the oracle sees that edge case too.
inline Conversation random_conversation(std::mt19937_64& rng, const std::string& id, int max_users, int max_turns) {
  const int users = 2 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_users - 1)));
  const int turns = 2 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_turns - 1)));
  std::vector<std::array<std::string, 3>> rows;
  for (int i = 0; i < turns; ++i) {
    const auto s = uniform_index(rng, static_cast<std::size_t>(users));
    auto a = uniform_index(rng, static_cast<std::size_t>(users));
    if (a == s && uniform_index(rng, 8) != 0) a = (a + 1) % static_cast<std::size_t>(users);
    rows.push_back({"u" + std::to_string(s), "u" + std::to_string(a), "msg " + std::to_string(i)});
  }
  return make_conversation(id, rows);
}

// ---------------------------------------------------------------------------
// Independent re-check of the diagnostic predicates

struct PredicateCheck {
  bool user_count = false;
  bool length = false;
  bool connectivity = false;
  bool next_speaker_in_context = false;
  bool anonymization = false;

  bool all() const { return user_count && length && connectivity && next_speaker_in_context && anonymization; }
};

inline PredicateCheck recheck(const Conversation& conv, int user_count, int max_len, bool exact_len) {
  PredicateCheck c;
  std::set<std::string> users;
  for (const auto& t : conv.turns) {
    users.insert(t.speaker.value);
    users.insert(t.addressee.value);
  }
  const int n = static_cast<int>(conv.turns.size());
  c.user_count = static_cast<int>(users.size()) == user_count;
  c.length = exact_len ? n == max_len : n <= max_len;
  c.connectivity = MatrixOracle(conv.turns).connected();
  std::set<std::string> before;
  for (int i = 0; i + 1 < n; ++i) {
    before.insert(conv.turns[i].speaker.value);
    before.insert(conv.turns[i].addressee.value);
  }
  c.next_speaker_in_context = n >= 2 && before.count(conv.turns.back().speaker.value) > 0;
  c.anonymization = users.size() <= 6;
  return c;
}

}  // namespace mpcprobe::support
