#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mpcprobe/error.hpp"
#include "mpcprobe/util.hpp"

namespace mpcprobe {

/// Per-token natural-log probabilities of a continuation given its context.
struct LogprobResult {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;

  bool operator==(const LogprobResult&) const = default;
};

inline void check_logprob_result(const LogprobResult& r) {
  if (r.tokens.empty()) throw Error(Errc::kEmptyContinuation, "backend returned zero tokens");
  if (r.tokens.size() != r.logprobs.size()) {
    throw Error(Errc::kBackendError, "token/logprob length mismatch: " + std::to_string(r.tokens.size()) + " vs " +
                                         std::to_string(r.logprobs.size()));
  }
  for (double lp : r.logprobs) {
    if (!(lp <= 1e-9)) throw Error(Errc::kBackendError, "positive log-probability " + std::to_string(lp));
  }
}

/// A language model seen through two operations. Implementations must be
/// callable from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual LogprobResult continuation_logprobs(std::string_view context, std::string_view continuation) = 0;

  /// Greedy decoding only.
  virtual std::string generate(std::string_view prompt, int max_tokens) = 0;

  virtual std::string identity() const = 0;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{200};
  double multiplier = 2.0;
};

/// Runs `fn`, retrying retryable errors with exponential backoff.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  auto delay = policy.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= policy.attempts) throw;
    }
    std::this_thread::sleep_for(delay);
    delay = std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(delay.count()) * policy.multiplier));
  }
}

/// Whitespace tokenizer used by the mock model.
inline std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < text.size() && !(text[j] == ' ' || text[j] == '\t' || text[j] == '\n' || text[j] == '\r')) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Deterministic stand-in for a model. A token's log-probability is a hash of
/// (trailing context window, token, seed) mapped into [-6, -0.1].
class MockBackend : public Backend {
 public:
  static constexpr double kMinLogprob = -6.0;
  static constexpr double kMaxLogprob = -0.1;

  explicit MockBackend(std::uint64_t seed = 0, std::size_t window_bytes = 4096)
      : seed_(seed), window_bytes_(window_bytes) {}

  LogprobResult continuation_logprobs(std::string_view context, std::string_view continuation) override {
    LogprobResult r;
    r.tokens = whitespace_tokens(continuation);
    if (r.tokens.empty()) throw Error(Errc::kEmptyContinuation, "continuation has no tokens");
    std::string running(context);
    for (const auto& tok : r.tokens) {
      r.logprobs.push_back(token_logprob(running, tok));
      running += tok;
      running += ' ';
    }
    return r;
  }

  double token_logprob(std::string_view history, std::string_view token) const {
    const auto window = history.size() > window_bytes_ ? history.substr(history.size() - window_bytes_) : history;
    std::uint64_t h = fnv1a(window);
    h = fnv1a("\x1f", h);
    h = fnv1a(token, h);
    h = fnv1a_u64(seed_, h);
    return kMinLogprob + unit_interval(mix64(h)) * (kMaxLogprob - kMinLogprob);
  }

  /// Fills the `<placeholder>` lines of the last output template found in the
  /// prompt with pseudo-words; without a template, emits a short word string.
  std::string generate(std::string_view prompt, int max_tokens) override {
    const auto lines = split(prompt, '\n');
    std::vector<std::size_t> block;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (has_placeholder(lines[i])) {
        if (!block.empty() && block.back() + 1 != i) block.clear();
        block.push_back(i);
      }
    }
    const std::uint64_t base = fnv1a_u64(seed_, fnv1a(prompt));
    if (block.empty()) {
      std::vector<std::string> words;
      const int n = std::max(1, std::min(max_tokens, 12));
      for (int k = 0; k < n; ++k) words.push_back(pseudo_word(base, 0, static_cast<std::uint64_t>(k)));
      return join(words, " ");
    }
    std::vector<std::string> out;
    for (std::size_t li = 0; li < block.size(); ++li) out.push_back(fill_line(lines[block[li]], base, li));
    return join(out, "\n");
  }

  std::string identity() const override { return "mock:seed=" + std::to_string(seed_); }

 private:
  static bool has_placeholder(std::string_view line) {
    auto open = line.find('<');
    return open != std::string_view::npos && line.find('>', open) != std::string_view::npos &&
           line.find(' ', open) > line.find('>', open);
  }

  std::string fill_line(std::string_view line, std::uint64_t base, std::size_t line_index) const {
    // A template's last line shares its line with the frame; stop before it.
    line = line.substr(0, line.find(" <</SYS>>"));
    std::string out;
    std::size_t slot = 0;
    std::size_t i = 0;
    while (i < line.size()) {
      auto open = line.find('<', i);
      auto close = open == std::string_view::npos ? open : line.find('>', open);
      if (open == std::string_view::npos || close == std::string_view::npos) {
        out += line.substr(i);
        break;
      }
      out += line.substr(i, open - i);
      const std::uint64_t slot_seed = fnv1a_u64(line_index * 64 + slot, base);
      const std::size_t n_words = line.substr(open, close - open + 1) == "<explanation>" ? 3 + slot_seed % 4 : 1;
      std::vector<std::string> words;
      for (std::size_t k = 0; k < n_words; ++k) words.push_back(pseudo_word(slot_seed, slot, k));
      out += join(words, " ");
      ++slot;
      i = close + 1;
    }
    return out;
  }

  static std::string pseudo_word(std::uint64_t seed, std::uint64_t slot, std::uint64_t k) {
    static constexpr std::string_view kVocabulary[] = {
        "install",  "kernel",   "driver",  "network", "package", "upgrade", "helpful", "curious",
        "patient",  "terse",    "config",  "restart", "grub",    "wireless", "sound",  "display",
        "friendly", "direct",   "repo",    "mount",   "partition", "boot",  "server", "question",
        "detailed", "cautious", "sudo",    "apt",     "error",   "log",     "update", "persistent"};
    const auto h = mix64(fnv1a_u64(k, fnv1a_u64(slot, seed)));
    return std::string(kVocabulary[h % std::size(kVocabulary)]);
  }

  std::uint64_t seed_;
  std::size_t window_bytes_;
};

}  // namespace mpcprobe
