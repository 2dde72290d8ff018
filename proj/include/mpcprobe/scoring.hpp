#pragma once

#include <cmath>
#include <future>
#include <string>
#include <vector>

#include "mpcprobe/backend.hpp"
#include "mpcprobe/error.hpp"

namespace mpcprobe {

/// Conditional perplexity exp(-mean logprob), i.e. 1 / P(r|p)^(1/|r|).
inline double cppl(const LogprobResult& lr) {
  check_logprob_result(lr);
  double sum = 0;
  for (double lp : lr.logprobs) sum += lp;
  return std::exp(-sum / static_cast<double>(lr.logprobs.size()));
}

struct CandidateScore {
  std::size_t candidate_id = 0;
  double cppl = 0;
  double normalized_prob = 0;
  std::size_t token_count = 0;
};

/// Fills normalized_prob with (1/cppl_k) / sum_i (1/cppl_i).
inline void normalize(std::vector<CandidateScore>& scores) {
  double total = 0;
  for (const auto& s : scores) total += 1.0 / s.cppl;
  for (auto& s : scores) s.normalized_prob = (1.0 / s.cppl) / total;
}

struct ScoringOptions {
  RetryPolicy retry;
  bool concurrent = false;
};

/// Scores every candidate as a continuation of `context`. Any candidate that
/// stays unscored after retries aborts the whole instance.
inline std::vector<CandidateScore> score_candidates(const std::string& context, const std::vector<std::string>& candidates,
                                                    Backend& backend, const ScoringOptions& opts = {}) {
  if (candidates.size() < 2) throw std::invalid_argument("score_candidates needs at least two candidates");

  auto score_one = [&](std::size_t i) {
    try {
      auto lr = with_retry(opts.retry, [&] { return backend.continuation_logprobs(context, candidates[i]); });
      return CandidateScore{i, cppl(lr), 0.0, lr.tokens.size()};
    } catch (const Error& e) {
      throw Error(Errc::kInstanceAborted, "candidate " + std::to_string(i) + " unscored: " + e.what());
    }
  };

  std::vector<CandidateScore> scores(candidates.size());
  if (opts.concurrent) {
    std::vector<std::future<CandidateScore>> pending;
    for (std::size_t i = 0; i < candidates.size(); ++i) pending.push_back(std::async(std::launch::async, score_one, i));
    for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = pending[i].get();
  } else {
    for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = score_one(i);
  }
  normalize(scores);
  return scores;
}

/// Argmin CPPL; exact ties go to the lowest candidate index.
inline std::size_t select(const std::vector<CandidateScore>& scores) {
  if (scores.empty()) throw std::invalid_argument("select on empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const auto& b = scores[best];
    if (s.cppl < b.cppl || (s.cppl == b.cppl && s.candidate_id < b.candidate_id)) best = i;
  }
  return scores[best].candidate_id;
}

}  // namespace mpcprobe
