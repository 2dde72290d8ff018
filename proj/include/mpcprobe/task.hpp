#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpcprobe/corpus.hpp"
#include "mpcprobe/error.hpp"
#include "mpcprobe/util.hpp"

namespace mpcprobe {

inline constexpr std::string_view kDefaultDummyTag = "[JORDAN]";
inline constexpr int kMaxDistractorDraws = 32;

struct RsInstance {
  std::string conversation_id;
  Conversation context;
  std::string next_speaker_tag{kNextSpeakerTag};
  std::array<std::string, 2> candidates;
  int gold_index = 0;
  std::string distractor_source;
  std::uint64_t seed = 0;
};

struct ArInstance {
  std::string conversation_id;
  Conversation context;
  std::string next_speaker_tag{kNextSpeakerTag};
  std::vector<std::string> candidates;  // conversation users in tag-pool order, dummy last
  std::string gold;
  std::string dummy;
};

/// Per-instance generator; independent of the order instances are built in.
inline std::mt19937_64 instance_rng(std::uint64_t seed, std::string_view conversation_id) {
  return std::mt19937_64(mix64(fnv1a(conversation_id, fnv1a_u64(seed))));
}

/// Binary response selection: the true final message against the final
/// message of another conversation drawn uniformly from the same pool.
inline RsInstance build_rs_instance(const Conversation& conv, const std::vector<Conversation>& pool, std::uint64_t seed) {
  std::vector<const Conversation*> others;
  for (const auto& c : pool) {
    if (c.id != conv.id && !c.turns.empty()) others.push_back(&c);
  }
  if (others.empty()) throw Error(Errc::kDistractorUnavailable, "no other conversation in the pool for " + conv.id);

  RsInstance inst;
  inst.conversation_id = conv.id;
  inst.context = context_of(conv);
  inst.seed = seed;
  const std::string& truth = conv.turns.back().text;

  auto rng = instance_rng(seed, conv.id);
  const Conversation* distractor = nullptr;
  for (int draw = 0; draw < kMaxDistractorDraws; ++draw) {
    const Conversation* pick = others[uniform_index(rng, others.size())];
    if (pick->turns.back().text != truth) {
      distractor = pick;
      break;
    }
  }
  if (!distractor) {
    throw Error(Errc::kDistractorUnavailable, "no distinct distractor for " + conv.id + " after " +
                                                  std::to_string(kMaxDistractorDraws) + " draws");
  }
  inst.distractor_source = distractor->id;
  inst.gold_index = static_cast<int>(uniform_index(rng, 2));
  inst.candidates[inst.gold_index] = truth;
  inst.candidates[1 - inst.gold_index] = distractor->turns.back().text;
  return inst;
}

inline ArInstance build_ar_instance(const Conversation& conv, std::string_view dummy_tag = kDefaultDummyTag) {
  if (conv.users.count(UserId(std::string(dummy_tag)))) {
    throw Error(Errc::kDummyCollision, "dummy tag " + std::string(dummy_tag) + " is a user of " + conv.id);
  }
  ArInstance inst;
  inst.conversation_id = conv.id;
  inst.context = context_of(conv);
  inst.dummy = dummy_tag;
  for (auto tag : kTagPool) {
    if (conv.users.count(UserId(std::string(tag)))) inst.candidates.emplace_back(tag);
  }
  // Users that are not pool tags (a conversation that was never anonymized) follow in id order.
  for (const auto& u : conv.users) {
    if (std::find(kTagPool.begin(), kTagPool.end(), u.value) == kTagPool.end()) inst.candidates.push_back(u.value);
  }
  inst.candidates.emplace_back(dummy_tag);
  inst.gold = conv.turns.back().addressee.value;
  return inst;
}

inline std::size_t gold_index(const ArInstance& inst) {
  return static_cast<std::size_t>(std::find(inst.candidates.begin(), inst.candidates.end(), inst.gold) -
                                  inst.candidates.begin());
}

inline nlohmann::ordered_json to_json(const RsInstance& inst) {
  return {{"task", "RS"},
          {"conversation_id", inst.conversation_id},
          {"next_speaker", inst.next_speaker_tag},
          {"candidates", inst.candidates},
          {"gold_index", inst.gold_index},
          {"distractor_source", inst.distractor_source},
          {"seed", inst.seed}};
}

inline nlohmann::ordered_json to_json(const ArInstance& inst) {
  return {{"task", "AR"},
          {"conversation_id", inst.conversation_id},
          {"next_speaker", inst.next_speaker_tag},
          {"candidates", inst.candidates},
          {"gold", inst.gold},
          {"dummy", inst.dummy}};
}

}  // namespace mpcprobe
