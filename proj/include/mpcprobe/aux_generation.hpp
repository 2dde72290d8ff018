#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpcprobe/backend.hpp"
#include "mpcprobe/corpus.hpp"
#include "mpcprobe/error.hpp"
#include "mpcprobe/prompt.hpp"
#include "mpcprobe/util.hpp"

namespace mpcprobe {

inline constexpr int kSummaryTopics = 3;
inline constexpr int kDescriptionAdjectives = 5;
inline constexpr int kDefaultGenerationTokens = 256;

struct GenerationProvenance {
  std::string backend_id;
  std::string prompt_hash;  // FNV-1a of the full generation prompt, hex

  bool operator==(const GenerationProvenance&) const = default;
};

struct Topic {
  std::string title;
  std::string explanation;

  bool operator==(const Topic&) const = default;
};

struct Summary {
  std::vector<Topic> topics;  // exactly 3 when parsed, empty when degraded
  std::string raw_text;
  GenerationProvenance provenance;
  bool parse_degraded = false;

  bool operator==(const Summary&) const = default;
};

struct Adjective {
  std::string adjective;
  std::string explanation;

  bool operator==(const Adjective&) const = default;
};

struct UserDescription {
  std::vector<Adjective> adjectives;  // exactly 5 when parsed
  std::string subject{kNextSpeakerTag};
  std::string raw_text;
  GenerationProvenance provenance;
  bool parse_degraded = false;

  bool operator==(const UserDescription&) const = default;
};

// ---------------------------------------------------------------------------
// Parsing of the two output templates

namespace detail {

// V1: "Topic 1: <title> - <explanation>"   V2: "1. <title>: <explanation>"
inline std::vector<std::pair<std::string, std::string>> parse_items(std::string_view raw, std::string_view v1_word,
                                                                     OutputVariant variant) {
  const std::regex v1("^\\s*" + std::string(v1_word) + "\\s*([0-9]+)\\s*:\\s*(.+?)\\s+-\\s+(.+?)\\s*$");
  const std::regex v2("^\\s*([0-9]+)\\.\\s*(.+?)\\s*:\\s+(.+?)\\s*$");
  const std::regex& re = variant == OutputVariant::kV1 ? v1 : v2;
  std::vector<std::pair<std::string, std::string>> items;
  int expected = 1;
  for (const auto& line : split(raw, '\n')) {
    std::smatch m;
    if (!std::regex_match(line, m, re)) continue;
    if (std::stoi(m[1].str()) != expected) return {};
    ++expected;
    items.emplace_back(m[2].str(), m[3].str());
  }
  return items;
}

}  // namespace detail

/// Exactly three numbered topics, or nullopt.
inline std::optional<std::vector<Topic>> parse_summary(std::string_view raw, OutputVariant variant) {
  auto items = detail::parse_items(raw, "Topic", variant);
  if (items.size() != kSummaryTopics) return std::nullopt;
  std::vector<Topic> out;
  for (auto& [a, b] : items) out.push_back({a, b});
  return out;
}

/// Exactly five numbered adjectives, or nullopt.
inline std::optional<std::vector<Adjective>> parse_user_description(std::string_view raw, OutputVariant variant) {
  auto items = detail::parse_items(raw, "Adjective", variant);
  if (items.size() != kDescriptionAdjectives) return std::nullopt;
  std::vector<Adjective> out;
  for (auto& [a, b] : items) out.push_back({a, b});
  return out;
}

inline Summary make_summary(std::string raw, OutputVariant variant, GenerationProvenance prov) {
  Summary s;
  s.raw_text = std::move(raw);
  s.provenance = std::move(prov);
  if (auto topics = parse_summary(s.raw_text, variant)) {
    s.topics = std::move(*topics);
  } else {
    s.parse_degraded = true;
  }
  return s;
}

inline UserDescription make_user_description(std::string raw, OutputVariant variant, GenerationProvenance prov) {
  UserDescription d;
  d.raw_text = std::move(raw);
  d.provenance = std::move(prov);
  if (auto adjectives = parse_user_description(d.raw_text, variant)) {
    d.adjectives = std::move(*adjectives);
  } else {
    d.parse_degraded = true;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Generation

/// Generation prompt for a summary or description of `conv` (the text the
/// model is allowed to see, normally the context without the target turn).
inline AssembledPrompt generation_prompt(Task task, const Conversation& conv, Scheme scheme, OutputVariant variant) {
  if (task != Task::kSummGen && task != Task::kDescGen) {
    throw Error(Errc::kIllegalCombination, std::string(to_string(task)) + " is not a generation task");
  }
  AssemblyOptions opts;
  opts.variant = variant;
  return assemble(task, Combination::kConvStruct, scheme,
                  {render_conversation_transcript(conv), render_interaction_transcript(conv)}, kNextSpeakerTag, opts);
}

namespace detail {

inline std::pair<std::string, GenerationProvenance> run_generation(Task task, const Conversation& conv, Backend& backend,
                                                                   Scheme scheme, OutputVariant variant,
                                                                   const RetryPolicy& retry, int max_tokens) {
  const std::string prompt = generation_prompt(task, conv, scheme, variant).text();
  std::string raw = with_retry(retry, [&] { return backend.generate(prompt, max_tokens); });
  if (trim(raw).empty()) throw Error(Errc::kEmptyGeneration, "backend produced no text for " + conv.id);
  return {std::move(raw), GenerationProvenance{backend.identity(), hex64(fnv1a(prompt))}};
}

}  // namespace detail

inline Summary generate_summary(const Conversation& conv, Backend& backend, Scheme scheme, OutputVariant variant,
                                const RetryPolicy& retry = {}, int max_tokens = kDefaultGenerationTokens) {
  auto [raw, prov] = detail::run_generation(Task::kSummGen, conv, backend, scheme, variant, retry, max_tokens);
  return make_summary(std::move(raw), variant, std::move(prov));
}

inline UserDescription generate_user_description(const Conversation& conv, std::string_view next_speaker_tag,
                                                 Backend& backend, Scheme scheme, OutputVariant variant,
                                                 const RetryPolicy& retry = {},
                                                 int max_tokens = kDefaultGenerationTokens) {
  if (next_speaker_tag != kNextSpeakerTag) {
    throw Error(Errc::kInvalidNextSpeaker, "descriptions are generated for " + std::string(kNextSpeakerTag));
  }
  auto [raw, prov] = detail::run_generation(Task::kDescGen, conv, backend, scheme, variant, retry, max_tokens);
  return make_user_description(std::move(raw), variant, std::move(prov));
}

// ---------------------------------------------------------------------------
// On-disk cache, one JSON file per key

struct AuxKey {
  std::string conversation_id;
  Task task = Task::kSummGen;
  Scheme scheme = Scheme::kVerbose;
  OutputVariant variant = OutputVariant::kV1;
  std::string backend_id;

  std::string canonical() const {
    return conversation_id + '\x1f' + std::string(to_string(task)) + '\x1f' + std::string(to_string(scheme)) + '\x1f' +
           std::string(to_string(variant)) + '\x1f' + backend_id;
  }

  std::string filename() const { return hex64(fnv1a(canonical())) + ".json"; }
};

struct CacheEntry {
  std::string raw_text;
  nlohmann::ordered_json parsed;  // array of {title|adjective, explanation} or null
  GenerationProvenance provenance;
};

class AuxCache {
 public:
  explicit AuxCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_of(const AuxKey& key) const { return dir_ / key.filename(); }

  /// nullopt on miss. A corrupt entry is evicted and reported as CacheCorrupt.
  std::optional<CacheEntry> lookup(const AuxKey& key) const {
    const auto path = path_of(key);
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
      auto j = nlohmann::json::parse(read_file(path));
      if (j.at("key").get<std::string>() != key.canonical()) throw std::runtime_error("key mismatch");
      CacheEntry e;
      e.raw_text = j.at("raw_text").get<std::string>();
      if (j.at("checksum").get<std::string>() != hex64(fnv1a(e.raw_text))) throw std::runtime_error("checksum mismatch");
      e.parsed = j.at("parsed");
      e.provenance.backend_id = j.at("provenance").at("backend_id").get<std::string>();
      e.provenance.prompt_hash = j.at("provenance").at("prompt_hash").get<std::string>();
      return e;
    } catch (const std::exception& ex) {
      std::error_code ec;
      std::filesystem::remove(path, ec);
      throw Error(Errc::kCacheCorrupt, path.string() + ": " + ex.what());
    }
  }

  void store(const AuxKey& key, const CacheEntry& e) const {
    nlohmann::ordered_json j = {
        {"key", key.canonical()},
        {"raw_text", e.raw_text},
        {"parsed", e.parsed},
        {"provenance", {{"backend_id", e.provenance.backend_id}, {"prompt_hash", e.provenance.prompt_hash}}},
        {"checksum", hex64(fnv1a(e.raw_text))}};
    write_file_atomic(path_of(key), j.dump(2) + "\n");
  }

  /// Serializes work on one key; distinct keys mostly proceed in parallel.
  std::mutex& key_mutex(const AuxKey& key) const { return stripes_[fnv1a(key.canonical()) % stripes_.size()]; }

 private:
  std::filesystem::path dir_;
  mutable std::array<std::mutex, 64> stripes_;
};

namespace detail {

template <typename T, typename Generate, typename FromEntry, typename ToEntry>
T cached(AuxCache* cache, const AuxKey& key, Generate&& gen, FromEntry&& from_entry, ToEntry&& to_entry) {
  if (!cache) return gen();
  std::lock_guard lock(cache->key_mutex(key));
  try {
    if (auto hit = cache->lookup(key)) return from_entry(*hit);
  } catch (const Error& e) {
    if (e.code() != Errc::kCacheCorrupt) throw;
  }
  T value = gen();
  cache->store(key, to_entry(value));
  return value;
}

}  // namespace detail

inline Summary summary_for(const Conversation& conv, Backend& backend, Scheme scheme, OutputVariant variant,
                           AuxCache* cache, const RetryPolicy& retry = {}) {
  AuxKey key{conv.id, Task::kSummGen, scheme, variant, backend.identity()};
  return detail::cached<Summary>(
      cache, key, [&] { return generate_summary(conv, backend, scheme, variant, retry); },
      [&](const CacheEntry& e) { return make_summary(e.raw_text, variant, e.provenance); },
      [&](const Summary& s) {
        CacheEntry e{s.raw_text, nullptr, s.provenance};
        if (!s.parse_degraded) {
          e.parsed = nlohmann::ordered_json::array();
          for (const auto& t : s.topics) e.parsed.push_back({{"title", t.title}, {"explanation", t.explanation}});
        }
        return e;
      });
}

inline UserDescription user_description_for(const Conversation& conv, Backend& backend, Scheme scheme,
                                            OutputVariant variant, AuxCache* cache, const RetryPolicy& retry = {}) {
  AuxKey key{conv.id, Task::kDescGen, scheme, variant, backend.identity()};
  return detail::cached<UserDescription>(
      cache, key, [&] { return generate_user_description(conv, kNextSpeakerTag, backend, scheme, variant, retry); },
      [&](const CacheEntry& e) { return make_user_description(e.raw_text, variant, e.provenance); },
      [&](const UserDescription& d) {
        CacheEntry e{d.raw_text, nullptr, d.provenance};
        if (!d.parse_degraded) {
          e.parsed = nlohmann::ordered_json::array();
          for (const auto& a : d.adjectives) {
            e.parsed.push_back({{"adjective", a.adjective}, {"explanation", a.explanation}});
          }
        }
        return e;
      });
}

}  // namespace mpcprobe
