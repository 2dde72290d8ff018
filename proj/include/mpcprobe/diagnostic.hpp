#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpcprobe/corpus.hpp"
#include "mpcprobe/graph.hpp"
#include "mpcprobe/util.hpp"

namespace mpcprobe {

struct LengthPolicy {
  enum class Mode { kAtMost, kExactly };
  Mode mode = Mode::kAtMost;
  int n = 15;

  bool admits(std::size_t turns) const {
    return mode == Mode::kExactly ? turns == static_cast<std::size_t>(n) : turns <= static_cast<std::size_t>(n);
  }

  std::string describe() const { return (mode == Mode::kExactly ? "exactly-" : "at-most-") + std::to_string(n); }

  static LengthPolicy parse(std::string_view s) {
    LengthPolicy p;
    std::string_view rest;
    if (s.rfind("exactly-", 0) == 0) {
      p.mode = Mode::kExactly;
      rest = s.substr(8);
    } else if (s.rfind("at-most-", 0) == 0) {
      rest = s.substr(8);
    } else {
      throw Error(Errc::kInvalidConfig, "length policy must be at-most-N or exactly-N, got '" + std::string(s) + "'");
    }
    p.n = std::stoi(std::string(rest));
    return p;
  }
};

struct FilterConfig {
  int user_count = 3;
  LengthPolicy length;
  bool require_connected = true;
  bool require_next_speaker_in_context = true;
  MetricScope scope = MetricScope::kContextOnly;

  void check() const {
    if (user_count < 2) throw Error(Errc::kInvalidConfig, "user_count must be >= 2");
    if (length.n < 2) throw Error(Errc::kInvalidConfig, "length bound must be >= 2");
  }
};

enum class Predicate { kUserCount, kLength, kConnectivity, kNextSpeakerInContext, kAnonymization };

inline constexpr std::array<Predicate, 5> kAllPredicates = {Predicate::kUserCount, Predicate::kLength,
                                                            Predicate::kConnectivity,
                                                            Predicate::kNextSpeakerInContext,
                                                            Predicate::kAnonymization};

inline std::string_view to_string(Predicate p) {
  switch (p) {
    case Predicate::kUserCount: return "user_count";
    case Predicate::kLength: return "length";
    case Predicate::kConnectivity: return "connectivity";
    case Predicate::kNextSpeakerInContext: return "next_speaker_in_context";
    case Predicate::kAnonymization: return "anonymization";
  }
  return "?";
}

/// Evaluates one predicate in isolation. Disabled predicates always hold.
inline bool predicate_holds(Predicate p, const Conversation& conv, const FilterConfig& cfg) {
  switch (p) {
    case Predicate::kUserCount:
      return conv.users.size() == static_cast<std::size_t>(cfg.user_count);
    case Predicate::kLength:
      return cfg.length.admits(conv.turns.size());
    case Predicate::kConnectivity: {
      if (!cfg.require_connected) return true;
      auto g = build_graphs(conv, MetricScope::kFull);
      return !g.undirected.nodes().empty() && is_connected(g.undirected);
    }
    case Predicate::kNextSpeakerInContext: {
      if (!cfg.require_next_speaker_in_context) return true;
      if (conv.turns.size() < 2) return false;
      const auto ctx_users = users_of(context_of(conv).turns);
      return ctx_users.count(conv.turns.back().speaker) != 0;
    }
    case Predicate::kAnonymization:
      return conv.users.size() <= kTagPool.size();
  }
  return false;
}

/// First failing predicate in evaluation order, if any.
inline std::optional<Predicate> first_failing_predicate(const Conversation& conv, const FilterConfig& cfg) {
  for (auto p : kAllPredicates) {
    if (!predicate_holds(p, conv, cfg)) return p;
  }
  return std::nullopt;
}

struct DatasetEntry {
  Conversation conversation;  // anonymized; final-turn speaker is [ALEX]
  NodeMetrics next_speaker;
};

struct Provenance {
  std::string source_id;
  std::string toolkit_version{kToolkitVersion};
  std::size_t input_count = 0;
  std::size_t retained_count = 0;
  std::map<std::string, std::size_t> rejections;  // predicate name -> count
};

struct DiagnosticDataset {
  std::string id;
  FilterConfig config;
  std::vector<DatasetEntry> entries;
  Provenance provenance;

  std::vector<Conversation> conversations() const {
    std::vector<Conversation> out;
    for (const auto& e : entries) out.push_back(e.conversation);
    return out;
  }
};

inline NodeMetrics next_speaker_metrics(const Conversation& anonymized, MetricScope scope) {
  const auto graphs = build_graphs(anonymized, scope);
  const UserId& u = anonymized.turns.back().speaker;
  if (!graphs.undirected.contains(u)) return {};
  return node_metrics(graphs, u);
}

/// Keeps conversations that satisfy every enabled predicate, anonymizing each
/// with its final-turn speaker as the next speaker.
inline DiagnosticDataset build_diagnostic_subset(const std::vector<Conversation>& corpus, const FilterConfig& cfg,
                                                 std::string source_id = "corpus", std::string dataset_id = "") {
  cfg.check();
  DiagnosticDataset ds;
  ds.id = dataset_id.empty() ? "U" + std::to_string(cfg.user_count) : std::move(dataset_id);
  ds.config = cfg;
  ds.provenance.source_id = std::move(source_id);
  ds.provenance.input_count = corpus.size();
  for (auto p : kAllPredicates) ds.provenance.rejections[std::string(to_string(p))] = 0;

  for (const auto& conv : corpus) {
    if (auto failing = first_failing_predicate(conv, cfg)) {
      ++ds.provenance.rejections[std::string(to_string(*failing))];
      continue;
    }
    auto [anon, alias] = anonymize(conv, conv.turns.back().speaker);
    NodeMetrics metrics = next_speaker_metrics(anon, cfg.scope);
    ds.entries.push_back({std::move(anon), metrics});
  }
  ds.provenance.retained_count = ds.entries.size();
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence: conversations.jsonl + manifest.json

inline nlohmann::ordered_json to_json(const FilterConfig& cfg) {
  return {{"user_count", cfg.user_count},
          {"length_policy", cfg.length.describe()},
          {"require_connected", cfg.require_connected},
          {"require_next_speaker_in_context", cfg.require_next_speaker_in_context},
          {"metric_scope", std::string(to_string(cfg.scope))}};
}

inline FilterConfig filter_config_from_json(const nlohmann::json& j) {
  FilterConfig cfg;
  cfg.user_count = j.at("user_count").get<int>();
  cfg.length = LengthPolicy::parse(j.at("length_policy").get<std::string>());
  cfg.require_connected = j.at("require_connected").get<bool>();
  cfg.require_next_speaker_in_context = j.at("require_next_speaker_in_context").get<bool>();
  cfg.scope = parse_metric_scope(j.at("metric_scope").get<std::string>());
  return cfg;
}

inline nlohmann::ordered_json to_json(const NodeMetrics& m) {
  nlohmann::ordered_json j = {{"degree", m.degree},
                              {"out_degree", m.out_degree},
                              {"weighted_out_degree", m.weighted_out_degree},
                              {"avg_outgoing_weight", m.avg_outgoing_weight.value()},
                              {"avg_outgoing_weight_rounded", m.avg_outgoing_weight_rounded()}};
  j["closeness"] = m.closeness ? nlohmann::ordered_json(*m.closeness) : nlohmann::ordered_json(nullptr);
  j["clustering"] = m.clustering ? nlohmann::ordered_json(*m.clustering) : nlohmann::ordered_json(nullptr);
  return j;
}

inline nlohmann::ordered_json dataset_manifest(const DiagnosticDataset& ds) {
  nlohmann::ordered_json members = nlohmann::ordered_json::array();
  for (const auto& e : ds.entries) {
    members.push_back({{"id", e.conversation.id}, {"next_speaker_metrics", to_json(e.next_speaker)}});
  }
  nlohmann::ordered_json rejections = nlohmann::ordered_json::object();
  for (auto p : kAllPredicates) rejections[std::string(to_string(p))] = ds.provenance.rejections.at(std::string(to_string(p)));
  return {{"dataset_id", ds.id},
          {"config", to_json(ds.config)},
          {"provenance",
           {{"source_id", ds.provenance.source_id},
            {"toolkit_version", ds.provenance.toolkit_version},
            {"input_count", ds.provenance.input_count},
            {"retained_count", ds.provenance.retained_count},
            {"rejections", rejections}}},
          {"conversations", members}};
}

inline void write_dataset(const DiagnosticDataset& ds, const std::filesystem::path& dir) {
  write_file_atomic(dir / "conversations.jsonl", serialize_jsonl(ds.conversations()));
  write_file_atomic(dir / "manifest.json", dataset_manifest(ds).dump(2) + "\n");
}

/// Reloads a persisted dataset. Metrics are recomputed from the conversations
/// with the recorded scope and must agree with the manifest.
inline DiagnosticDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  DiagnosticDataset ds;
  ds.id = manifest.at("dataset_id").get<std::string>();
  ds.config = filter_config_from_json(manifest.at("config"));
  const auto& prov = manifest.at("provenance");
  ds.provenance.source_id = prov.at("source_id").get<std::string>();
  ds.provenance.toolkit_version = prov.at("toolkit_version").get<std::string>();
  ds.provenance.input_count = prov.at("input_count").get<std::size_t>();
  ds.provenance.retained_count = prov.at("retained_count").get<std::size_t>();
  for (const auto& [k, v] : prov.at("rejections").items()) ds.provenance.rejections[k] = v.get<std::size_t>();

  ParseOptions opts;
  opts.allow_empty_text = true;
  auto parsed = parse_corpus(read_file(dir / "conversations.jsonl"), CorpusFormat::kGenericJsonl, opts);
  if (!parsed.diagnostics.empty()) {
    throw Error(Errc::kIoError, "dataset " + dir.string() + " is malformed: " + parsed.diagnostics.front().message);
  }
  for (auto& conv : parsed.conversations) {
    NodeMetrics m = next_speaker_metrics(conv, ds.config.scope);
    ds.entries.push_back({std::move(conv), m});
  }
  return ds;
}

}  // namespace mpcprobe
