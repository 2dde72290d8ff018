#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpcprobe/corpus.hpp"
#include "mpcprobe/error.hpp"
#include "mpcprobe/template_assets.hpp"

namespace mpcprobe {

enum class Task { kRS, kAR, kSummGen, kDescGen };
enum class Combination { kConv, kConvStruct, kStructSumm, kStructDesc, kStructSummDesc, kStruct };
enum class Scheme { kVerbose, kMedium, kConcise };
enum class OutputVariant { kV1, kV2 };
enum class RepresentationKind { kConversationTranscript, kInteractionTranscript, kSummary, kUserDescription };
enum class Framing { kGeneration, kClassification };

inline constexpr std::array<Combination, 6> kAllCombinations = {
    Combination::kConv,       Combination::kConvStruct,     Combination::kStructSumm,
    Combination::kStructDesc, Combination::kStructSummDesc, Combination::kStruct};
inline constexpr std::array<Scheme, 3> kAllSchemes = {Scheme::kVerbose, Scheme::kMedium, Scheme::kConcise};

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::kRS: return "RS";
    case Task::kAR: return "AR";
    case Task::kSummGen: return "SUMM-GEN";
    case Task::kDescGen: return "DESC-GEN";
  }
  return "?";
}

inline std::string_view to_string(Combination c) {
  switch (c) {
    case Combination::kConv: return "CONV";
    case Combination::kConvStruct: return "CONV+STRUCT";
    case Combination::kStructSumm: return "STRUCT+SUMM";
    case Combination::kStructDesc: return "STRUCT+DESC";
    case Combination::kStructSummDesc: return "STRUCT+SUMM+DESC";
    case Combination::kStruct: return "STRUCT";
  }
  return "?";
}

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kVerbose: return "verbose";
    case Scheme::kMedium: return "medium";
    case Scheme::kConcise: return "concise";
  }
  return "?";
}

inline std::string_view to_string(OutputVariant v) { return v == OutputVariant::kV1 ? "V1" : "V2"; }

inline Task parse_task(std::string_view s) {
  for (auto t : {Task::kRS, Task::kAR, Task::kSummGen, Task::kDescGen}) {
    if (s == to_string(t)) return t;
  }
  throw Error(Errc::kInvalidConfig, "unknown task '" + std::string(s) + "'");
}

inline Combination parse_combination(std::string_view s) {
  for (auto c : kAllCombinations) {
    if (s == to_string(c)) return c;
  }
  throw Error(Errc::kInvalidConfig, "unknown input combination '" + std::string(s) + "'");
}

inline Scheme parse_scheme(std::string_view s) {
  for (auto sc : kAllSchemes) {
    if (s == to_string(sc)) return sc;
  }
  throw Error(Errc::kInvalidConfig, "unknown prompt scheme '" + std::string(s) + "'");
}

inline OutputVariant parse_output_variant(std::string_view s) {
  if (s == "V1" || s == "v1") return OutputVariant::kV1;
  if (s == "V2" || s == "v2") return OutputVariant::kV2;
  throw Error(Errc::kInvalidConfig, "unknown output template variant '" + std::string(s) + "'");
}

/// Representations a combination injects, in prompt order.
inline std::vector<RepresentationKind> representations_of(Combination c) {
  using R = RepresentationKind;
  switch (c) {
    case Combination::kConv: return {R::kConversationTranscript};
    case Combination::kConvStruct: return {R::kConversationTranscript, R::kInteractionTranscript};
    case Combination::kStructSumm: return {R::kInteractionTranscript, R::kSummary};
    case Combination::kStructDesc: return {R::kInteractionTranscript, R::kUserDescription};
    case Combination::kStructSummDesc: return {R::kInteractionTranscript, R::kSummary, R::kUserDescription};
    case Combination::kStruct: return {R::kInteractionTranscript};
  }
  return {};
}

/// STRUCT carries no linguistic content, so it is meaningless for RS. The
/// generation tasks always read both transcripts.
inline bool is_legal(Task task, Combination combo) {
  switch (task) {
    case Task::kRS: return combo != Combination::kStruct;
    case Task::kAR: return true;
    case Task::kSummGen:
    case Task::kDescGen: return combo == Combination::kConvStruct;
  }
  return false;
}

inline std::vector<Combination> legal_combinations(Task task) {
  std::vector<Combination> out;
  for (auto c : kAllCombinations) {
    if (is_legal(task, c)) out.push_back(c);
  }
  return out;
}

inline void require_legal(Task task, Combination combo) {
  if (!is_legal(task, combo)) {
    throw Error(Errc::kIllegalCombination,
                std::string(to_string(combo)) + " is not a valid input combination for " + std::string(to_string(task)));
  }
}

inline bool is_classification(Task t) { return t == Task::kRS || t == Task::kAR; }

// ---------------------------------------------------------------------------
// Template assets

inline std::string_view template_asset(Scheme scheme, std::string_view name) {
  static const std::map<std::string, std::string_view, std::less<>> index = [] {
    std::map<std::string, std::string_view, std::less<>> m;
    for (const auto& a : assets::kTemplates) m.emplace(std::string(a.key), a.text);
    return m;
  }();
  const std::string key = std::string(to_string(scheme)) + "/" + std::string(name);
  auto it = index.find(key);
  if (it == index.end()) throw Error(Errc::kInvalidConfig, "missing template asset '" + key + "'");
  return it->second;
}

namespace detail {

inline std::string_view task_key(Task t) {
  switch (t) {
    case Task::kRS: return "rs";
    case Task::kAR: return "ar";
    case Task::kSummGen: return "summ-gen";
    case Task::kDescGen: return "desc-gen";
  }
  return "?";
}

inline std::string_view rep_key(RepresentationKind k) {
  switch (k) {
    case RepresentationKind::kConversationTranscript: return "conv";
    case RepresentationKind::kInteractionTranscript: return "struct";
    case RepresentationKind::kSummary: return "summ";
    case RepresentationKind::kUserDescription: return "desc";
  }
  return "?";
}

inline std::string asset(Scheme s, std::string_view prefix, std::string_view key) {
  return std::string(template_asset(s, std::string(prefix) + "." + std::string(key)));
}

}  // namespace detail

inline std::string_view representation_label(RepresentationKind k) {
  switch (k) {
    case RepresentationKind::kConversationTranscript: return "CONVERSATION TRANSCRIPT:";
    case RepresentationKind::kInteractionTranscript: return "INTERACTION TRANSCRIPT:";
    case RepresentationKind::kSummary: return "SUMMARY:";
    case RepresentationKind::kUserDescription: return "USER DESCRIPTION:";
  }
  return "?";
}

/// The command that closes every input prompt for a task.
inline std::string instruction_command(Task task, Scheme scheme) {
  return detail::asset(scheme, "command", detail::task_key(task));
}

// ---------------------------------------------------------------------------
// System prompt

struct SystemPromptSections {
  std::string scenario;
  std::string input_elements;
  std::string task_definition;
  std::string user_space;
  std::string input_format;
  std::string instruction_template;
  std::string output_template;

  std::string render() const {
    return scenario + "\n\n" + input_elements + "\n\n" + task_definition + "\n\n" + user_space + "\n\n" +
           input_format + "\n\n" + instruction_template + "\n\n" + output_template;
  }
};

inline SystemPromptSections system_prompt_sections(Task task, Combination combo, Scheme scheme,
                                                   OutputVariant variant = OutputVariant::kV1) {
  require_legal(task, combo);
  SystemPromptSections s;
  s.scenario = template_asset(scheme, "scenario");
  s.user_space = template_asset(scheme, "user_space");
  s.input_elements = template_asset(scheme, "elements.header");
  s.input_format = template_asset(scheme, "format.header");
  for (auto rep : representations_of(combo)) {
    s.input_elements += "\n" + detail::asset(scheme, "elements", detail::rep_key(rep));
    s.input_format += "\n" + detail::asset(scheme, "format", detail::rep_key(rep));
  }
  s.task_definition = detail::asset(scheme, "task", detail::task_key(task));
  s.instruction_template =
      std::string(template_asset(scheme, "instruction.header")) + "\n\"" + instruction_command(task, scheme) + "\"";
  std::string output_key(detail::task_key(task));
  if (!is_classification(task)) output_key += variant == OutputVariant::kV1 ? ".v1" : ".v2";
  s.output_template = detail::asset(scheme, "output", output_key);
  return s;
}

inline std::string build_system_prompt(Task task, Combination combo, Scheme scheme,
                                       OutputVariant variant = OutputVariant::kV1) {
  return system_prompt_sections(task, combo, scheme, variant).render();
}

// ---------------------------------------------------------------------------
// Representations

struct Representation {
  RepresentationKind kind;
  std::string text;
};

inline Representation render_conversation_transcript(const Conversation& conv) {
  std::string out;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    if (i) out += '\n';
    out += conv.turns[i].speaker.value + ": " + conv.turns[i].text;
  }
  return {RepresentationKind::kConversationTranscript, std::move(out)};
}

inline Representation render_interaction_transcript(const Conversation& conv) {
  std::string out;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    if (i) out += '\n';
    out += conv.turns[i].speaker.value + " -> " + conv.turns[i].addressee.value;
  }
  return {RepresentationKind::kInteractionTranscript, std::move(out)};
}

// ---------------------------------------------------------------------------
// Assembly

inline constexpr std::string_view kDefaultArBeginOfOutput = "The addressee of the next message is";
inline constexpr std::string_view kDefaultRsBeginOfOutput = "The next message is:";

struct BeginOfOutput {
  std::string ar{kDefaultArBeginOfOutput};
  std::string rs{kDefaultRsBeginOfOutput};

  const std::string& for_task(Task t) const { return t == Task::kAR ? ar : rs; }
};

struct AssembledPrompt {
  std::string system;
  std::string input;
  std::string begin_of_output;  // classification only
  Framing framing = Framing::kClassification;

  /// Generation: `[INST] <<SYS>> s <</SYS>> i [/INST]`.
  /// Classification: `[INST]<<SYS>> s <</SYS>> i [/INST] b`.
  std::string text() const {
    if (framing == Framing::kGeneration) return "[INST] <<SYS>> " + system + " <</SYS>> " + input + " [/INST]";
    return "[INST]<<SYS>> " + system + " <</SYS>> " + input + " [/INST] " + begin_of_output;
  }

  /// Context handed to the scorer; the candidate follows after one space.
  std::string scoring_context() const { return text() + " "; }

  std::string with_candidate(std::string_view candidate) const { return scoring_context() + std::string(candidate); }
};

struct AssemblyOptions {
  OutputVariant variant = OutputVariant::kV1;
  BeginOfOutput begin_of_output;
  std::vector<std::string> ar_candidates;  // listed in the AR input prompt when non-empty
};

/// Builds system + input prompt. `reps` must hold every representation the
/// combination needs; extra ones are ignored.
inline AssembledPrompt assemble(Task task, Combination combo, Scheme scheme, const std::vector<Representation>& reps,
                                std::string_view next_speaker_tag, const AssemblyOptions& opts = {}) {
  require_legal(task, combo);
  if (next_speaker_tag != kNextSpeakerTag) {
    throw Error(Errc::kInvalidNextSpeaker, "prompts are assembled for " + std::string(kNextSpeakerTag) + ", got " +
                                               std::string(next_speaker_tag));
  }
  AssembledPrompt p;
  p.system = build_system_prompt(task, combo, scheme, opts.variant);
  p.framing = is_classification(task) ? Framing::kClassification : Framing::kGeneration;

  std::vector<std::string> blocks;
  for (auto kind : representations_of(combo)) {
    auto it = std::find_if(reps.begin(), reps.end(), [&](const Representation& r) { return r.kind == kind; });
    if (it == reps.end()) {
      throw Error(Errc::kMissingRepresentation,
                  std::string(representation_label(kind)) + " required by " + std::string(to_string(combo)));
    }
    blocks.push_back(std::string(representation_label(kind)) + "\n" + it->text);
  }

  std::string tail;
  if (task == Task::kAR && !opts.ar_candidates.empty()) {
    tail += std::string(template_asset(scheme, "announce.candidates")) + " " + join(opts.ar_candidates, ", ") + "\n";
  }
  if (is_classification(task)) {
    tail += std::string(template_asset(scheme, "announce.next")) + "\n";
  } else if (task == Task::kDescGen) {
    tail += std::string(template_asset(scheme, "announce.subject")) + "\n";
  }
  tail += instruction_command(task, scheme);
  blocks.push_back(std::move(tail));

  p.input = join(blocks, "\n\n");
  if (is_classification(task)) p.begin_of_output = opts.begin_of_output.for_task(task);
  return p;
}

}  // namespace mpcprobe
