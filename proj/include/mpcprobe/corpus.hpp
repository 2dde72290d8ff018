#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpcprobe/error.hpp"
#include "mpcprobe/util.hpp"

namespace mpcprobe {

/// Participant handle, local to one conversation. Non-empty, no whitespace.
struct UserId {
  std::string value;

  UserId() = default;
  explicit UserId(std::string v) : value(std::move(v)) {}

  auto operator<=>(const UserId&) const = default;
  bool operator==(const UserId&) const = default;
};

inline bool is_valid_user_token(std::string_view s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

struct Turn {
  int index = 0;  // 1-based
  UserId speaker;
  UserId addressee;
  std::string text;

  bool operator==(const Turn&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;
  std::set<UserId> users;

  bool operator==(const Conversation&) const = default;
};

inline std::set<UserId> users_of(const std::vector<Turn>& turns) {
  std::set<UserId> users;
  for (const auto& t : turns) {
    users.insert(t.speaker);
    users.insert(t.addressee);
  }
  return users;
}

/// Users in order of first appearance (speaker before addressee within a turn).
inline std::vector<UserId> users_by_first_appearance(const std::vector<Turn>& turns) {
  std::vector<UserId> order;
  std::set<UserId> seen;
  for (const auto& t : turns) {
    for (const UserId* u : {&t.speaker, &t.addressee}) {
      if (seen.insert(*u).second) order.push_back(*u);
    }
  }
  return order;
}

/// Builds a conversation from (speaker, addressee, text) triples, numbering turns from 1.
inline Conversation make_conversation(std::string id,
                                      const std::vector<std::array<std::string, 3>>& rows) {
  Conversation c;
  c.id = std::move(id);
  int index = 1;
  for (const auto& r : rows) {
    c.turns.push_back(Turn{index++, UserId(r[0]), UserId(r[1]), r[2]});
  }
  c.users = users_of(c.turns);
  return c;
}

/// The conversation without its final turn.
inline Conversation context_of(const Conversation& conv) {
  Conversation ctx;
  ctx.id = conv.id;
  if (!conv.turns.empty()) ctx.turns.assign(conv.turns.begin(), conv.turns.end() - 1);
  ctx.users = users_of(ctx.turns);
  return ctx;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate(const Conversation& conv, bool allow_empty_text = false) {
  ValidationReport report;
  auto add = [&](std::string v) { report.violations.push_back(std::move(v)); };

  if (conv.turns.size() < 2) {
    add("conversation has " + std::to_string(conv.turns.size()) + " turn(s); at least 2 required");
  }
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    const Turn& t = conv.turns[i];
    const std::string where = "turn at position " + std::to_string(i + 1);
    if (i > 0 && t.index <= conv.turns[i - 1].index) {
      add("ordering violation: " + where + " has index " + std::to_string(t.index) +
          " not greater than previous index " + std::to_string(conv.turns[i - 1].index));
    }
    if (t.index < 1) add(where + " has non-positive index " + std::to_string(t.index));
    if (!is_valid_user_token(t.speaker.value)) add(where + ": invalid speaker id '" + t.speaker.value + "'");
    if (!is_valid_user_token(t.addressee.value)) {
      add(where + ": invalid addressee id '" + t.addressee.value + "'");
    }
    if (t.text.empty() && !allow_empty_text) add(where + ": empty text");
  }

  const auto derived = users_of(conv.turns);
  for (const auto& u : derived) {
    if (!conv.users.count(u)) add("derived-set mismatch: user '" + u.value + "' missing from users");
  }
  for (const auto& u : conv.users) {
    if (!derived.count(u)) add("derived-set mismatch: user '" + u.value + "' does not occur in any turn");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Parsing

enum class CorpusFormat { kUbuntuIrcAdjacency, kGenericJsonl };

inline std::string_view to_string(CorpusFormat f) {
  return f == CorpusFormat::kGenericJsonl ? "generic-jsonl" : "ubuntu-irc-adjacency";
}

inline CorpusFormat parse_corpus_format(std::string_view s) {
  if (s == "generic-jsonl" || s == "jsonl") return CorpusFormat::kGenericJsonl;
  if (s == "ubuntu-irc-adjacency" || s == "ubuntu") return CorpusFormat::kUbuntuIrcAdjacency;
  throw Error(Errc::kInvalidConfig, "unknown corpus format '" + std::string(s) + "'");
}

struct ParseOptions {
  bool allow_empty_text = false;
  std::string id_prefix = "conv";  // ids for formats that carry none
};

struct ParseDiagnostic {
  std::size_t line = 0;  // 1-based line where the offending record starts
  std::string message;
};

struct ParseResult {
  std::vector<Conversation> conversations;
  std::vector<ParseDiagnostic> diagnostics;
};

/// Strict UTF-8 check (rejects overlongs, surrogates, > U+10FFFF).
inline bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += len;
  }
  return true;
}

namespace detail {

inline std::string record_label(std::size_t line, const std::string& id) {
  std::string s = "record at line " + std::to_string(line);
  if (!id.empty()) s += " (id " + id + ")";
  return s;
}

inline void parse_jsonl(std::string_view bytes, const ParseOptions& opts, ParseResult& out) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto nl = bytes.find('\n', pos);
    std::string_view line = bytes.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? bytes.size() : nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      out.diagnostics.push_back({line_no, record_label(line_no, "") + ": invalid JSON: " + e.what()});
      continue;
    }
    std::string id;
    if (rec.is_object() && rec.contains("id") && rec["id"].is_string()) id = rec["id"].get<std::string>();
    const auto label = record_label(line_no, id);
    if (!rec.is_object() || id.empty()) {
      out.diagnostics.push_back({line_no, label + ": missing string field 'id'"});
      continue;
    }
    if (!rec.contains("turns") || !rec["turns"].is_array()) {
      out.diagnostics.push_back({line_no, label + ": missing array field 'turns'"});
      continue;
    }

    Conversation conv;
    conv.id = id;
    std::string problem;
    int index = 0;
    for (const auto& t : rec["turns"]) {
      ++index;
      const std::string where = "turn " + std::to_string(index);
      if (!t.is_object()) {
        problem = where + " is not an object";
        break;
      }
      for (const char* field : {"speaker", "addressee", "text"}) {
        if (!t.contains(field) || !t[field].is_string()) {
          problem = where + " missing field '" + field + "'";
          break;
        }
      }
      if (!problem.empty()) break;
      Turn turn{index, UserId(t["speaker"].get<std::string>()), UserId(t["addressee"].get<std::string>()),
                t["text"].get<std::string>()};
      if (!is_valid_user_token(turn.speaker.value)) {
        problem = where + " has invalid speaker '" + turn.speaker.value + "'";
        break;
      }
      if (!is_valid_user_token(turn.addressee.value)) {
        problem = where + " has invalid addressee '" + turn.addressee.value + "'";
        break;
      }
      conv.turns.push_back(std::move(turn));
    }
    if (!problem.empty()) {
      out.diagnostics.push_back({line_no, label + ": " + problem});
      continue;
    }
    conv.users = users_of(conv.turns);
    auto report = validate(conv, opts.allow_empty_text);
    if (!report.ok()) {
      out.diagnostics.push_back({line_no, label + ": " + join(report.violations, "; ")});
      continue;
    }
    out.conversations.push_back(std::move(conv));
  }
}

// Tab-separated rows, either `speaker<TAB>addressee<TAB>text` or with a leading
// timestamp column. Conversations are separated by blank lines. An addressee of
// "-" or "" means the row has no explicit addressee and the block is rejected.
inline void parse_ubuntu(std::string_view bytes, const ParseOptions& opts, ParseResult& out) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::size_t block_start = 0;
  std::size_t ordinal = 0;
  std::vector<std::pair<std::size_t, std::string>> block;

  auto flush = [&]() {
    if (block.empty()) return;
    ++ordinal;
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%06zu", opts.id_prefix.c_str(), ordinal);
    const std::string id = idbuf;
    const auto label = record_label(block_start, id);
    Conversation conv;
    conv.id = id;
    std::string problem;
    int index = 0;
    for (const auto& [ln, row] : block) {
      ++index;
      auto cols = split(row, '\t');
      const std::string where = "turn " + std::to_string(index) + " (line " + std::to_string(ln) + ")";
      if (cols.size() == 4) cols.erase(cols.begin());
      if (cols.size() != 3) {
        problem = where + " has " + std::to_string(cols.size()) + " columns; expected 3 or 4";
        break;
      }
      std::string speaker(trim(cols[0]));
      std::string addressee(trim(cols[1]));
      if (speaker.empty() || speaker == "-") {
        problem = where + " missing speaker";
        break;
      }
      if (addressee.empty() || addressee == "-") {
        problem = where + " missing addressee";
        break;
      }
      if (!is_valid_user_token(speaker) || !is_valid_user_token(addressee)) {
        problem = where + " has an invalid user id";
        break;
      }
      std::string text = cols[2];
      if (!text.empty() && text.back() == '\r') text.pop_back();
      conv.turns.push_back(Turn{index, UserId(std::move(speaker)), UserId(std::move(addressee)), std::move(text)});
    }
    block.clear();
    if (!problem.empty()) {
      out.diagnostics.push_back({block_start, label + ": " + problem});
      return;
    }
    conv.users = users_of(conv.turns);
    auto report = validate(conv, opts.allow_empty_text);
    if (!report.ok()) {
      out.diagnostics.push_back({block_start, label + ": " + join(report.violations, "; ")});
      return;
    }
    out.conversations.push_back(std::move(conv));
  };

  while (pos < bytes.size()) {
    auto nl = bytes.find('\n', pos);
    std::string_view line = bytes.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? bytes.size() : nl + 1;
    ++line_no;
    if (trim(line).empty()) {
      flush();
      continue;
    }
    if (block.empty()) block_start = line_no;
    block.emplace_back(line_no, std::string(line));
  }
  flush();
}

}  // namespace detail

/// Malformed records are reported in diagnostics and skipped. Throws
/// Error(kDecodeError) when the stream is not UTF-8.
inline ParseResult parse_corpus(std::string_view bytes, CorpusFormat format, const ParseOptions& opts = {}) {
  if (!is_valid_utf8(bytes)) throw Error(Errc::kDecodeError, "corpus stream is not valid UTF-8");
  ParseResult out;
  if (format == CorpusFormat::kGenericJsonl) {
    detail::parse_jsonl(bytes, opts, out);
  } else {
    detail::parse_ubuntu(bytes, opts, out);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const Conversation& conv) {
  nlohmann::ordered_json turns = nlohmann::ordered_json::array();
  for (const auto& t : conv.turns) {
    turns.push_back({{"speaker", t.speaker.value}, {"addressee", t.addressee.value}, {"text", t.text}});
  }
  return {{"id", conv.id}, {"turns", std::move(turns)}};
}

/// One conversation per line, fixed field order.
inline std::string serialize_jsonl(const std::vector<Conversation>& convs) {
  std::string out;
  for (const auto& c : convs) {
    out += to_json(c).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Anonymization

inline const std::array<std::string_view, 6> kTagPool = {"[ALEX]", "[BENNY]", "[CAM]",
                                                         "[DANA]", "[ELI]",   "[FREDDIE]"};
inline constexpr std::string_view kNextSpeakerTag = "[ALEX]";

struct AliasMap {
  std::map<UserId, UserId> assignments;  // original -> tag
  UserId next_speaker;                   // original id

  const UserId& tag_of(const UserId& original) const { return assignments.at(original); }
};

namespace detail {

inline bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_'; }

// Replaces whole-token occurrences of the original names, longest name first.
inline std::string rewrite_mentions(std::string_view text,
                                    const std::vector<std::pair<std::string, std::string>>& by_length) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool replaced = false;
    for (const auto& [name, tag] : by_length) {
      if (name.empty() || text.compare(i, name.size(), name) != 0) continue;
      const bool front_ok = !is_word_byte(static_cast<unsigned char>(name.front())) || i == 0 ||
                            !is_word_byte(static_cast<unsigned char>(text[i - 1]));
      const std::size_t end = i + name.size();
      const bool back_ok = !is_word_byte(static_cast<unsigned char>(name.back())) || end == text.size() ||
                           !is_word_byte(static_cast<unsigned char>(text[end]));
      if (front_ok && back_ok) {
        out += tag;
        i = end;
        replaced = true;
        break;
      }
    }
    if (!replaced) out += text[i++];
  }
  return out;
}

}  // namespace detail

/// Rewrites every user id (and textual mentions of them) to a pool tag. The
/// next speaker always becomes [ALEX]; the rest take the remaining tags in
/// order of first appearance.
inline std::pair<Conversation, AliasMap> anonymize(const Conversation& conv, const UserId& next_speaker) {
  const auto order = users_by_first_appearance(conv.turns);
  if (std::find(order.begin(), order.end(), next_speaker) == order.end()) {
    throw Error(Errc::kInvalidNextSpeaker, "next speaker '" + next_speaker.value + "' not in conversation " + conv.id);
  }
  if (order.size() > kTagPool.size()) {
    throw Error(Errc::kAnonymizationOverflow, "conversation " + conv.id + " has " + std::to_string(order.size()) +
                                                  " users; the tag pool holds " +
                                                  std::to_string(kTagPool.size()));
  }

  AliasMap alias;
  alias.next_speaker = next_speaker;
  alias.assignments.emplace(next_speaker, UserId(std::string(kNextSpeakerTag)));
  std::size_t next_tag = 1;
  for (const auto& u : order) {
    if (u == next_speaker) continue;
    alias.assignments.emplace(u, UserId(std::string(kTagPool[next_tag++])));
  }

  std::vector<std::pair<std::string, std::string>> by_length;
  for (const auto& [orig, tag] : alias.assignments) by_length.emplace_back(orig.value, tag.value);
  std::stable_sort(by_length.begin(), by_length.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  Conversation out;
  out.id = conv.id;
  for (const auto& t : conv.turns) {
    out.turns.push_back(Turn{t.index, alias.tag_of(t.speaker), alias.tag_of(t.addressee),
                             detail::rewrite_mentions(t.text, by_length)});
  }
  out.users = users_of(out.turns);
  return {std::move(out), std::move(alias)};
}

}  // namespace mpcprobe
