#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpcprobe/aux_generation.hpp"
#include "mpcprobe/backend.hpp"
#include "mpcprobe/diagnostic.hpp"
#include "mpcprobe/prompt.hpp"
#include "mpcprobe/scoring.hpp"
#include "mpcprobe/task.hpp"

namespace mpcprobe {

struct BackendDescriptor {
  enum class Kind { kMock, kHttp };
  Kind kind = Kind::kMock;
  std::string endpoint;  // http only
  std::uint64_t seed = 0;  // mock only

  std::string kind_name() const { return kind == Kind::kMock ? "mock" : "http"; }
};

struct RunConfig {
  std::string dataset_id;
  Task task = Task::kAR;
  std::vector<Combination> combinations;
  std::vector<Scheme> schemes{kAllSchemes.begin(), kAllSchemes.end()};
  BackendDescriptor backend;
  std::uint64_t seed = 0;
  MetricScope scope = MetricScope::kContextOnly;
  OutputVariant variant = OutputVariant::kV1;
  BeginOfOutput begin_of_output;
  std::string dummy_tag{kDefaultDummyTag};
  double abort_threshold = 0.01;
  int workers = 1;
  RetryPolicy retry;

  void check() const {
    if (!is_classification(task)) throw Error(Errc::kInvalidConfig, "run needs task RS or AR");
    if (combinations.empty()) throw Error(Errc::kInvalidConfig, "no input combinations selected");
    if (schemes.empty()) throw Error(Errc::kInvalidConfig, "no prompt schemes selected");
    for (auto c : combinations) require_legal(task, c);
    if (abort_threshold < 0 || abort_threshold > 1) throw Error(Errc::kInvalidConfig, "abort threshold outside [0,1]");
    if (workers < 1) throw Error(Errc::kInvalidConfig, "workers must be >= 1");
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& cfg) {
  std::vector<std::string> combos, schemes;
  for (auto c : cfg.combinations) combos.emplace_back(to_string(c));
  for (auto s : cfg.schemes) schemes.emplace_back(to_string(s));
  nlohmann::ordered_json backend = {{"kind", cfg.backend.kind_name()}};
  if (cfg.backend.kind == BackendDescriptor::Kind::kHttp) {
    backend["endpoint"] = cfg.backend.endpoint;
  } else {
    backend["seed"] = cfg.backend.seed;
  }
  return {{"dataset_id", cfg.dataset_id},
          {"task", std::string(to_string(cfg.task))},
          {"combinations", combos},
          {"schemes", schemes},
          {"backend", backend},
          {"seed", cfg.seed},
          {"metric_scope", std::string(to_string(cfg.scope))},
          {"output_template_variant", std::string(to_string(cfg.variant))},
          {"begin_of_output", {{"AR", cfg.begin_of_output.ar}, {"RS", cfg.begin_of_output.rs}}},
          {"dummy_tag", cfg.dummy_tag},
          {"abort_threshold", cfg.abort_threshold}};
}

struct EvalRecord {
  std::string dataset;
  std::string instance_id;
  Task task = Task::kAR;
  Combination combination = Combination::kConv;
  Scheme scheme = Scheme::kVerbose;
  std::string gold;
  std::string predicted;
  bool correct = false;
  std::int64_t deg_u = 0;
  Ratio w_avg_o_u;
  std::int64_t w_avg_o_rounded = 0;
  std::vector<CandidateScore> scores;

  std::string key() const {
    return dataset + "|" + std::string(to_string(task)) + "|" + std::string(to_string(combination)) + "|" +
           std::string(to_string(scheme)) + "|" + instance_id;
  }
};

inline nlohmann::ordered_json to_json(const EvalRecord& r) {
  nlohmann::ordered_json scores = nlohmann::ordered_json::array();
  for (const auto& s : r.scores) {
    scores.push_back({{"candidate", s.candidate_id}, {"cppl", s.cppl}, {"prob", s.normalized_prob}, {"tokens", s.token_count}});
  }
  return {{"key", r.key()},
          {"dataset", r.dataset},
          {"instance_id", r.instance_id},
          {"task", std::string(to_string(r.task))},
          {"combination", std::string(to_string(r.combination))},
          {"scheme", std::string(to_string(r.scheme))},
          {"gold", r.gold},
          {"predicted", r.predicted},
          {"correct", r.correct},
          {"deg_u", r.deg_u},
          {"w_avg_o_u", {r.w_avg_o_u.num, r.w_avg_o_u.den}},
          {"w_avg_o_rounded", r.w_avg_o_rounded},
          {"scores", scores}};
}

inline EvalRecord eval_record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  r.dataset = j.at("dataset").get<std::string>();
  r.instance_id = j.at("instance_id").get<std::string>();
  r.task = parse_task(j.at("task").get<std::string>());
  r.combination = parse_combination(j.at("combination").get<std::string>());
  r.scheme = parse_scheme(j.at("scheme").get<std::string>());
  r.gold = j.at("gold").get<std::string>();
  r.predicted = j.at("predicted").get<std::string>();
  r.correct = j.at("correct").get<bool>();
  r.deg_u = j.at("deg_u").get<std::int64_t>();
  r.w_avg_o_u = {j.at("w_avg_o_u").at(0).get<std::int64_t>(), j.at("w_avg_o_u").at(1).get<std::int64_t>()};
  r.w_avg_o_rounded = j.at("w_avg_o_rounded").get<std::int64_t>();
  for (const auto& s : j.at("scores")) {
    r.scores.push_back({s.at("candidate").get<std::size_t>(), s.at("cppl").get<double>(), s.at("prob").get<double>(),
                        s.at("tokens").get<std::size_t>()});
  }
  return r;
}

/// Canonical order: task, combination, scheme (declaration order), instance id.
inline bool record_less(const EvalRecord& a, const EvalRecord& b) {
  return std::tie(a.dataset, a.task, a.combination, a.scheme, a.instance_id) <
         std::tie(b.dataset, b.task, b.combination, b.scheme, b.instance_id);
}

struct QuarantinedInstance {
  std::string key;
  std::string reason;
};

// ---------------------------------------------------------------------------
// Prompt construction shared by `run` and `inspect`

struct PreparedInstance {
  const DatasetEntry* entry = nullptr;
  std::optional<RsInstance> rs;
  std::optional<ArInstance> ar;

  const Conversation& context() const { return rs ? rs->context : ar->context; }

  std::vector<std::string> candidates() const {
    if (rs) return {rs->candidates.begin(), rs->candidates.end()};
    return ar->candidates;
  }

  std::string gold() const { return rs ? std::to_string(rs->gold_index) : ar->gold; }

  std::string label_of(std::size_t candidate) const {
    return rs ? std::to_string(candidate) : ar->candidates.at(candidate);
  }
};

inline std::vector<PreparedInstance> prepare_instances(const RunConfig& cfg, const DiagnosticDataset& ds) {
  std::vector<PreparedInstance> out;
  std::vector<Conversation> pool;
  if (cfg.task == Task::kRS) pool = ds.conversations();
  for (const auto& e : ds.entries) {
    PreparedInstance p;
    p.entry = &e;
    if (cfg.task == Task::kRS) {
      p.rs = build_rs_instance(e.conversation, pool, cfg.seed);
    } else {
      p.ar = build_ar_instance(e.conversation, cfg.dummy_tag);
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// The exact classification prompt that is scored for an instance.
inline AssembledPrompt classification_prompt(const RunConfig& cfg, const PreparedInstance& inst, Combination combo,
                                             Scheme scheme, Backend& backend, AuxCache* cache) {
  const Conversation& ctx = inst.context();
  std::vector<Representation> reps;
  for (auto kind : representations_of(combo)) {
    switch (kind) {
      case RepresentationKind::kConversationTranscript: reps.push_back(render_conversation_transcript(ctx)); break;
      case RepresentationKind::kInteractionTranscript: reps.push_back(render_interaction_transcript(ctx)); break;
      case RepresentationKind::kSummary:
        reps.push_back({kind, summary_for(ctx, backend, scheme, cfg.variant, cache, cfg.retry).raw_text});
        break;
      case RepresentationKind::kUserDescription:
        reps.push_back({kind, user_description_for(ctx, backend, scheme, cfg.variant, cache, cfg.retry).raw_text});
        break;
    }
  }
  AssemblyOptions opts;
  opts.variant = cfg.variant;
  opts.begin_of_output = cfg.begin_of_output;
  if (inst.ar) opts.ar_candidates = inst.ar->candidates;
  return assemble(cfg.task, combo, scheme, reps, kNextSpeakerTag, opts);
}

inline EvalRecord score_instance(const RunConfig& cfg, const std::string& dataset_id, const PreparedInstance& inst,
                                 Combination combo, Scheme scheme, Backend& backend, AuxCache* cache) {
  const auto prompt = classification_prompt(cfg, inst, combo, scheme, backend, cache);
  ScoringOptions sopts;
  sopts.retry = cfg.retry;
  auto scores = score_candidates(prompt.scoring_context(), inst.candidates(), backend, sopts);

  EvalRecord r;
  r.dataset = dataset_id;
  r.instance_id = inst.entry->conversation.id;
  r.task = cfg.task;
  r.combination = combo;
  r.scheme = scheme;
  r.gold = inst.gold();
  r.predicted = inst.label_of(select(scores));
  r.correct = r.predicted == r.gold;
  r.deg_u = inst.entry->next_speaker.degree;
  r.w_avg_o_u = inst.entry->next_speaker.avg_outgoing_weight;
  r.w_avg_o_rounded = inst.entry->next_speaker.avg_outgoing_weight_rounded();
  r.scores = std::move(scores);
  return r;
}

// ---------------------------------------------------------------------------
// Orchestration

struct RunResult {
  std::vector<EvalRecord> records;  // canonical order
  std::vector<QuarantinedInstance> quarantined;
  nlohmann::ordered_json manifest;
};

inline std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::vector<EvalRecord> out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(eval_record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception&) {
      // A line torn by a kill mid-write; the instance is simply re-scored.
    }
  }
  return out;
}

inline std::string records_jsonl(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

/// Scores every instance under every (combination, scheme) of the config.
/// With `out_dir`, records are appended to records.jsonl as they complete and
/// already-present keys are skipped, so an interrupted run can be resumed.
inline RunResult run_evaluation(const RunConfig& cfg, const DiagnosticDataset& ds, Backend& backend, AuxCache* cache,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  cfg.check();
  const std::string dataset_id = cfg.dataset_id.empty() ? ds.id : cfg.dataset_id;
  const auto instances = prepare_instances(cfg, ds);

  std::map<std::string, EvalRecord> done;
  std::filesystem::path records_path;
  std::ofstream append;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    records_path = *out_dir / "records.jsonl";
    for (auto& r : load_records(records_path)) done.emplace(r.key(), std::move(r));
    append.open(records_path, std::ios::app | std::ios::binary);
    if (!append) throw Error(Errc::kIoError, "cannot append to " + records_path.string());
  }

  struct WorkItem {
    std::size_t instance;
    Combination combo;
    Scheme scheme;
  };
  std::vector<WorkItem> work;
  for (auto combo : cfg.combinations) {
    for (auto scheme : cfg.schemes) {
      for (std::size_t i = 0; i < instances.size(); ++i) {
        EvalRecord probe;
        probe.dataset = dataset_id;
        probe.instance_id = instances[i].entry->conversation.id;
        probe.task = cfg.task;
        probe.combination = combo;
        probe.scheme = scheme;
        if (!done.count(probe.key())) work.push_back({i, combo, scheme});
      }
    }
  }

  std::mutex mu;
  std::vector<QuarantinedInstance> quarantined;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < work.size(); k = next++) {
      const auto& w = work[k];
      try {
        EvalRecord r = score_instance(cfg, dataset_id, instances[w.instance], w.combo, w.scheme, backend, cache);
        std::lock_guard lock(mu);
        if (append.is_open()) {
          append << to_json(r).dump() << '\n';
          append.flush();
        }
        done.emplace(r.key(), std::move(r));
      } catch (const Error& e) {
        if (e.code() != Errc::kInstanceAborted && e.code() != Errc::kBackendError &&
            e.code() != Errc::kEmptyGeneration) {
          throw;
        }
        EvalRecord probe;
        probe.dataset = dataset_id;
        probe.instance_id = instances[w.instance].entry->conversation.id;
        probe.task = cfg.task;
        probe.combination = w.combo;
        probe.scheme = w.scheme;
        std::lock_guard lock(mu);
        quarantined.push_back({probe.key(), e.what()});
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(work.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (int t = 0; t < n_workers; ++t) {
      threads.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = work.size();
        }
      });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  if (append.is_open()) append.close();

  RunResult result;
  for (auto& [_, r] : done) {
    if (r.task == cfg.task && r.dataset == dataset_id &&
        std::find(cfg.combinations.begin(), cfg.combinations.end(), r.combination) != cfg.combinations.end() &&
        std::find(cfg.schemes.begin(), cfg.schemes.end(), r.scheme) != cfg.schemes.end()) {
      result.records.push_back(std::move(r));
    }
  }
  std::sort(result.records.begin(), result.records.end(), record_less);
  std::sort(quarantined.begin(), quarantined.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  result.quarantined = std::move(quarantined);

  const std::size_t total = result.records.size() + result.quarantined.size();
  result.manifest = {{"toolkit_version", std::string(kToolkitVersion)},
                     {"config", to_json(cfg)},
                     {"backend_identity", backend.identity()},
                     {"dataset",
                      {{"id", dataset_id},
                       {"size", ds.entries.size()},
                       {"filter", to_json(ds.config)},
                       {"source_id", ds.provenance.source_id}}},
                     {"records", result.records.size()},
                     {"quarantined", result.quarantined.size()}};

  if (out_dir) {
    write_file_atomic(records_path, records_jsonl(result.records));
    nlohmann::ordered_json q = nlohmann::ordered_json::array();
    for (const auto& x : result.quarantined) q.push_back({{"key", x.key}, {"reason", x.reason}});
    write_file_atomic(*out_dir / "quarantine.json", q.dump(2) + "\n");
    write_file_atomic(*out_dir / "run_manifest.json", result.manifest.dump(2) + "\n");
  }

  if (total > 0 && static_cast<double>(result.quarantined.size()) / static_cast<double>(total) > cfg.abort_threshold) {
    throw Error(Errc::kInstanceAborted, std::to_string(result.quarantined.size()) + " of " + std::to_string(total) +
                                            " instances aborted, above threshold " +
                                            format_fixed(cfg.abort_threshold, 4));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Aggregates

/// Fraction correct. Throws EmptyCell for no records.
inline double macro_accuracy(const std::vector<EvalRecord>& cell) {
  if (cell.empty()) throw Error(Errc::kEmptyCell, "accuracy of an empty cell");
  const auto correct = std::count_if(cell.begin(), cell.end(), [](const EvalRecord& r) { return r.correct; });
  return static_cast<double>(correct) / static_cast<double>(cell.size());
}

/// Accuracy at the three-decimal precision it is reported with (k / 1000,
/// ties rounded up), computed exactly from the counts.
inline double reported_accuracy(std::int64_t correct, std::int64_t n) {
  if (n <= 0) throw Error(Errc::kEmptyCell, "accuracy of an empty cell");
  const std::int64_t k = (2000 * correct + n) / (2 * n);
  return static_cast<double>(k) / 1000.0;
}

struct AccuracyCell {
  std::string dataset;
  Task task = Task::kAR;
  Combination combination = Combination::kConv;
  Scheme scheme = Scheme::kVerbose;
  std::int64_t correct = 0;
  std::int64_t n = 0;

  double accuracy() const { return static_cast<double>(correct) / static_cast<double>(n); }
  double reported() const { return reported_accuracy(correct, n); }
};

inline std::vector<AccuracyCell> accuracy_table(const std::vector<EvalRecord>& records) {
  std::map<std::tuple<std::string, Task, Combination, Scheme>, AccuracyCell> cells;
  for (const auto& r : records) {
    auto& c = cells[{r.dataset, r.task, r.combination, r.scheme}];
    c.dataset = r.dataset;
    c.task = r.task;
    c.combination = r.combination;
    c.scheme = r.scheme;
    ++c.n;
    if (r.correct) ++c.correct;
  }
  std::vector<AccuracyCell> out;
  for (auto& [_, c] : cells) out.push_back(c);
  return out;
}

struct GapEntry {
  std::string dataset;
  Task task = Task::kAR;
  Combination combination = Combination::kConv;
  double best = 0;
  double average = 0;
  double gap_rel = 0;
  Scheme best_scheme = Scheme::kVerbose;
  std::int64_t n = 0;
};

/// gap_rel = 1 - mean/max over the three schemes (accuracies in verbose,
/// medium, concise order). Ties for best go to the more verbose scheme.
inline GapEntry relative_gap(const std::array<double, 3>& by_scheme) {
  GapEntry g;
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (by_scheme[i] > by_scheme[best]) best = i;
  }
  if (!(by_scheme[best] > 0)) throw Error(Errc::kDegenerateCell, "all scheme accuracies are zero");
  g.best = by_scheme[best];
  g.average = (by_scheme[0] + by_scheme[1] + by_scheme[2]) / 3.0;
  g.gap_rel = 1.0 - g.average / g.best;
  g.best_scheme = kAllSchemes[best];
  return g;
}

/// One GapEntry per (dataset, task, combination) that has all three schemes,
/// computed from the reported per-scheme accuracies.
inline std::vector<GapEntry> gap_table(const std::vector<AccuracyCell>& cells) {
  std::map<std::tuple<std::string, Task, Combination>, std::array<std::optional<AccuracyCell>, 3>> grouped;
  for (const auto& c : cells) grouped[{c.dataset, c.task, c.combination}][static_cast<std::size_t>(c.scheme)] = c;
  std::vector<GapEntry> out;
  for (const auto& [key, by] : grouped) {
    if (!by[0] || !by[1] || !by[2]) continue;
    const std::array<double, 3> acc = {by[0]->reported(), by[1]->reported(), by[2]->reported()};
    if (std::all_of(acc.begin(), acc.end(), [](double a) { return a == 0; })) continue;
    GapEntry g = relative_gap(acc);
    g.dataset = std::get<0>(key);
    g.task = std::get<1>(key);
    g.combination = std::get<2>(key);
    g.n = by[0]->n;
    out.push_back(g);
  }
  return out;
}

enum class SliceKey { kDegree, kAvgOutgoingWeightRounded };

inline std::string_view to_string(SliceKey k) { return k == SliceKey::kDegree ? "deg" : "wavg"; }

struct SliceBucket {
  std::string dataset;
  Task task = Task::kAR;
  Combination combination = Combination::kConv;
  Scheme scheme = Scheme::kVerbose;
  SliceKey key = SliceKey::kDegree;
  std::int64_t value = 0;
  std::int64_t correct = 0;
  std::int64_t n = 0;

  double accuracy() const { return static_cast<double>(correct) / static_cast<double>(n); }
};

struct SliceCoverage {
  std::string dataset;
  Task task = Task::kAR;
  Combination combination = Combination::kConv;
  Scheme scheme = Scheme::kVerbose;
  SliceKey key = SliceKey::kDegree;
  std::vector<std::int64_t> present;
  std::vector<std::int64_t> empty;  // gaps between the smallest and largest present value
};

struct SliceTable {
  std::vector<SliceBucket> buckets;
  std::vector<SliceCoverage> coverage;
};

/// Accuracy per structural bucket of the next-speaker node, per cell.
inline SliceTable structural_slices(const std::vector<EvalRecord>& records, SliceKey key) {
  using CellKey = std::tuple<std::string, Task, Combination, Scheme>;
  std::map<CellKey, std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>>> grouped;
  for (const auto& r : records) {
    const std::int64_t v = key == SliceKey::kDegree ? r.deg_u : r.w_avg_o_rounded;
    auto& [correct, n] = grouped[{r.dataset, r.task, r.combination, r.scheme}][v];
    ++n;
    if (r.correct) ++correct;
  }
  SliceTable table;
  for (const auto& [cell, buckets] : grouped) {
    SliceCoverage cov{std::get<0>(cell), std::get<1>(cell), std::get<2>(cell), std::get<3>(cell), key, {}, {}};
    for (const auto& [v, cn] : buckets) {
      table.buckets.push_back({std::get<0>(cell), std::get<1>(cell), std::get<2>(cell), std::get<3>(cell), key, v,
                               cn.first, cn.second});
      cov.present.push_back(v);
    }
    for (auto v = buckets.begin()->first; v <= buckets.rbegin()->first; ++v) {
      if (!buckets.count(v)) cov.empty.push_back(v);
    }
    table.coverage.push_back(std::move(cov));
  }
  return table;
}

}  // namespace mpcprobe
