// mpc_probe: batch command line for building diagnostic datasets, generating
// auxiliary texts, scoring RS/AR matrices and writing reports.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mpcprobe/mpcprobe.hpp"

namespace fs = std::filesystem;
using namespace mpcprobe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::kInvalidConfig:
    case Errc::kIllegalCombination:
    case Errc::kDecodeError:
    case Errc::kDummyCollision:
    case Errc::kInvalidNextSpeaker:
    case Errc::kMissingRepresentation:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

struct BackendOptions {
  std::string kind = "mock";
  std::string endpoint;
  std::uint64_t seed = 0;
};

void add_backend_options(CLI::App* cmd, BackendOptions& b) {
  cmd->add_option("--backend", b.kind, "Scoring/generation backend")->check(CLI::IsMember({"mock", "http"}));
  cmd->add_option("--endpoint", b.endpoint, "Base URL of the http backend");
  cmd->add_option("--seed", b.seed, "Seed for the mock backend and RS distractor draws");
}

std::unique_ptr<Backend> make_backend(const BackendOptions& b) {
  if (b.kind == "http") {
    if (b.endpoint.empty()) throw Error(Errc::kInvalidConfig, "--backend http needs --endpoint");
    return std::make_unique<HttpBackend>(b.endpoint);
  }
  return std::make_unique<MockBackend>(b.seed);
}

BackendDescriptor describe(const BackendOptions& b) {
  BackendDescriptor d;
  d.kind = b.kind == "http" ? BackendDescriptor::Kind::kHttp : BackendDescriptor::Kind::kMock;
  d.endpoint = b.endpoint;
  d.seed = b.seed;
  return d;
}

// Flag > MPC_PROBE_CACHE > config file > default.
fs::path resolve_cache(const CLI::Option* flag, const std::string& value) {
  if (flag->count() > 0) return value;
  if (const char* env = std::getenv("MPC_PROBE_CACHE"); env && *env) return env;
  if (!value.empty()) return value;
  return ".mpc_probe_cache";
}

std::vector<Scheme> parse_schemes(const std::vector<std::string>& names) {
  std::vector<Scheme> out;
  for (const auto& n : names) {
    if (n == "all") return {kAllSchemes.begin(), kAllSchemes.end()};
    out.push_back(parse_scheme(n));
  }
  return out;
}

std::vector<Combination> parse_combos(Task task, const std::vector<std::string>& names) {
  std::vector<Combination> out;
  for (const auto& n : names) {
    if (n == "all") return legal_combinations(task);
    out.push_back(parse_combination(n));
  }
  return out;
}

// Fills options the user did not pass from a JSON object keyed by long flag
// name (without dashes). Values on the command line always win.
void apply_config(CLI::App* cmd, const nlohmann::json& cfg) {
  for (CLI::Option* opt : cmd->get_options()) {
    if (opt->count() > 0) continue;
    const std::string key = opt->get_single_name();
    if (key.empty() || !cfg.contains(key)) continue;
    const auto& v = cfg.at(key);
    std::vector<std::string> values;
    auto to_text = [](const nlohmann::json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
    if (v.is_array()) {
      for (const auto& x : v) values.push_back(to_text(x));
    } else {
      values.push_back(to_text(v));
    }
    opt->add_result(values);
    opt->run_callback();
  }
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Error(Errc::kInvalidConfig, flag + " is required");
}

void print_diagnostics(const std::vector<ParseDiagnostic>& diags) {
  for (const auto& d : diags) std::cerr << "warning: " << d.message << "\n";
}

std::vector<Conversation> read_corpus(const std::string& path, const std::string& format, bool allow_empty,
                                      std::vector<ParseDiagnostic>* diags_out) {
  ParseOptions opts;
  opts.allow_empty_text = allow_empty;
  auto parsed = parse_corpus(read_file(path), parse_corpus_format(format), opts);
  print_diagnostics(parsed.diagnostics);
  if (diags_out) *diags_out = parsed.diagnostics;
  return std::move(parsed.conversations);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural probing of multi-party conversation understanding"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with default option values");
  app.set_version_flag("--version", std::string(kToolkitVersion));

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse and validate a raw corpus into generic JSONL");
  std::string ingest_corpus, ingest_format = "generic-jsonl", ingest_out;
  bool ingest_allow_empty = false;
  ingest->add_option("--corpus", ingest_corpus, "Input corpus file");
  ingest->add_option("--format", ingest_format, "ubuntu-irc-adjacency | generic-jsonl");
  ingest->add_option("--out", ingest_out, "Output directory");
  ingest->add_flag("--allow-empty-text", ingest_allow_empty, "Accept turns with empty text");

  // build
  auto* build = app.add_subcommand("build", "Filter a corpus into a diagnostic dataset");
  std::string build_corpus, build_format = "generic-jsonl", build_out, build_id, build_scope = "context-only";
  int build_users = 3, max_len = 15, exact_len = 0;
  bool build_allow_empty = false, no_connectivity = false, allow_late_speaker = false;
  build->add_option("--corpus", build_corpus, "Input corpus file");
  build->add_option("--format", build_format, "ubuntu-irc-adjacency | generic-jsonl");
  build->add_option("--users", build_users, "Exact number of users per conversation");
  auto* max_opt = build->add_option("--max-len", max_len, "Keep conversations with at most N turns");
  auto* exact_opt = build->add_option("--exact-len", exact_len, "Keep conversations with exactly N turns");
  max_opt->excludes(exact_opt);
  build->add_option("--scope", build_scope, "Metric scope: context-only | full");
  build->add_option("--id", build_id, "Dataset id (default U<users>)");
  build->add_option("--out", build_out, "Output directory");
  build->add_flag("--allow-empty-text", build_allow_empty, "Accept turns with empty text");
  build->add_flag("--no-connectivity", no_connectivity, "Do not require a connected interaction graph");
  build->add_flag("--allow-late-speaker", allow_late_speaker, "Do not require the next speaker in the context");

  // genaux
  auto* genaux = app.add_subcommand("genaux", "Generate and cache summaries and user descriptions");
  std::string genaux_dataset, genaux_cache, genaux_variant = "V1";
  std::vector<std::string> genaux_schemes{"all"};
  int genaux_workers = 1;
  BackendOptions genaux_backend;
  genaux->add_option("--dataset", genaux_dataset, "Dataset directory written by build");
  genaux->add_option("--schemes", genaux_schemes, "Prompt schemes")->delimiter(',');
  genaux->add_option("--variant", genaux_variant, "Output template variant V1 | V2");
  auto* genaux_cache_opt = genaux->add_option("--cache", genaux_cache, "Auxiliary text cache directory");
  genaux->add_option("--workers", genaux_workers, "Parallel generation requests");
  add_backend_options(genaux, genaux_backend);

  // run
  auto* run = app.add_subcommand("run", "Score an RS or AR matrix over a dataset");
  std::string run_dataset, run_task = "AR", run_out, run_cache, run_variant = "V1", run_dummy(kDefaultDummyTag);
  std::vector<std::string> run_combos{"all"}, run_schemes{"all"};
  int run_workers = 1;
  double abort_threshold = 0.01;
  BackendOptions run_backend;
  run->add_option("--dataset", run_dataset, "Dataset directory written by build");
  run->add_option("--task", run_task, "AR | RS")->check(CLI::IsMember({"AR", "RS"}));
  run->add_option("--combos", run_combos, "Input combinations, comma separated, or all")->delimiter(',');
  run->add_option("--schemes", run_schemes, "Prompt schemes, comma separated, or all")->delimiter(',');
  run->add_option("--variant", run_variant, "Output template variant for SUMM/DESC");
  run->add_option("--dummy", run_dummy, "Dummy addressee tag for AR");
  run->add_option("--abort-threshold", abort_threshold, "Maximum fraction of aborted instances");
  run->add_option("--out", run_out, "Run output directory");
  auto* run_cache_opt = run->add_option("--cache", run_cache, "Auxiliary text cache directory");
  run->add_option("--workers", run_workers, "Worker threads");
  add_backend_options(run, run_backend);

  // report
  auto* report = app.add_subcommand("report", "Aggregate run records into tables and plots");
  std::vector<std::string> report_runs;
  std::string report_out;
  bool report_plots = false;
  report->add_option("--runs", report_runs, "Run directories")->delimiter(',');
  report->add_option("--out", report_out, "Report output directory");
  report->add_flag("--plots", report_plots, "Also write SVG plots");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Print the exact classification prompt of one instance");
  std::string insp_dataset, insp_task = "AR", insp_combo = "CONV", insp_scheme = "verbose", insp_instance,
              insp_cache, insp_variant = "V1", insp_candidate;
  BackendOptions insp_backend;
  inspect->add_option("--dataset", insp_dataset, "Dataset directory");
  inspect->add_option("--task", insp_task, "AR | RS");
  inspect->add_option("--combo", insp_combo, "Input combination");
  inspect->add_option("--scheme", insp_scheme, "Prompt scheme");
  inspect->add_option("--instance", insp_instance, "Conversation id (default: first)");
  inspect->add_option("--variant", insp_variant, "Output template variant");
  inspect->add_option("--candidate", insp_candidate, "Print the scored string for this candidate instead");
  auto* insp_cache_opt = inspect->add_option("--cache", insp_cache, "Auxiliary text cache directory");
  add_backend_options(inspect, insp_backend);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus in generic JSONL");
  int synth_count = 50, synth_users = 4, synth_turns = 15;
  std::uint64_t synth_seed = 2024;
  std::string synth_out;
  synth->add_option("--count", synth_count, "Number of conversations");
  synth->add_option("--users", synth_users, "Users per conversation");
  synth->add_option("--turns", synth_turns, "Turns per conversation");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output file");

  // serve-stub
  auto* serve = app.add_subcommand("serve-stub", "Serve the mock model over the HTTP wire contract");
  std::string serve_host = "127.0.0.1";
  int serve_port = 8765;
  std::uint64_t serve_seed = 0;
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port");
  serve->add_option("--seed", serve_seed, "Mock model seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!config_path.empty()) {
      const auto cfg = nlohmann::json::parse(read_file(config_path));
      if (!cfg.is_object()) throw Error(Errc::kInvalidConfig, "config must be a JSON object");
      for (auto* sub : app.get_subcommands()) apply_config(sub, cfg);
    }

    if (*ingest) {
      require(ingest_corpus, "--corpus");
      require(ingest_out, "--out");
      std::vector<ParseDiagnostic> diags;
      auto convs = read_corpus(ingest_corpus, ingest_format, ingest_allow_empty, &diags);
      write_file_atomic(fs::path(ingest_out) / "corpus.jsonl", serialize_jsonl(convs));
      nlohmann::ordered_json d = nlohmann::ordered_json::array();
      for (const auto& x : diags) d.push_back({{"line", x.line}, {"message", x.message}});
      nlohmann::ordered_json manifest = {{"toolkit_version", std::string(kToolkitVersion)},
                                         {"source", ingest_corpus},
                                         {"format", std::string(to_string(parse_corpus_format(ingest_format)))},
                                         {"conversations", convs.size()},
                                         {"diagnostics", d}};
      write_file_atomic(fs::path(ingest_out) / "ingest_manifest.json", manifest.dump(2) + "\n");
      std::cout << "ingested " << convs.size() << " conversations, " << diags.size() << " diagnostics\n";
      return kExitOk;
    }

    if (*build) {
      require(build_corpus, "--corpus");
      require(build_out, "--out");
      FilterConfig cfg;
      cfg.user_count = build_users;
      if (exact_opt->count() > 0) {
        cfg.length = {LengthPolicy::Mode::kExactly, exact_len};
      } else {
        cfg.length = {LengthPolicy::Mode::kAtMost, max_len};
      }
      cfg.require_connected = !no_connectivity;
      cfg.require_next_speaker_in_context = !allow_late_speaker;
      cfg.scope = parse_metric_scope(build_scope);
      auto corpus = read_corpus(build_corpus, build_format, build_allow_empty, nullptr);
      auto ds = build_diagnostic_subset(corpus, cfg, fs::path(build_corpus).filename().string(), build_id);
      write_dataset(ds, build_out);
      std::cout << ds.id << ": kept " << ds.entries.size() << " of " << ds.provenance.input_count << " (";
      bool first = true;
      for (auto p : kAllPredicates) {
        std::cout << (first ? "" : ", ") << to_string(p) << "=" << ds.provenance.rejections.at(std::string(to_string(p)));
        first = false;
      }
      std::cout << ")\n";
      return kExitOk;
    }

    if (*genaux) {
      require(genaux_dataset, "--dataset");
      auto ds = load_dataset(genaux_dataset);
      auto backend = make_backend(genaux_backend);
      AuxCache cache(resolve_cache(genaux_cache_opt, genaux_cache));
      const auto schemes = parse_schemes(genaux_schemes);
      const auto variant = parse_output_variant(genaux_variant);
      std::vector<Conversation> contexts;
      for (const auto& e : ds.entries) contexts.push_back(context_of(e.conversation));
      std::atomic<std::size_t> next{0};
      std::atomic<std::size_t> degraded{0};
      std::exception_ptr failure;
      std::mutex failure_mu;
      const std::size_t jobs = contexts.size() * schemes.size();
      auto worker = [&] {
        try {
          for (std::size_t k = next++; k < jobs; k = next++) {
            const auto& ctx = contexts[k / schemes.size()];
            const auto scheme = schemes[k % schemes.size()];
            if (summary_for(ctx, *backend, scheme, variant, &cache).parse_degraded) ++degraded;
            if (user_description_for(ctx, *backend, scheme, variant, &cache).parse_degraded) ++degraded;
          }
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = jobs;
        }
      };
      std::vector<std::thread> threads;
      for (int t = 0; t < std::max(1, genaux_workers); ++t) threads.emplace_back(worker);
      for (auto& t : threads) t.join();
      if (failure) std::rethrow_exception(failure);
      std::cout << "generated " << 2 * jobs << " auxiliary texts into " << cache.dir().string() << " ("
                << degraded.load() << " unparsed)\n";
      return kExitOk;
    }

    if (*run) {
      require(run_dataset, "--dataset");
      require(run_out, "--out");
      auto ds = load_dataset(run_dataset);
      RunConfig cfg;
      cfg.dataset_id = ds.id;
      cfg.task = parse_task(run_task);
      cfg.combinations = parse_combos(cfg.task, run_combos);
      cfg.schemes = parse_schemes(run_schemes);
      cfg.backend = describe(run_backend);
      cfg.seed = run_backend.seed;
      cfg.scope = ds.config.scope;
      cfg.variant = parse_output_variant(run_variant);
      cfg.dummy_tag = run_dummy;
      cfg.abort_threshold = abort_threshold;
      cfg.workers = run_workers;
      auto backend = make_backend(run_backend);
      AuxCache cache(resolve_cache(run_cache_opt, run_cache));
      auto result = run_evaluation(cfg, ds, *backend, &cache, fs::path(run_out));
      std::cout << "scored " << result.records.size() << " records, " << result.quarantined.size()
                << " quarantined\n";
      return kExitOk;
    }

    if (*report) {
      if (report_runs.empty()) throw Error(Errc::kInvalidConfig, "--runs is required");
      require(report_out, "--out");
      std::vector<EvalRecord> records;
      for (const auto& dir : report_runs) {
        const auto path = fs::path(dir) / "records.jsonl";
        if (!fs::exists(path)) throw Error(Errc::kIoError, "no records.jsonl in " + dir);
        auto part = load_records(path);
        records.insert(records.end(), part.begin(), part.end());
      }
      std::sort(records.begin(), records.end(), record_less);
      emit_report(build_report(records), report_out, report_plots);
      std::cout << "report written to " << report_out << "\n";
      return kExitOk;
    }

    if (*inspect) {
      require(insp_dataset, "--dataset");
      auto ds = load_dataset(insp_dataset);
      RunConfig cfg;
      cfg.task = parse_task(insp_task);
      cfg.seed = insp_backend.seed;
      cfg.variant = parse_output_variant(insp_variant);
      const auto combo = parse_combination(insp_combo);
      require_legal(cfg.task, combo);
      auto instances = prepare_instances(cfg, ds);
      if (instances.empty()) throw Error(Errc::kInvalidConfig, "dataset is empty");
      const PreparedInstance* inst = &instances.front();
      if (!insp_instance.empty()) {
        inst = nullptr;
        for (const auto& i : instances) {
          if (i.entry->conversation.id == insp_instance) inst = &i;
        }
        if (!inst) throw Error(Errc::kInvalidConfig, "no instance '" + insp_instance + "' in dataset");
      }
      auto backend = make_backend(insp_backend);
      AuxCache cache(resolve_cache(insp_cache_opt, insp_cache));
      auto prompt = classification_prompt(cfg, *inst, combo, parse_scheme(insp_scheme), *backend, &cache);
      std::cout << (insp_candidate.empty() ? prompt.text() : prompt.with_candidate(insp_candidate));
      std::cout.flush();
      return kExitOk;
    }

    if (*synth) {
      require(synth_out, "--out");
      write_file_atomic(synth_out, serialize_jsonl(synthesize_corpus(synth_seed, synth_count, synth_users, synth_turns)));
      std::cout << "wrote " << synth_count << " conversations to " << synth_out << "\n";
      return kExitOk;
    }

    if (*serve) {
      MockBackend model(serve_seed);
      StubServer stub(model);
      std::cout << "serving mock:seed=" << serve_seed << " on http://" << serve_host << ":" << serve_port << "\n"
                << std::flush;
      stub.listen(serve_host, serve_port);
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
