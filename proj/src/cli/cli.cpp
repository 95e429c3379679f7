// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include "promptrecon/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "promptrecon/backends.hpp"
#include "promptrecon/bank.hpp"
#include "promptrecon/classifier.hpp"
#include "promptrecon/corpus.hpp"
#include "promptrecon/cost.hpp"
#include "promptrecon/eval.hpp"
#include "promptrecon/modifiers.hpp"
#include "promptrecon/orchestrator.hpp"
#include "promptrecon/promptgen.hpp"

namespace promptrecon::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(ErrorCode code) noexcept {
  return code == ErrorCode::kBackend ? kExitBackend : kExitData;
}

namespace {

/// A flag combination CLI11 cannot express; reported with exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {}

  void info(std::string_view event, const ordered_json& fields = ordered_json::object()) {
    write("info", event, fields);
  }
  void error(std::string_view event, const ordered_json& fields) { write("error", event, fields); }

 private:
  void write(std::string_view level, std::string_view event, const ordered_json& fields) {
    ordered_json j{{"level", level}, {"event", event}};
    for (const auto& [k, v] : fields.items()) j[k] = v;
    err_ << j.dump() << '\n' << std::flush;
  }

  std::ostream& err_;
};

std::ifstream open_in(const fs::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + std::string(what) + " " + path.string());
  return in;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path, std::string_view what) {
  auto in = open_in(path, what);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

/// Regular files directly inside `dir`, sorted by name, optionally filtered by
/// extension.
std::vector<fs::path> list_files(const fs::path& dir, std::string_view extension = {}) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (!extension.empty() && entry.path().extension() != extension) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string directory_name(const fs::path& dir) {
  auto p = dir.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

fs::path asset_path(std::string_view relative) { return fs::path(PROMPTRECON_ASSET_DIR) / relative; }

struct Globals {
  std::uint64_t seed = 0;
  CLI::Option* seed_option = nullptr;
  bool seed_given() const { return seed_option != nullptr && seed_option->count() > 0; }
};

// ---- subcommands ----------------------------------------------------------

struct IngestArgs {
  std::string in, out, config, format;
};

int cmd_ingest(const IngestArgs& a, Log& log) {
  const auto config = a.config.empty() ? corpus::CorpusConfig{}
                                       : corpus::CorpusConfig::from_json(read_json(a.config, "corpus config"));
  const corpus::RowParser parser(config);
  auto in = open_in(a.in, "export");
  std::string format = a.format;
  if (format.empty()) {
    const auto ext = fs::path(a.in).extension();
    format = ext == ".jsonl" || ext == ".json" ? "jsonl" : "csv";
  }
  std::unique_ptr<corpus::RowReader> reader;
  if (format == "csv") {
    reader = std::make_unique<corpus::CsvRowReader>(in);
  } else {
    reader = std::make_unique<corpus::JsonlRowReader>(in);
  }
  std::string buffer;
  const auto stats =
      corpus::clean_corpus(*reader, parser, [&](const corpus::PromptRecord& r) { buffer += corpus::record_to_json(r).dump() + "\n"; });
  write_file(a.out, buffer);
  log.info("ingest", {{"in", a.in}, {"out", a.out}, {"stats", stats.to_json()}});
  return kExitOk;
}

struct MineArgs {
  std::string in, out, dataset_out;
  std::uint64_t min_count = 1000;
  unsigned shards = 1;
  std::uint64_t min_per_label = 1;
  std::size_t cap = 360000;
  double validation_fraction = 0.1;
};

int cmd_mine(const MineArgs& a, const Globals& g, Log& log) {
  auto in = open_in(a.in, "corpus");
  const auto records = corpus::read_records(in);
  const auto vocab = modifiers::mine_modifiers(records, a.min_count, a.shards);
  write_file(a.out, vocab.to_json().dump(2) + "\n");
  ordered_json fields{{"records", records.size()}, {"modifiers", vocab.size()}, {"out", a.out}};
  if (!a.dataset_out.empty()) {
    modifiers::DatasetOptions options;
    options.min_per_label = a.min_per_label;
    options.cap = a.cap;
    options.validation_fraction = a.validation_fraction;
    options.seed = g.seed;
    const auto ds = modifiers::build_classifier_dataset(records, vocab, options);
    std::ostringstream buf;
    modifiers::write_dataset(buf, ds);
    write_file(a.dataset_out, buf.str());
    fields["dataset"] = {{"out", a.dataset_out}, {"train", ds.train.size()}, {"validation", ds.validation.size()}};
  }
  log.info("mine-modifiers", fields);
  return kExitOk;
}

struct BuildBankArgs {
  std::string in, out;
};

int cmd_build_bank(const BuildBankArgs& a, Log& log) {
  auto in = open_in(a.in, "embedded corpus");
  const auto b = bank::bank_from_jsonl(in);
  bank::save_bank(b, fs::path(a.out));
  log.info("build-bank", {{"out", a.out}, {"count", b.count()}, {"dim", b.dim()}});
  return kExitOk;
}

struct TrainArgs {
  std::string dataset, bank, vocab, out, config, curve_out;
  double dropout = 0.3;
  CLI::Option* epochs = nullptr;
  CLI::Option* learning_rate = nullptr;
  CLI::Option* batch_size = nullptr;
  std::size_t epochs_value = 0;
  double learning_rate_value = 0.0;
  std::size_t batch_size_value = 0;
};

int cmd_train(const TrainArgs& a, const Globals& g, Log& log) {
  auto config = a.config.empty() ? classifier::TrainConfig{}
                                 : classifier::TrainConfig::from_json(read_json(a.config, "train config"));
  if (a.epochs->count() > 0) config.epochs = a.epochs_value;
  if (a.learning_rate->count() > 0) config.learning_rate = a.learning_rate_value;
  if (a.batch_size->count() > 0) config.batch_size = a.batch_size_value;
  if (g.seed_given()) config.seed = g.seed;
  config.validate();

  const auto b = bank::load_bank(fs::path(a.bank));
  const auto vocab = modifiers::ModifierVocabulary::from_json(read_json(a.vocab, "vocabulary"));
  auto in = open_in(a.dataset, "dataset");
  const auto ds = modifiers::read_dataset(in, vocab.size());
  std::vector<std::string> labels;
  for (const auto& s : vocab.stats()) labels.push_back(s.text);

  const auto train_split = classifier::assemble_split(ds.train, b, vocab.size());
  std::optional<classifier::TrainingSplit> validation;
  if (!ds.validation.empty()) validation = classifier::assemble_split(ds.validation, b, vocab.size());
  auto model = classifier::MlpModel::initialized(classifier::default_layer_dims(b.dim(), vocab.size()), a.dropout,
                                                 config.seed);
  const auto curve = classifier::train(model, train_split, validation ? &*validation : nullptr, config);
  classifier::save_model(model, labels, fs::path(a.out));
  if (!a.curve_out.empty()) write_file(a.curve_out, curve.to_json().dump(2) + "\n");
  ordered_json fields{{"out", a.out}, {"epochs", config.epochs}, {"train_loss", curve.train.back()}};
  if (!curve.validation.empty()) fields["validation_loss"] = curve.validation.back();
  log.info("train", fields);
  return kExitOk;
}

struct PrCurveArgs {
  std::string model, dataset, bank, split = "validation", out;
  std::vector<std::size_t> ks{5, 10, 20, 50};
};

int cmd_pr_curve(const PrCurveArgs& a, std::ostream& out, Log& log) {
  const auto loaded = classifier::load_model(fs::path(a.model));
  const auto b = bank::load_bank(fs::path(a.bank));
  auto in = open_in(a.dataset, "dataset");
  const auto ds = modifiers::read_dataset(in, loaded.model.output_dim());
  std::vector<modifiers::LabeledSample> samples;
  if (a.split == "train" || a.split == "all") samples.insert(samples.end(), ds.train.begin(), ds.train.end());
  if (a.split == "validation" || a.split == "all") {
    samples.insert(samples.end(), ds.validation.begin(), ds.validation.end());
  }
  const auto eval = classifier::assemble_split(samples, b, loaded.model.output_dim());
  const auto pr = classifier::eval_precision_recall_at_k(loaded.model, eval, a.ks);
  ordered_json rows = ordered_json::array();
  out << "| k | precision | recall |\n|---|-----------|--------|\n";
  for (const auto& [k, v] : pr) {
    char line[96];
    std::snprintf(line, sizeof line, "| %zu | %.4f | %.4f |\n", k, v.precision, v.recall);
    out << line;
    rows.push_back({{"k", k}, {"precision", v.precision}, {"recall", v.recall}, {"recall_samples", v.recall_samples}});
  }
  if (!a.out.empty()) write_file(a.out, rows.dump(2) + "\n");
  log.info("pr-curve", {{"samples", samples.size()}, {"split", a.split}});
  return kExitOk;
}

struct RenderArgs {
  std::string context, kind = "initial", templates;
};

int cmd_render(const RenderArgs& a, std::ostream& out, Log& log) {
  const auto context = promptgen::AttackContext::from_json(read_json(a.context, "context"));
  const auto templates =
      a.templates.empty() ? promptgen::TemplateSet::load_default() : promptgen::TemplateSet::load(a.templates);
  const auto text = a.kind == "refinement" ? promptgen::build_refinement_instruction(context, templates)
                                           : promptgen::build_initial_instruction(context, templates);
  out << text.text;
  if (text.text.empty() || text.text.back() != '\n') out << '\n';
  log.info("render", {{"kind", promptgen::to_string(text.kind)}, {"token_estimate", text.token_estimate}});
  return kExitOk;
}

struct QueryArgs {
  std::string bank, vec, side = "text";
  std::size_t k = 10;
};

int cmd_query(const QueryArgs& a, std::ostream& out, Log& log) {
  const auto b = bank::load_bank(fs::path(a.bank));
  const auto queries = bank::read_vectors(fs::path(a.vec));
  const auto side = bank::side_from_string(a.side);
  if (!side) throw UsageError("--side must be text or image");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    ordered_json neighbors = ordered_json::array();
    for (const auto& n : bank::knn(b, queries[i], a.k, *side)) {
      neighbors.push_back({{"id", n.id}, {"similarity", n.similarity}, {"prompt", n.prompt}});
    }
    out << ordered_json{{"query", i}, {"neighbors", neighbors}}.dump() << '\n';
  }
  log.info("query", {{"queries", queries.size()}, {"k", a.k}});
  return kExitOk;
}

struct AttackArgs {
  std::string target, bank, model, backends, out, templates, sample_id, setting, method;
  CLI::Option* images_per_round = nullptr;
  CLI::Option* max_rounds = nullptr;
  CLI::Option* plateau_epsilon = nullptr;
  CLI::Option* target_similarity = nullptr;
  std::size_t images_per_round_value = 4;
  std::size_t max_rounds_value = 3;
  double plateau_epsilon_value = 0.0;
  double target_similarity_value = 0.0;
  orchestrator::RetrievalOptions retrieval;
};

int cmd_attack(const AttackArgs& a, const Globals& g, Log& log) {
  const fs::path config_path(a.backends);
  const auto config = read_json(config_path, "backend config");
  const auto attack = config.value("attack", nlohmann::json::object());

  orchestrator::AttackOptions options;
  options.sample_id = a.sample_id.empty() ? directory_name(a.target) : a.sample_id;
  const auto setting_text = !a.setting.empty() ? a.setting : attack.value("setting", std::string("midjourney-multiple"));
  const auto setting = orchestrator::setting_from_string(setting_text);
  if (!setting) throw UsageError("unknown setting: " + setting_text);
  options.setting = *setting;
  options.method = !a.method.empty() ? a.method : attack.value("method", options.method);
  options.images_per_round = a.images_per_round->count() > 0 ? a.images_per_round_value
                                                             : attack.value("images_per_round", options.images_per_round);
  options.policy = orchestrator::StopPolicy::from_json(attack.value("policy", nlohmann::json::object()));
  if (a.max_rounds->count() > 0) options.policy.max_refinement_rounds = a.max_rounds_value;
  if (a.plateau_epsilon->count() > 0) options.policy.plateau_epsilon = a.plateau_epsilon_value;
  if (a.target_similarity->count() > 0) options.policy.target_similarity = a.target_similarity_value;
  options.policy.validate();
  std::optional<promptgen::TemplateSet> templates;
  if (!a.templates.empty()) templates = promptgen::TemplateSet::load(a.templates);
  options.templates = templates ? &*templates : nullptr;

  std::vector<std::string> targets;
  for (const auto& p : list_files(a.target)) targets.push_back(p.string());
  if (targets.empty()) throw Error(ErrorCode::kEmptySet, "no target images in " + a.target);

  const auto b = bank::load_bank(fs::path(a.bank));
  const auto loaded = classifier::load_model(fs::path(a.model));
  const auto stats = bank::CorpusStats::from_prompts(b.prompts());
  auto clients = backends::make_backends(config, config_path.parent_path(), g.seed);

  orchestrator::Vectors target_embeddings;
  for (const auto& t : targets) target_embeddings.push_back(clients.embedder->embed(t));
  const auto seeds = orchestrator::retrieve_context(target_embeddings, b, stats, loaded.model, loaded.labels, a.retrieval);
  log.info("attack.seeds", seeds.to_json());

  const orchestrator::Backends handles{*clients.llm, *clients.t2i, *clients.embedder};
  const auto session = orchestrator::run_attack(targets, seeds, handles, options);
  write_file(a.out, session.to_json().dump(2) + "\n");

  ordered_json fields{{"out", a.out}, {"sample_id", session.sample_id}, {"rounds", session.rounds.size()}};
  if (session.stop_reason) fields["stop_reason"] = orchestrator::to_string(*session.stop_reason);
  if (!session.rounds.empty()) {
    fields["round0_similarity"] = session.rounds.front().similarity;
    fields["best_similarity"] = session.best_similarity();
  }
  if (session.stop_reason == orchestrator::StopReason::kBackendError) {
    fields["error"] = session.error;
    log.error("attack", fields);
    return kExitBackend;
  }
  log.info("attack", fields);
  return kExitOk;
}

struct EvaluateArgs {
  std::string sessions, human, out;
  std::vector<std::string> methods;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, Log& log) {
  std::vector<orchestrator::AttackSession> sessions;
  for (const auto& p : list_files(a.sessions, ".json")) {
    try {
      sessions.push_back(orchestrator::AttackSession::from_json(read_json(p, "session")));
    } catch (const Error& e) {
      throw Error(e.code(), p.string() + ": " + e.what());
    }
  }
  if (sessions.empty()) throw Error(ErrorCode::kEmptySet, "no session files in " + a.sessions);

  eval::Report report;
  report.clip = eval::aggregate_clip_scores(eval::clip_samples(sessions));
  std::size_t human_rows = 0;
  if (!a.human.empty()) {
    auto in = open_in(a.human, "human evaluation");
    const auto rows = eval::read_likert_csv(in);
    human_rows = rows.size();
    std::map<std::string, orchestrator::Setting> sample_settings;
    for (const auto& s : sessions) sample_settings.emplace(s.sample_id, s.setting);
    report.likert_by_method = eval::aggregate_likert(rows);
    report.likert = eval::aggregate_likert_by_setting(rows, sample_settings);
  }
  write_file(a.out, report.to_json().dump(2) + "\n");
  out << report.render_table(a.methods);
  log.info("evaluate", {{"sessions", sessions.size()}, {"human_rows", human_rows}, {"out", a.out}});
  return kExitOk;
}

struct CostArgs {
  std::string pricing = asset_path("pricing/default.json").string();
  std::string backend = "midjourney", session, out;
  CLI::Option* rounds = nullptr;
  std::uint64_t rounds_value = 4;
  bool json = false;
};

int cmd_cost(const CostArgs& a, std::ostream& out, Log& log) {
  if (!a.session.empty() && a.rounds->count() > 0) throw UsageError("--rounds and --session are exclusive");
  const auto model = cost::CostModel::load(a.pricing);
  const auto breakdown =
      a.session.empty()
          ? cost::estimate_cost(model, a.rounds_value, a.backend)
          : cost::cost_from_session(model, orchestrator::AttackSession::from_json(read_json(a.session, "session")));
  if (!a.out.empty()) write_file(a.out, breakdown.to_json().dump(2) + "\n");
  out << (a.json ? breakdown.to_json().dump(2) + "\n" : breakdown.render_text());
  log.info("cost", {{"backend", breakdown.backend}, {"rounds", breakdown.rounds}, {"total", breakdown.total.to_string()}});
  return kExitOk;
}

struct ServeMockArgs {
  std::string script, host = "127.0.0.1";
  int port = 8080;
  std::size_t fail_first = 0;
};

int cmd_serve_mock(const ServeMockArgs& a, Log& log) {
  backends::MockServer server(backends::MockScript::load(a.script), a.fail_first);
  const int port = server.start(a.host, a.port);
  log.info("serve-mock.listening", {{"host", a.host}, {"port", port}});
  std::string line;
  // Serves until stdin closes.
  while (std::getline(std::cin, line)) {
  }
  server.stop();
  log.info("serve-mock.stopped", {{"requests", server.requests_served()}});
  return kExitOk;
}

struct MockEmbedArgs {
  std::string in, script, out;
};

int cmd_mock_embed(const MockEmbedArgs& a, Log& log) {
  const auto script = backends::MockScript::load(a.script);
  const backends::MockEmbedder embedder(script);
  auto in = open_in(a.in, "corpus");
  const auto records = corpus::read_records(in);
  std::string buffer;
  for (const auto& r : records) {
    const auto& body = r.prompt.body;
    ordered_json row{{"id", r.id},
                     {"prompt", body},
                     {"text", embedder.embed_prompt(body, 0)},
                     {"image", embedder.embed_prompt(body, r.id + 1)}};
    buffer += row.dump() + "\n";
  }
  write_file(a.out, buffer);
  log.info("mock-embed-corpus", {{"records", records.size()}, {"dim", script.dim}, {"out", a.out}});
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Log log(err);
  CLI::App app{"promptrecon: prompt reconstruction pipeline", "promptrecon"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.seed_option = app.add_option("--seed", g.seed, "Seed for dataset splits, training and retry jitter");

  std::function<int()> action;
  auto bind = [&](CLI::App* sub, std::function<int()> fn) { sub->callback([&action, fn] { action = fn; }); };

  IngestArgs ingest;
  auto* s = app.add_subcommand("ingest", "Parse and filter a raw export into record JSONL");
  s->add_option("--in", ingest.in, "CSV or JSONL export")->required();
  s->add_option("--out", ingest.out, "Record JSONL output")->required();
  s->add_option("--config", ingest.config, "Corpus config JSON");
  s->add_option("--format", ingest.format, "csv or jsonl (default: by extension)")->check(CLI::IsMember({"csv", "jsonl"}));
  bind(s, [&] { return cmd_ingest(ingest, log); });

  MineArgs mine;
  s = app.add_subcommand("mine-modifiers", "Count modifiers and write the vocabulary");
  s->add_option("--in", mine.in, "Record JSONL")->required();
  s->add_option("--out", mine.out, "Vocabulary JSON output")->required();
  s->add_option("--min-count", mine.min_count, "Minimum prompts per modifier")->capture_default_str();
  s->add_option("--shards", mine.shards, "Counting threads")->capture_default_str();
  s->add_option("--dataset-out", mine.dataset_out, "Also write the classifier dataset JSONL");
  s->add_option("--min-per-label", mine.min_per_label)->capture_default_str();
  s->add_option("--cap", mine.cap)->capture_default_str();
  s->add_option("--validation-fraction", mine.validation_fraction)->capture_default_str();
  bind(s, [&] { return cmd_mine(mine, g, log); });

  BuildBankArgs build;
  s = app.add_subcommand("build-bank", "Convert embedded JSONL to the binary bank format");
  s->add_option("--in", build.in, "JSONL rows {id, prompt, text, image}")->required();
  s->add_option("--out", build.out, "Bank output")->required();
  bind(s, [&] { return cmd_build_bank(build, log); });

  TrainArgs train;
  s = app.add_subcommand("train", "Train the modifier classifier");
  s->add_option("--dataset", train.dataset, "Dataset JSONL")->required();
  s->add_option("--bank", train.bank, "Bank holding the image embeddings")->required();
  s->add_option("--vocab", train.vocab, "Vocabulary JSON naming the labels")->required();
  s->add_option("--out", train.out, "Model output")->required();
  s->add_option("--config", train.config, "Train config JSON");
  s->add_option("--dropout", train.dropout)->capture_default_str();
  s->add_option("--curve-out", train.curve_out, "Loss curve JSON output");
  train.epochs = s->add_option("--epochs", train.epochs_value);
  train.learning_rate = s->add_option("--learning-rate", train.learning_rate_value);
  train.batch_size = s->add_option("--batch-size", train.batch_size_value);
  bind(s, [&] { return cmd_train(train, g, log); });

  PrCurveArgs pr;
  s = app.add_subcommand("pr-curve", "Precision and recall at k for a trained model");
  s->add_option("--model", pr.model)->required();
  s->add_option("--dataset", pr.dataset)->required();
  s->add_option("--bank", pr.bank)->required();
  s->add_option("--ks", pr.ks)->delimiter(',')->capture_default_str();
  s->add_option("--split", pr.split)->check(CLI::IsMember({"train", "validation", "all"}))->capture_default_str();
  s->add_option("--out", pr.out, "JSON output");
  bind(s, [&] { return cmd_pr_curve(pr, out, log); });

  RenderArgs render;
  s = app.add_subcommand("render", "Render an instruction from an attack context");
  s->add_option("--context", render.context, "AttackContext JSON")->required();
  s->add_option("--kind", render.kind)->check(CLI::IsMember({"initial", "refinement"}))->capture_default_str();
  s->add_option("--templates", render.templates, "Template directory");
  bind(s, [&] { return cmd_render(render, out, log); });

  QueryArgs query;
  s = app.add_subcommand("query", "Nearest bank entries for each query vector");
  s->add_option("--bank", query.bank)->required();
  s->add_option("--vec", query.vec, "Vector file")->required();
  s->add_option("--k", query.k)->capture_default_str();
  s->add_option("--side", query.side)->check(CLI::IsMember({"text", "image"}))->capture_default_str();
  bind(s, [&] { return cmd_query(query, out, log); });

  AttackArgs attack;
  s = app.add_subcommand("attack", "Run the refinement loop against one target set");
  s->add_option("--target", attack.target, "Directory of target images")->required();
  s->add_option("--bank", attack.bank)->required();
  s->add_option("--model", attack.model)->required();
  s->add_option("--backends", attack.backends, "Backend config JSON")->required();
  s->add_option("--out", attack.out, "Session JSON output")->required();
  s->add_option("--templates", attack.templates, "Template directory");
  s->add_option("--sample-id", attack.sample_id, "Default: the target directory name");
  s->add_option("--setting", attack.setting, "Setting label or slug");
  s->add_option("--method", attack.method);
  attack.images_per_round = s->add_option("--images-per-round", attack.images_per_round_value);
  attack.max_rounds = s->add_option("--max-rounds", attack.max_rounds_value, "Refinement rounds after round 0");
  attack.plateau_epsilon = s->add_option("--plateau-epsilon", attack.plateau_epsilon_value);
  attack.target_similarity = s->add_option("--target-similarity", attack.target_similarity_value);
  s->add_option("--neighbors", attack.retrieval.neighbors)->capture_default_str();
  s->add_option("--modifiers", attack.retrieval.modifiers)->capture_default_str();
  s->add_option("--keywords", attack.retrieval.keywords)->capture_default_str();
  bind(s, [&] { return cmd_attack(attack, g, log); });

  EvaluateArgs evaluate;
  s = app.add_subcommand("evaluate", "Aggregate CLIP and human scores per setting");
  s->add_option("--sessions", evaluate.sessions, "Directory of session JSON files")->required();
  s->add_option("--human", evaluate.human, "Likert CSV");
  s->add_option("--out", evaluate.out, "Report JSON output")->required();
  s->add_option("--methods", evaluate.methods, "Table column order")->delimiter(',');
  bind(s, [&] { return cmd_evaluate(evaluate, out, log); });

  CostArgs cost;
  s = app.add_subcommand("cost", "Estimate the dollar cost of an attack");
  s->add_option("--pricing", cost.pricing, "Pricing JSON")->capture_default_str();
  cost.rounds = s->add_option("--rounds", cost.rounds_value, "Total rounds including round 0");
  s->add_option("--backend", cost.backend)->capture_default_str();
  s->add_option("--session", cost.session, "Price a recorded session instead");
  s->add_option("--out", cost.out, "JSON output");
  s->add_flag("--json", cost.json, "Print JSON instead of text");
  bind(s, [&] { return cmd_cost(cost, out, log); });

  ServeMockArgs serve;
  s = app.add_subcommand("serve-mock", "Serve the mock backend wire contracts until stdin closes");
  s->add_option("--script", serve.script)->required();
  s->add_option("--host", serve.host)->capture_default_str();
  s->add_option("--port", serve.port, "0 picks a free port")->capture_default_str();
  s->add_option("--fail-first", serve.fail_first, "Answer the first N requests with 503")->capture_default_str();
  bind(s, [&] { return cmd_serve_mock(serve, log); });

  MockEmbedArgs embed;
  s = app.add_subcommand("mock-embed-corpus", "Embed record JSONL with the mock embedder for build-bank");
  s->add_option("--in", embed.in, "Record JSONL")->required();
  s->add_option("--script", embed.script, "Mock script")->required();
  s->add_option("--out", embed.out, "Embedded JSONL output")->required();
  bind(s, [&] { return cmd_mock_embed(embed, log); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    log.error("usage", {{"message", e.what()}});
    return kExitUsage;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    log.error("failed", {{"code", to_string(e.code())}, {"message", e.what()}, {"exit", code}});
    return code;
  } catch (const nlohmann::json::exception& e) {
    log.error("failed", {{"code", "ParseError"}, {"message", e.what()}, {"exit", static_cast<int>(kExitData)}});
    return kExitData;
  } catch (const std::exception& e) {
    log.error("failed", {{"message", e.what()}, {"exit", static_cast<int>(kExitData)}});
    return kExitData;
  } catch (...) {
    log.error("failed", {{"message", "unknown exception"}, {"exit", static_cast<int>(kExitData)}});
    return kExitData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace promptrecon::cli
