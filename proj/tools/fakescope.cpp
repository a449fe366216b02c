// fakescope command-line interface.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fakescope/fakescope.hpp"

namespace fs = fakescope;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream buffer;
    buffer << std::cin.rdbuf();
    return buffer.str();
  }
  return fs::detail::read_file(path);
}

/// Writes `content` to `path`, or stdout for "-".
void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fs::DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw fs::DataError("failed writing '" + path + "'");
}

fs::ScoringMode make_mode(const std::string& mode, int window) {
  return fs::parse_scoring_kind(mode) == fs::ScoringMode::Kind::masked ? fs::ScoringMode::masked(window)
                                                                       : fs::ScoringMode::causal();
}

std::shared_ptr<const fs::DetectionModel> open_model(const std::string& model_path, const std::string& adapter,
                                                     int timeout_ms) {
  if (!adapter.empty()) {
    return std::make_shared<fs::RemoteModel>(adapter, fs::RemoteOptions{std::chrono::milliseconds(timeout_ms)});
  }
  if (model_path.empty()) throw fs::ParameterError("one of --model or --adapter is required");
  return std::make_shared<fs::NGramModel>(fs::load_model(model_path));
}

/// One AnalyzeResponse per line, or a single JSON document.
std::vector<fs::ScoredDocument> read_scored(const std::string& path) {
  const std::string content = read_input(path);
  std::vector<fs::ScoredDocument> docs;
  std::istringstream lines(content);
  std::string line;
  std::size_t line_no = 0;
  bool single = false;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      single = true;
      break;
    }
    try {
      docs.push_back(fs::scored_document_from_json(j));
    } catch (const fs::DataError& e) {
      throw fs::DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (single) {
    docs.clear();
    try {
      docs.push_back(fs::scored_document_from_json(nlohmann::json::parse(content)));
    } catch (const nlohmann::json::parse_error& e) {
      throw fs::DataError(path + ": invalid JSON (" + e.what() + ")");
    }
  }
  if (docs.empty()) throw fs::DataError(path + ": no scored documents");
  return docs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fakescope: token-statistics detector for generated text"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train the built-in Kneser-Ney n-gram model");
  std::string train_corpus;
  std::string train_out;
  fs::NGramOptions ngram;
  bool keep_case = false;
  train->add_option("--corpus", train_corpus, "Text file, directory of .txt files, or JSONL corpus")->required();
  train->add_option("--order", ngram.order, "N-gram order")->capture_default_str();
  train->add_option("--discount", ngram.discount, "Absolute discount")->capture_default_str();
  train->add_option("--min-count", ngram.min_count, "Word frequency below which a word maps to <unk>")
      ->capture_default_str();
  train->add_flag("--keep-case", keep_case, "Do not lower-case text");
  train->add_option("--out", train_out, "Model file")->required();

  // score
  auto* score = app.add_subcommand("score", "Score one document and emit the analysis JSON");
  std::string score_model, score_adapter, score_in = "-", score_json = "-", score_mode = "causal";
  int score_window = 30;
  int timeout_ms = 10'000;
  std::vector<std::size_t> score_thresholds;
  score->add_option("--model", score_model, "Model file");
  score->add_option("--adapter", score_adapter, "External adapter base URL");
  score->add_option("--timeout-ms", timeout_ms, "Adapter timeout")->capture_default_str();
  score->add_option("--in", score_in, "Input text file ('-' for stdin)")->capture_default_str();
  score->add_option("--json", score_json, "Output file ('-' for stdout)")->capture_default_str();
  score->add_option("--mode", score_mode, "causal or masked")->capture_default_str();
  score->add_option("--window", score_window, "Context tokens per side in masked mode")->capture_default_str();
  score->add_option("--thresholds", score_thresholds, "Bucket thresholds")->delimiter(',');

  // generate
  auto* generate = app.add_subcommand("generate", "Sample documents from a model as a JSONL corpus");
  std::string gen_model, gen_out = "-", gen_source;
  std::size_t gen_n = 50, gen_len = 200, gen_top_k = 0;
  double gen_temperature = 1.0;
  std::uint64_t gen_seed = 1;
  generate->add_option("--model", gen_model, "Model file")->required();
  generate->add_option("--n", gen_n, "Number of documents")->capture_default_str();
  generate->add_option("--len", gen_len, "Tokens per document")->capture_default_str();
  generate->add_option("--temperature", gen_temperature, "Sampling temperature")->capture_default_str();
  generate->add_option("--top-k", gen_top_k, "Top-k truncation (0 = none)")->capture_default_str();
  generate->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  generate->add_option("--source", gen_source, "Source id (default derived from the sampler settings)");
  generate->add_option("--out", gen_out, "Output JSONL ('-' for stdout)")->capture_default_str();

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Cross-validated detector comparison");
  std::vector<std::string> exp_corpora;
  std::string exp_model, exp_report = "-", exp_csv;
  std::size_t exp_chunk = 0, exp_max_docs = 0, exp_fake_n = 0, exp_fake_len = 200;
  std::uint64_t exp_seed = 1;
  unsigned exp_threads = 0;
  experiment->add_option("--corpus", exp_corpora, "JSONL corpus or <label>/<source>/ directory (repeatable)")
      ->required();
  experiment->add_option("--model", exp_model, "Detection model file")->required();
  experiment->add_option("--report", exp_report, "Report JSON ('-' for stdout)")->capture_default_str();
  experiment->add_option("--ranks-csv", exp_csv, "Per-source rank distribution CSV");
  experiment->add_option("--chunk-tokens", exp_chunk, "Split real documents into chunks of this many tokens");
  experiment->add_option("--max-docs", exp_max_docs, "Keep at most this many chunks per real source");
  experiment->add_option("--generate", exp_fake_n,
                         "Add the default generated sources with this many documents each (0 = none)");
  experiment->add_option("--gen-len", exp_fake_len, "Tokens per generated document")->capture_default_str();
  experiment->add_option("--seed", exp_seed, "Random seed for generated sources")->capture_default_str();
  experiment->add_option("--threads", exp_threads, "Scoring threads (0 = all cores)");

  // kde
  auto* kde = app.add_subcommand("kde", "Density of (entropy, log10 rank) over scored documents");
  std::string kde_in, kde_out = "-";
  std::size_t kde_nx = 100, kde_ny = 100;
  kde->add_option("--scored", kde_in, "Analysis JSON, one per line")->required();
  kde->add_option("--out", kde_out, "Grid CSV ('-' for stdout)")->capture_default_str();
  kde->add_option("--nx", kde_nx, "Entropy grid points")->capture_default_str();
  kde->add_option("--ny", kde_ny, "log10 rank grid points")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP analysis service");
  std::string serve_addr = "127.0.0.1:8080";
  std::vector<std::string> serve_models, serve_adapters;
  fs::ServiceConfig config;
  std::string static_dir;
  serve->add_option("--addr", serve_addr, "host:port")->envname("FAKESCOPE_ADDR")->capture_default_str();
  serve->add_option("--model", serve_models, "Model file (repeatable)");
  serve->add_option("--adapter", serve_adapters, "External adapter base URL (repeatable)");
  serve->add_option("--static-dir", static_dir, "Directory served at /");
  serve->add_option("--cors-origin", config.cors_origin, "Allowed CORS origin")->capture_default_str();
  serve->add_option("--max-bytes", config.max_text_bytes, "Request text limit")->capture_default_str();
  serve->add_option("--timeout-ms", timeout_ms, "Adapter timeout")->capture_default_str();
  serve->add_flag("--allow-register", config.allow_registration, "Enable POST /api/models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) {
      ngram.case_fold = !keep_case;
      const auto sequences = fs::read_training_sequences(train_corpus, ngram.case_fold);
      const auto model = fs::train_ngram(sequences, ngram);
      fs::save_model(model, std::filesystem::path(train_out));
      std::cerr << "trained " << model.name() << " on " << sequences.size() << " sequences, vocabulary "
                << model.vocabulary().size() << '\n';
    } else if (*score) {
      const auto model = open_model(score_model, score_adapter, timeout_ms);
      fs::AnalyzeRequest request;
      request.text = read_input(score_in);
      request.mode = make_mode(score_mode, score_window);
      if (!score_thresholds.empty()) request.scheme = fs::BucketScheme::with_thresholds(score_thresholds);
      write_output(score_json, fs::analyze(*model, request).dump() + "\n");
    } else if (*generate) {
      const auto model = fs::load_model(gen_model);
      fs::FakeSourceOptions options;
      options.n_docs = gen_n;
      options.doc_len = gen_len;
      options.configs = {{gen_temperature, gen_top_k}};
      options.random_seed = gen_seed;
      auto corpus = fs::build_fake_sources(model, {}, options);
      if (!gen_source.empty()) {
        const std::string derived = options.configs.front().source_id();
        for (auto& d : corpus.documents) {
          d.id = gen_source + d.id.substr(derived.size());
          d.source = gen_source;
        }
      }
      std::ostringstream out;
      fs::write_corpus_jsonl(out, corpus);
      write_output(gen_out, out.str());
    } else if (*experiment) {
      const auto model = fs::load_model(exp_model);
      fs::Corpus real;
      fs::Corpus fake;
      for (const auto& path : exp_corpora) {
        for (auto& d : fs::load_corpus(path).documents) {
          (d.label == fs::Label::real ? real : fake).documents.push_back(std::move(d));
        }
      }
      if (exp_chunk > 0) real = fs::chunk_corpus(real, exp_chunk, exp_max_docs);
      fs::Corpus corpus = real;
      corpus.append(fake);
      if (exp_fake_n > 0) {
        fs::FakeSourceOptions options;
        options.n_docs = exp_fake_n;
        options.doc_len = exp_fake_len;
        options.random_seed = exp_seed;
        corpus.append(fs::build_fake_sources(model, {}, options));
      }
      corpus.validate();
      fs::ExperimentOptions options;
      options.threads = exp_threads;
      const auto report = fs::run_table1(corpus, model, options);
      write_output(exp_report, fs::to_json(report).dump(2) + "\n");
      if (!exp_csv.empty()) {
        std::ostringstream csv;
        fs::write_csv(csv, report.rank_distributions, report.scheme);
        write_output(exp_csv, csv.str());
      }
      fs::write_table(std::cerr, report);
    } else if (*kde) {
      const auto docs = read_scored(kde_in);
      std::vector<const fs::ScoredDocument*> pointers;
      for (const auto& d : docs) pointers.push_back(&d);
      const auto points = fs::entropy_rank_points(pointers);
      const auto bandwidths = fs::scott_bandwidths(points);
      const auto grid = fs::kde2d(points, bandwidths, fs::covering_grid(points, bandwidths, kde_nx, kde_ny));
      std::ostringstream csv;
      fs::write_csv(csv, grid);
      write_output(kde_out, csv.str());
    } else if (*serve) {
      fs::ModelRegistry registry;
      for (const auto& path : serve_models) {
        auto model = std::make_shared<fs::NGramModel>(fs::load_model(path));
        const std::string name = std::filesystem::path(path).stem().string();
        registry.add(name, std::move(model));
      }
      for (const auto& url : serve_adapters) {
        auto model = std::make_shared<fs::RemoteModel>(url, fs::RemoteOptions{std::chrono::milliseconds(timeout_ms)});
        const std::string name = model->name();
        registry.add(name, std::move(model));
      }
      config.static_dir = static_dir;
      config.adapter_timeout = std::chrono::milliseconds(timeout_ms);
      httplib::Server server;
      fs::install_routes(server, registry, config);
      const auto [host, port] = fs::parse_address(serve_addr);
      if (!server.bind_to_port(host, port)) throw fs::ParameterError("cannot bind " + serve_addr);
      std::cerr << "listening on " << host << ':' << port << '\n';
      server.listen_after_bind();
    }
  } catch (const fs::ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::ModelError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
