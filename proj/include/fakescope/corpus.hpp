#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fakescope/classifier.hpp"
#include "fakescope/detection_model.hpp"
#include "fakescope/error.hpp"
#include "fakescope/sampler.hpp"
#include "fakescope/tokenizer.hpp"

namespace fakescope {

struct CorpusDocument {
  std::string id;
  std::string text;
  Label label = Label::real;
  std::string source;
};

struct Corpus {
  std::vector<CorpusDocument> documents;
  /// Free-form description of where the documents came from.
  nlohmann::json provenance = nlohmann::json::object();

  /// Distinct sources carrying `label`, sorted.
  [[nodiscard]] std::vector<std::string> sources(Label label) const {
    std::set<std::string> out;
    for (const auto& d : documents) {
      if (d.label == label) out.insert(d.source);
    }
    return {out.begin(), out.end()};
  }

  void validate() const {
    std::set<std::string_view> ids;
    for (const auto& d : documents) {
      if (d.id.empty()) throw DataError("document with empty id");
      if (!ids.insert(d.id).second) throw DataError("duplicate document id '" + d.id + "'");
      if (d.source.empty()) throw DataError("document '" + d.id + "' has no source");
      if (d.text.find_first_not_of(" \t\r\n") == std::string::npos) throw DataError("document '" + d.id + "' is empty");
    }
  }

  void append(const Corpus& other) {
    documents.insert(documents.end(), other.documents.begin(), other.documents.end());
  }
};

enum class CorpusFormat { jsonl, directory };

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Regular *.txt files below `root`, sorted by path.
inline std::vector<std::filesystem::path> text_files(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace detail

/// One JSON object per line with string fields id, text, label, source.
/// Blank lines are skipped.
inline Corpus read_corpus_jsonl(std::istream& in, const std::string& origin = "<stream>") {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!record.is_object()) throw DataError(where + ": record is not an object");
    CorpusDocument doc;
    for (const char* field : {"id", "text", "label", "source"}) {
      if (!record.contains(field)) throw DataError(where + ": missing field \"" + field + "\"");
      if (!record[field].is_string()) throw DataError(where + ": field \"" + field + "\" must be a string");
    }
    doc.id = record["id"].get<std::string>();
    doc.text = record["text"].get<std::string>();
    try {
      doc.label = parse_label(record["label"].get<std::string>());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    doc.source = record["source"].get<std::string>();
    if (doc.source.empty()) throw DataError(where + ": field \"source\" is empty");
    corpus.documents.push_back(std::move(doc));
  }
  corpus.provenance = {{"format", "jsonl"}, {"path", origin}};
  corpus.validate();
  return corpus;
}

/// Layout `<root>/<label>/<source>/**.txt`; ids are paths relative to root
/// without the extension.
inline Corpus read_corpus_directory(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw DataError("'" + root.string() + "' is not a directory");
  Corpus corpus;
  for (const auto& file : detail::text_files(root)) {
    const auto relative = std::filesystem::relative(file, root);
    std::vector<std::string> parts;
    for (const auto& part : relative) parts.push_back(part.string());
    if (parts.size() < 3) {
      throw DataError("'" + relative.string() + "' is not under <label>/<source>/");
    }
    CorpusDocument doc;
    doc.label = parse_label(parts[0]);
    doc.source = parts[1];
    doc.id = (relative.parent_path() / relative.stem()).generic_string();
    doc.text = detail::read_file(file);
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw DataError("no .txt documents under '" + root.string() + "'");
  corpus.provenance = {{"format", "directory"}, {"path", root.generic_string()}};
  corpus.validate();
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw DataError("corpus '" + path.string() + "' does not exist");
  if (format == CorpusFormat::directory) return read_corpus_directory(path);
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return read_corpus_jsonl(in, path.string());
}

/// Directories load as directory corpora, files as JSONL.
inline Corpus load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, std::filesystem::is_directory(path) ? CorpusFormat::directory : CorpusFormat::jsonl);
}

inline void write_corpus_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.documents) {
    nlohmann::json record = {{"id", d.id}, {"text", d.text}, {"label", to_string(d.label)}, {"source", d.source}};
    out << record.dump() << '\n';
  }
}

/// Splits every document into consecutive chunks of exactly
/// `tokens_per_doc` tokens (a shorter tail is dropped) and keeps at most
/// `max_per_source` chunks per source, in document order. Chunk text is the
/// source substring spanning its tokens.
inline Corpus chunk_corpus(const Corpus& corpus, std::size_t tokens_per_doc, std::size_t max_per_source = 0) {
  if (tokens_per_doc < 1) throw ParameterError("chunk length must be >= 1");
  Corpus out;
  out.provenance = corpus.provenance;
  out.provenance["chunk_tokens"] = tokens_per_doc;
  if (max_per_source > 0) out.provenance["max_per_source"] = max_per_source;
  std::map<std::string, std::size_t> taken;
  for (const auto& doc : corpus.documents) {
    auto& count = taken[doc.source];
    if (max_per_source > 0 && count >= max_per_source) continue;
    const auto tokens = tokenize(doc.text, false);
    for (std::size_t begin = 0, part = 0; begin + tokens_per_doc <= tokens.size(); begin += tokens_per_doc, ++part) {
      if (max_per_source > 0 && count >= max_per_source) break;
      const std::size_t start = tokens[begin].start;
      const std::size_t end = tokens[begin + tokens_per_doc - 1].end;
      out.documents.push_back({doc.id + "#" + std::to_string(part), doc.text.substr(start, end - start), doc.label,
                               doc.source});
      ++count;
    }
  }
  out.validate();
  return out;
}

/// Token sequences for language-model training: every blank-line separated
/// paragraph of every input becomes one sequence. `path` may be a text
/// file, a directory of *.txt files or a JSONL corpus (only `real`
/// documents are used).
inline std::vector<std::vector<std::string>> read_training_sequences(const std::filesystem::path& path,
                                                                     bool case_fold = true) {
  std::vector<std::string> texts;
  if (std::filesystem::is_directory(path)) {
    for (const auto& file : detail::text_files(path)) texts.push_back(detail::read_file(file));
  } else if (path.extension() == ".jsonl") {
    for (auto& d : load_corpus(path, CorpusFormat::jsonl).documents) {
      if (d.label == Label::real) texts.push_back(std::move(d.text));
    }
  } else {
    if (!std::filesystem::exists(path)) throw DataError("training corpus '" + path.string() + "' does not exist");
    texts.push_back(detail::read_file(path));
  }
  std::vector<std::vector<std::string>> sequences;
  for (const auto& text : texts) {
    std::istringstream lines(text);
    std::string line;
    std::string paragraph;
    auto flush = [&] {
      auto words = split_words(paragraph, case_fold);
      if (!words.empty()) sequences.push_back(std::move(words));
      paragraph.clear();
    };
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) {
        flush();
      } else {
        paragraph += line;
        paragraph += '\n';
      }
    }
    flush();
  }
  if (sequences.empty()) throw DataError("empty training corpus");
  return sequences;
}

// ---------------------------------------------------------------------------
// Generated sources
// ---------------------------------------------------------------------------

struct SamplerConfig {
  double temperature = 1.0;
  std::size_t top_k = 0;

  /// "gen-t0.7", "gen-k40", "gen-t0.7-k40"; plain "gen" for T=1, k=0.
  [[nodiscard]] std::string source_id() const {
    std::string id = "gen";
    if (temperature != 1.0) {
      char buffer[32];
      auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, temperature);
      id += "-t" + std::string(buffer, end);
    }
    if (top_k > 0) id += "-k" + std::to_string(top_k);
    return id;
  }
};

struct FakeSourceOptions {
  std::size_t n_docs = 50;
  std::size_t doc_len = 200;
  std::vector<SamplerConfig> configs{{0.7, 0}, {1.0, 40}};
  std::uint64_t random_seed = 1;
};

/// Stateless 64-bit mix used to derive per-document generator seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// `n_docs` sampled documents per sampler configuration, each
/// configuration its own source. Generation never emits the reserved
/// tokens. `seeds`, when given, are prompts cycled across documents; the
/// prompt itself is not part of the document text.
inline Corpus build_fake_sources(const DetectionModel& model, const std::vector<std::vector<TokenId>>& seeds,
                                 const FakeSourceOptions& options = {}) {
  if (options.configs.empty()) throw ParameterError("no sampler configurations");
  const auto& vocabulary = model.vocabulary();
  Corpus corpus;
  corpus.provenance = {{"generator", model.name()},
                       {"n_docs", options.n_docs},
                       {"doc_len", options.doc_len},
                       {"random_seed", options.random_seed}};
  for (std::size_t c = 0; c < options.configs.size(); ++c) {
    const auto& config = options.configs[c];
    const std::string source = config.source_id();
    for (std::size_t i = 0; i < options.n_docs; ++i) {
      SampleOptions sample_options;
      sample_options.temperature = config.temperature;
      sample_options.top_k = config.top_k;
      sample_options.random_seed = splitmix64(options.random_seed ^ splitmix64((c << 32) ^ i));
      sample_options.banned = {vocabulary.unk_id(), vocabulary.bos_id(), vocabulary.eos_id()};
      const std::vector<TokenId> empty;
      const auto& seed = seeds.empty() ? empty : seeds[i % seeds.size()];
      const auto ids = sample(model, seed, options.doc_len, sample_options);
      std::vector<std::string> words;
      words.reserve(ids.size());
      for (TokenId id : ids) words.push_back(vocabulary.token(id));
      char index[16];
      std::snprintf(index, sizeof index, "%03zu", i);
      corpus.documents.push_back({source + "-" + index, detokenize(words), Label::fake, source});
    }
  }
  corpus.validate();
  return corpus;
}

}  // namespace fakescope
