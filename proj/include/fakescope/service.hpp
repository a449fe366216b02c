#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "fakescope/annotation.hpp"
#include "fakescope/detection_model.hpp"
#include "fakescope/error.hpp"
#include "fakescope/remote_model.hpp"
#include "fakescope/scoring.hpp"

namespace fakescope {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kDefaultMaxTextBytes = 50'000;

/// Request named a model that is not registered.
class UnknownModel : public Error {
 public:
  UnknownModel(const std::string& name, std::vector<std::string> available)
      : Error("unknown model '" + name + "'"), available_(std::move(available)) {}
  [[nodiscard]] const std::vector<std::string>& available() const { return available_; }

 private:
  std::vector<std::string> available_;
};

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// Named detection models shared read-only across requests.
class ModelRegistry {
 public:
  /// Registers or replaces `name`. The first model added is the default.
  void add(std::string name, std::shared_ptr<const DetectionModel> model) {
    if (name.empty()) throw ParameterError("model name must not be empty");
    if (!model) throw ParameterError("null model");
    std::unique_lock lock(mutex_);
    if (models_.empty()) default_ = name;
    models_[std::move(name)] = std::move(model);
  }

  [[nodiscard]] std::shared_ptr<const DetectionModel> find(std::string_view name) const {
    std::shared_lock lock(mutex_);
    auto it = models_.find(name);
    return it == models_.end() ? nullptr : it->second;
  }

  /// Looks up `name`, or the default model when `name` is empty.
  [[nodiscard]] std::shared_ptr<const DetectionModel> resolve(std::string_view name) const {
    std::shared_lock lock(mutex_);
    const std::string key(name.empty() ? std::string_view(default_) : name);
    auto it = models_.find(key);
    if (it == models_.end()) {
      std::vector<std::string> available;
      for (const auto& [n, m] : models_) available.push_back(n);
      throw UnknownModel(key, std::move(available));
    }
    return it->second;
  }

  [[nodiscard]] std::vector<std::string> names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [n, m] : models_) out.push_back(n);
    return out;
  }

  [[nodiscard]] std::string default_name() const {
    std::shared_lock lock(mutex_);
    return default_;
  }

  /// One entry per model, sorted by name.
  [[nodiscard]] nlohmann::json describe() const {
    std::shared_lock lock(mutex_);
    auto out = nlohmann::json::array();
    for (const auto& [name, model] : models_) {
      out.push_back({{"name", name},
                     {"kind", model->kind()},
                     {"capabilities",
                      {{"causal", model->supports(ScoringMode::Kind::causal)},
                       {"masked", model->supports(ScoringMode::Kind::masked)}}},
                     {"vocab_size", model->vocabulary().size()},
                     {"case_folded", model->case_folded()},
                     {"default", name == default_}});
    }
    return out;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const DetectionModel>, std::less<>> models_;
  std::string default_;
};

// ---------------------------------------------------------------------------
// Request / response schema
// ---------------------------------------------------------------------------

struct AnalyzeRequest {
  std::string text;
  /// Empty selects the registry default.
  std::string model;
  ScoringMode mode;
  std::optional<BucketScheme> scheme;
};

/// Validates a JSON request body. Every violation is a ParameterError.
inline AnalyzeRequest parse_analyze_request(const nlohmann::json& body,
                                            std::size_t max_text_bytes = kDefaultMaxTextBytes) {
  if (!body.is_object()) throw ParameterError("request body must be a JSON object");
  AnalyzeRequest request;
  if (!body.contains("text") || !body["text"].is_string()) throw ParameterError("\"text\" must be a string");
  request.text = body["text"].get<std::string>();
  if (request.text.size() > max_text_bytes) {
    throw ParameterError("text is " + std::to_string(request.text.size()) + " bytes; limit is " +
                         std::to_string(max_text_bytes));
  }
  if (body.contains("model")) {
    if (!body["model"].is_string()) throw ParameterError("\"model\" must be a string");
    request.model = body["model"].get<std::string>();
  }
  int window = 30;
  if (body.contains("window")) {
    if (!body["window"].is_number_integer()) throw ParameterError("\"window\" must be an integer");
    window = body["window"].get<int>();
  }
  if (body.contains("mode")) {
    if (!body["mode"].is_string()) throw ParameterError("\"mode\" must be a string");
    const auto kind = parse_scoring_kind(body["mode"].get<std::string>());
    request.mode = kind == ScoringMode::Kind::masked ? ScoringMode::masked(window) : ScoringMode::causal();
  }
  if (body.contains("scheme") && !body["scheme"].is_null()) {
    const auto& s = body["scheme"];
    if (!s.is_object() || !s.contains("thresholds") || !s["thresholds"].is_array()) {
      throw ParameterError("\"scheme\" must be an object with a \"thresholds\" array");
    }
    std::vector<std::size_t> thresholds;
    for (const auto& t : s["thresholds"]) {
      if (!t.is_number_integer() || t.get<long long>() < 1) throw ParameterError("thresholds must be positive integers");
      thresholds.push_back(t.get<std::size_t>());
    }
    auto scheme = BucketScheme::with_thresholds(std::move(thresholds));
    if (s.contains("colors")) {
      if (!s["colors"].is_array()) throw ParameterError("\"colors\" must be an array of strings");
      scheme.colors.clear();
      for (const auto& c : s["colors"]) {
        if (!c.is_string()) throw ParameterError("\"colors\" must be an array of strings");
        scheme.colors.push_back(c.get<std::string>());
      }
      scheme.validate();
    }
    request.scheme = std::move(scheme);
  }
  return request;
}

inline nlohmann::json to_json(const Prediction& p) { return nlohmann::json::array({p.token, p.prob}); }

inline nlohmann::json to_json(const BucketScheme& scheme) {
  return {{"thresholds", scheme.thresholds}, {"colors", scheme.colors}};
}

inline nlohmann::json to_json(const HistogramSet& h) {
  return {{"buckets", h.bucket_counts},
          {"frac_prob", h.fracp_hist},
          {"entropy", h.entropy_hist},
          {"entropy_max", h.entropy_max}};
}

/// The AnalyzeResponse body shared by the HTTP API and `score --json`.
inline nlohmann::json analysis_to_json(const AnnotatedDocument& doc, const DetectionModel& model,
                                       const std::vector<std::string>& warnings = {}) {
  const auto& scored = doc.scored;
  auto tokens = nlohmann::json::array();
  for (const auto& t : scored.tokens) {
    tokens.push_back(
        {{"text", scored.text.substr(t.start, t.end - t.start)}, {"norm", t.text}, {"start", t.start}, {"end", t.end}});
  }
  auto scores = nlohmann::json::array();
  for (std::size_t i = 0; i < scored.scores.size(); ++i) {
    const auto& s = scored.scores[i];
    auto top5 = nlohmann::json::array();
    for (const auto& p : s.top5) top5.push_back(to_json(p));
    scores.push_back({{"prob", s.prob},
                      {"rank", s.rank},
                      {"frac_prob", s.frac_prob},
                      {"entropy", s.entropy},
                      {"bucket", doc.buckets[i]},
                      {"unknown", s.unknown},
                      {"top5", std::move(top5)}});
  }
  nlohmann::json mode = {{"kind", to_string(scored.mode.kind)}};
  if (scored.mode.kind == ScoringMode::Kind::masked) mode["window"] = scored.mode.window;
  return {{"schema_version", kSchemaVersion},
          {"model",
           {{"name", scored.model_name},
            {"kind", model.kind()},
            {"vocab_size", scored.vocab_size},
            {"case_folded", model.case_folded()}}},
          {"mode", std::move(mode)},
          {"scheme", to_json(doc.scheme)},
          {"tokens", std::move(tokens)},
          {"scores", std::move(scores)},
          {"histograms", to_json(doc.histograms)},
          {"warnings", warnings}};
}

/// Scores and annotates `request.text` with `model`.
inline nlohmann::json analyze(const DetectionModel& model, const AnalyzeRequest& request) {
  std::vector<std::string> warnings;
  auto scored = score_document(model, request.text, request.mode, &warnings);
  std::sort(warnings.begin(), warnings.end());
  warnings.erase(std::unique(warnings.begin(), warnings.end()), warnings.end());
  const auto annotated = annotate(std::move(scored), request.scheme.value_or(BucketScheme{}));
  return analysis_to_json(annotated, model, warnings);
}

inline nlohmann::json analyze(const ModelRegistry& registry, const AnalyzeRequest& request) {
  const auto model = registry.resolve(request.model);
  return analyze(*model, request);
}

/// Rebuilds the scored document carried by an AnalyzeResponse.
inline ScoredDocument scored_document_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw DataError("unsupported schema_version " + j.at("schema_version").dump());
    }
    ScoredDocument doc;
    doc.model_name = j.at("model").at("name").get<std::string>();
    doc.vocab_size = j.at("model").at("vocab_size").get<std::size_t>();
    const auto& mode = j.at("mode");
    doc.mode = parse_scoring_kind(mode.at("kind").get<std::string>()) == ScoringMode::Kind::masked
                   ? ScoringMode::masked(mode.at("window").get<int>())
                   : ScoringMode::causal();
    const auto& tokens = j.at("tokens");
    const auto& scores = j.at("scores");
    if (tokens.size() != scores.size()) throw DataError("tokens and scores differ in length");
    for (const auto& t : tokens) {
      doc.tokens.push_back({t.at("norm").get<std::string>(), t.at("start").get<std::size_t>(),
                            t.at("end").get<std::size_t>()});
    }
    for (const auto& s : scores) {
      TokenScore score;
      score.prob = s.at("prob").get<double>();
      score.rank = s.at("rank").get<std::size_t>();
      score.frac_prob = s.at("frac_prob").get<double>();
      score.entropy = s.at("entropy").get<double>();
      score.unknown = s.at("unknown").get<bool>();
      for (const auto& p : s.at("top5")) score.top5.push_back({p.at(0).get<std::string>(), p.at(1).get<double>()});
      if (score.rank < 1) throw DataError("rank must be >= 1");
      doc.scores.push_back(std::move(score));
    }
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed analysis JSON: ") + e.what());
  } catch (const ParameterError& e) {
    throw DataError(std::string("malformed analysis JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

struct ServiceConfig {
  std::size_t max_text_bytes = kDefaultMaxTextBytes;
  /// Value of Access-Control-Allow-Origin.
  std::string cors_origin = "*";
  /// Served at "/" when non-empty.
  std::filesystem::path static_dir;
  /// Enables POST /api/models for registering external adapters.
  bool allow_registration = false;
  std::chrono::milliseconds adapter_timeout{10'000};
};

/// HTTP status for an error raised while handling a request.
inline int http_status(const std::exception& error) {
  if (dynamic_cast<const UnknownModel*>(&error)) return 404;
  if (dynamic_cast<const AdapterTimeout*>(&error)) return 504;
  if (dynamic_cast<const AdapterProtocolError*>(&error)) return 502;
  if (dynamic_cast<const CapabilityError*>(&error)) return 400;
  if (dynamic_cast<const ParameterError*>(&error) || dynamic_cast<const DataError*>(&error)) return 400;
  return 500;
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const std::exception& error) {
  nlohmann::json body = {{"error", error.what()}};
  if (const auto* unknown = dynamic_cast<const UnknownModel*>(&error)) body["models"] = unknown->available();
  send_json(res, http_status(error), body);
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error&) {
    throw ParameterError("request body is not valid JSON");
  }
}

}  // namespace detail

/// Installs /api/analyze, /api/models, CORS handling and the optional
/// static mount on `server`. `registry` must outlive the server.
inline void install_routes(httplib::Server& server, ModelRegistry& registry, const ServiceConfig& config = {}) {
  server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.set_payload_max_length(config.max_text_bytes * 8 + 65'536);

  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/api/analyze", [&registry, config](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto request = parse_analyze_request(detail::parse_body(req), config.max_text_bytes);
      detail::send_json(res, 200, analyze(registry, request));
    } catch (const std::exception& e) {
      detail::send_error(res, e);
    }
  });

  server.Get("/api/models", [&registry](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, {{"models", registry.describe()}});
  });

  if (config.allow_registration) {
    server.Post("/api/models", [&registry, config](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto body = detail::parse_body(req);
        if (!body.is_object() || !body.contains("url") || !body["url"].is_string()) {
          throw ParameterError("\"url\" must be a string");
        }
        RemoteOptions options;
        options.timeout = config.adapter_timeout;
        if (body.contains("timeout_ms")) {
          if (!body["timeout_ms"].is_number_integer() || body["timeout_ms"].get<long long>() < 1) {
            throw ParameterError("\"timeout_ms\" must be a positive integer");
          }
          options.timeout = std::chrono::milliseconds(body["timeout_ms"].get<long long>());
        }
        auto model = std::make_shared<RemoteModel>(body["url"].get<std::string>(), options);
        const std::string name = body.contains("name") && body["name"].is_string() ? body["name"].get<std::string>()
                                                                                     : model->name();
        registry.add(name, std::move(model));
        detail::send_json(res, 201, {{"models", registry.describe()}});
      } catch (const std::exception& e) {
        detail::send_error(res, e);
      }
    });
  }

  if (!config.static_dir.empty() && !server.set_mount_point("/", config.static_dir.string())) {
    throw ParameterError("static directory '" + config.static_dir.string() + "' does not exist");
  }
}

/// Splits "host:port". A bare port binds every interface.
inline std::pair<std::string, int> parse_address(std::string_view addr) {
  const auto colon = addr.rfind(':');
  std::string host = colon == std::string_view::npos ? "0.0.0.0" : std::string(addr.substr(0, colon));
  const auto port_text = colon == std::string_view::npos ? addr : addr.substr(colon + 1);
  int port = -1;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
    throw ParameterError("invalid address '" + std::string(addr) + "' (expected host:port)");
  }
  if (host.empty()) host = "0.0.0.0";
  return {host, port};
}

}  // namespace fakescope
