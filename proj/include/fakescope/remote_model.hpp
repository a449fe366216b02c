#pragma once

#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "fakescope/detection_model.hpp"
#include "fakescope/distribution.hpp"
#include "fakescope/error.hpp"
#include "fakescope/scoring.hpp"

namespace fakescope {

// Wire protocol spoken by external model adapters.
//
//   GET  /v1/info   -> {"name": str, "vocab": [str...], "causal": bool,
//                       "masked": bool, "case_folded": bool}
//   POST /v1/score  <- {"context": [str...], "mode": "causal"|"masked",
//                       "window": int}
//                   -> {"probs": {token: prob}, "top5": [[token, prob]...]}
//
// In masked mode the context holds up to `window` tokens on each side of
// the target, with the target replaced by kMaskToken.

inline constexpr std::string_view kMaskToken = "<mask>";

struct RemoteOptions {
  std::chrono::milliseconds timeout{10'000};
};

struct RemoteResult {
  Distribution distribution;
  std::vector<Prediction> top5;
  std::vector<std::string> warnings;
};

class RemoteModel final : public DetectionModel {
 public:
  /// `base_url` is scheme://host:port. Fetches the adapter's declared
  /// vocabulary and capabilities.
  explicit RemoteModel(std::string base_url, RemoteOptions options = {})
      : base_url_(std::move(base_url)), options_(options) {
    const auto info = request("GET", "/v1/info", "");
    try {
      name_ = info.value("name", std::string("external"));
      declared_ = info.at("vocab").get<std::vector<std::string>>();
      causal_ = info.value("causal", true);
      masked_ = info.value("masked", false);
      case_folded_ = info.value("case_folded", false);
      vocabulary_ = Vocabulary(declared_);
    } catch (const nlohmann::json::exception& e) {
      throw AdapterProtocolError("malformed adapter info: " + std::string(e.what()));
    } catch (const ParameterError& e) {
      throw AdapterProtocolError("malformed adapter vocabulary: " + std::string(e.what()));
    }
  }

  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] std::string kind() const override { return "external"; }
  [[nodiscard]] const Vocabulary& vocabulary() const override { return vocabulary_; }
  [[nodiscard]] bool supports(ScoringMode::Kind kind) const override {
    return kind == ScoringMode::Kind::causal ? causal_ : masked_;
  }
  [[nodiscard]] bool case_folded() const override { return case_folded_; }
  [[nodiscard]] const std::string& url() const { return base_url_; }

  /// Asks the adapter for the distribution at the position described by
  /// `context`, projected onto the declared vocabulary.
  [[nodiscard]] RemoteResult remote_distribution(const std::vector<std::string>& context, const ScoringMode& mode) const {
    if (!supports(mode.kind)) {
      throw CapabilityError("adapter '" + name_ + "' does not support " + std::string(to_string(mode.kind)) + " mode");
    }
    nlohmann::json body = {{"context", context}, {"mode", to_string(mode.kind)}, {"window", mode.window}};
    const auto response = request("POST", "/v1/score", body.dump());
    return parse_response(response);
  }

  [[nodiscard]] Distribution predict(std::span<const TokenId> before, std::span<const TokenId> after,
                                     const ScoringMode& mode,
                                     std::vector<std::string>* warnings = nullptr) const override {
    std::vector<std::string> context;
    if (mode.kind == ScoringMode::Kind::causal) {
      for (TokenId id : before) context.push_back(vocabulary_.token(id));
    } else {
      const auto window = static_cast<std::size_t>(std::max(mode.window, 1));
      for (TokenId id : before.last(std::min(window, before.size()))) context.push_back(vocabulary_.token(id));
      context.emplace_back(kMaskToken);
      for (TokenId id : after.first(std::min(window, after.size()))) context.push_back(vocabulary_.token(id));
    }
    auto result = remote_distribution(context, mode);
    if (warnings != nullptr) warnings->insert(warnings->end(), result.warnings.begin(), result.warnings.end());
    return std::move(result.distribution);
  }

 private:
  nlohmann::json request(const std::string& method, const std::string& path, const std::string& body) const {
    httplib::Client client(base_url_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    const auto started = std::chrono::steady_clock::now();
    auto result = method == "GET" ? client.Get(path) : client.Post(path, body, "application/json");
    if (!result) {
      const auto elapsed = std::chrono::steady_clock::now() - started;
      const auto error = result.error();
      if (error == httplib::Error::ConnectionTimeout ||
          (error == httplib::Error::Read && elapsed >= options_.timeout * 9 / 10)) {
        throw AdapterTimeout("adapter at " + base_url_ + " timed out after " +
                             std::to_string(options_.timeout.count()) + " ms");
      }
      throw AdapterProtocolError("adapter at " + base_url_ + " failed: " + httplib::to_string(error));
    }
    if (result->status != 200) {
      throw AdapterProtocolError("adapter returned HTTP " + std::to_string(result->status) + " for " + path);
    }
    try {
      return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::parse_error&) {
      throw AdapterProtocolError("malformed response: body is not JSON");
    }
  }

  RemoteResult parse_response(const nlohmann::json& response) const {
    if (!response.is_object() || !response.contains("probs") || !response["probs"].is_object()) {
      throw AdapterProtocolError("malformed response: missing \"probs\" object");
    }
    std::vector<double> probs(vocabulary_.size(), 0.0);
    double total = 0.0;
    for (const auto& [token, value] : response["probs"].items()) {
      if (!value.is_number()) throw AdapterProtocolError("malformed response: probability for '" + token + "' is not a number");
      const double p = value.get<double>();
      if (!std::isfinite(p) || p < 0.0) throw AdapterProtocolError("malformed response: invalid probability for '" + token + "'");
      const auto id = vocabulary_.find(token);
      if (!id) throw VocabularyMismatch("adapter returned token '" + token + "' outside its declared vocabulary");
      probs[static_cast<std::size_t>(*id)] += p;
      total += p;
    }
    if (!(total > 0.0)) throw AdapterProtocolError("malformed response: probabilities sum to zero");

    RemoteResult result;
    if (std::abs(total - 1.0) > 1e-9) {
      result.warnings.push_back("adapter probabilities summed to " + std::to_string(total) + "; renormalized");
    }
    result.distribution = Distribution(std::move(probs));

    if (response.contains("top5")) {
      const auto& top = response["top5"];
      if (!top.is_array() || top.size() > kTopPredictions) throw AdapterProtocolError("malformed response: bad \"top5\"");
      for (const auto& pair : top) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_number()) {
          throw AdapterProtocolError("malformed response: \"top5\" entries must be [token, prob]");
        }
        const auto token = pair[0].get<std::string>();
        if (!vocabulary_.find(token)) throw VocabularyMismatch("adapter top5 token '" + token + "' outside its vocabulary");
        result.top5.push_back({token, pair[1].get<double>()});
      }
    } else {
      for (TokenId id : top_ids(result.distribution.probs(), kTopPredictions)) {
        result.top5.push_back({vocabulary_.token(id), result.distribution[id]});
      }
    }
    return result;
  }

  std::string base_url_;
  RemoteOptions options_;
  std::string name_;
  std::vector<std::string> declared_;
  Vocabulary vocabulary_;
  bool causal_ = true;
  bool masked_ = false;
  bool case_folded_ = false;
};

}  // namespace fakescope
