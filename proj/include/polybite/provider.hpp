#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "polybite/errors.hpp"
#include "polybite/metrics.hpp"

namespace polybite {

struct GenerationRequest {
    std::string prompt;
    double temperature = 1.0;  // paper setting for all augmentation calls
    int max_retries = 3;
};

struct GenerationResponse {
    std::string text;
    int attempts_used = 1;
    std::string backend_id;
};

/// One raw completion attempt against a concrete backend. Implementations
/// throw BackendError; transient errors are retried by Provider.
class TextBackend {
public:
    virtual ~TextBackend() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(const std::string& prompt, double temperature) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::string id() const = 0;
    virtual EmbeddingVector embed(const std::string& text) = 0;
};

/// Exponential backoff: base 500 ms, factor 2, jitter +-20%, cap 8 s.
/// The sleeper hook exists so tests can run without wall-clock delays.
struct BackoffPolicy {
    std::chrono::milliseconds base{500};
    double factor = 2.0;
    double jitter = 0.2;
    std::chrono::milliseconds cap{8000};
    std::function<void(std::chrono::milliseconds)> sleeper;  // default: real sleep

    std::chrono::milliseconds delay_for(int retry_number, std::uint64_t salt) const;
    void wait(int retry_number, std::uint64_t salt) const;
};

/// Retry/backoff orchestration over one text backend and one embedding
/// backend, with a bounded in-flight request count. Thread-safe.
class Provider {
public:
    Provider(std::shared_ptr<TextBackend> text, std::shared_ptr<EmbeddingBackend> embedder,
             BackoffPolicy backoff = {}, int max_in_flight = 4);

    GenerationResponse generate(const GenerationRequest& request);
    EmbeddingVector embed(const std::string& text);

    const std::string& backend_id() const { return backend_id_; }

    /// Completed backend completion attempts (retries included). Used by the
    /// cache-economy checks.
    std::uint64_t backend_attempts() const { return backend_attempts_.load(); }

private:
    std::shared_ptr<TextBackend> text_;
    std::shared_ptr<EmbeddingBackend> embedder_;
    BackoffPolicy backoff_;
    std::string backend_id_;
    std::atomic<std::uint64_t> backend_attempts_{0};

    struct Gate;
    std::shared_ptr<Gate> gate_;
};

/// Named set of providers; backends are addressed by opaque ids bound in
/// configuration.
class ProviderHub {
public:
    void add(std::shared_ptr<Provider> provider);
    std::shared_ptr<Provider> get(const std::string& backend_id) const;
    std::vector<std::string> ids() const;

private:
    std::map<std::string, std::shared_ptr<Provider>> providers_;
};

// -- deterministic test doubles -------------------------------------------------

/// Pure-function mock: the response depends only on (id, seed, prompt).
/// Understands the engine's own translation / paraphrase / grammatical-number
/// prompts and answers test prompts with a deterministic spread of
/// compliant, biased and unprocessable texts.
class MockTextBackend : public TextBackend {
public:
    MockTextBackend(std::string id, std::uint64_t seed);

    std::string id() const override { return id_; }
    std::string complete(const std::string& prompt, double temperature) override;

private:
    std::string id_;
    std::uint64_t seed_;
};

/// Replays an explicit script of responses / failures; for retry-contract
/// tests.
class ScriptedTextBackend : public TextBackend {
public:
    struct Step {
        enum class Kind { Respond, FailTransient, FailFatal } kind = Kind::Respond;
        std::string text;  // response text or error message
    };

    ScriptedTextBackend(std::string id, std::vector<Step> steps);

    std::string id() const override { return id_; }
    std::string complete(const std::string& prompt, double temperature) override;

    static Step respond(std::string text) { return {Step::Kind::Respond, std::move(text)}; }
    static Step fail_transient(std::string msg = "transient fault") {
        return {Step::Kind::FailTransient, std::move(msg)};
    }
    static Step fail_fatal(std::string msg = "auth failure") {
        return {Step::Kind::FailFatal, std::move(msg)};
    }

private:
    std::string id_;
    std::vector<Step> steps_;
    std::size_t cursor_ = 0;
    std::mutex mutex_;
};

/// 64-dimensional character-trigram hash embedding; equal strings map to
/// equal vectors, near-identical strings to nearby ones.
class MockEmbeddingBackend : public EmbeddingBackend {
public:
    static constexpr std::size_t kDimension = 64;

    MockEmbeddingBackend(std::string id, std::uint64_t seed);

    std::string id() const override { return id_; }
    EmbeddingVector embed(const std::string& text) override;

private:
    std::string id_;
    std::uint64_t seed_;
};

/// Provider wired to the deterministic mocks, zero-delay backoff.
std::shared_ptr<Provider> make_mock_provider(const std::string& backend_id, std::uint64_t seed);

// -- HTTP adapters ---------------------------------------------------------------

/// OpenAI-style chat-completions endpoint. Credentials come from the
/// POLYBITE_KEY_<BACKEND_ID> environment variable (id uppercased).
struct HttpBackendConfig {
    std::string backend_id;
    std::string base_url;                          // e.g. https://api.openai.com
    std::string chat_path = "/v1/chat/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::string model;            // chat model name
    std::string embedding_model;  // embeddings model name
    int timeout_seconds = 60;
};

std::shared_ptr<TextBackend> make_http_text_backend(const HttpBackendConfig& config);
std::shared_ptr<EmbeddingBackend> make_http_embedding_backend(const HttpBackendConfig& config);

/// Name of the credential variable for a backend id.
std::string credential_env_var(const std::string& backend_id);

}  // namespace polybite
