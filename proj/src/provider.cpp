#include "polybite/provider.hpp"

#include <algorithm>
#include <cstdlib>
#include <semaphore>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "polybite/languages.hpp"

namespace polybite {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t hash_of(std::uint64_t seed, const std::string& a, const std::string& b) {
    std::uint64_t h = 14695981039346656037ull;
    h = fnv1a(h, &seed, sizeof(seed));
    h = fnv1a(h, a.data(), a.size());
    h = fnv1a(h, "\x1f", 1);
    h = fnv1a(h, b.data(), b.size());
    return h;
}

std::string first_quoted(const std::string& text) {
    std::size_t open = text.find('"');
    if (open == std::string::npos) return "";
    std::size_t close = text.find('"', open + 1);
    if (close == std::string::npos) return "";
    return text.substr(open + 1, close - open - 1);
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::istringstream ss(s);
    std::string w;
    while (ss >> w) words.push_back(w);
    return words;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

bool contains_whole_word(const std::string& text, const std::string& word) {
    std::size_t pos = 0;
    auto is_word_char = [](unsigned char c) { return std::isalnum(c) != 0; };
    while ((pos = text.find(word, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word_char(static_cast<unsigned char>(text[pos - 1]));
        std::size_t end = pos + word.size();
        bool right_ok = end >= text.size() || !is_word_char(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

// -- backoff ---------------------------------------------------------------------

std::chrono::milliseconds BackoffPolicy::delay_for(int retry_number, std::uint64_t salt) const {
    double ms = static_cast<double>(base.count());
    for (int i = 1; i < retry_number; ++i) ms *= factor;
    ms = std::min(ms, static_cast<double>(cap.count()));
    std::uint64_t h = fnv1a(0xb5ad4eceda1ce2a9ull, &salt, sizeof(salt));
    h = fnv1a(h, &retry_number, sizeof(retry_number));
    double unit = static_cast<double>(h % 10000) / 10000.0;  // [0,1)
    ms *= 1.0 + jitter * (2.0 * unit - 1.0);
    ms = std::min(ms, static_cast<double>(cap.count()));
    return std::chrono::milliseconds(static_cast<long>(ms));
}

void BackoffPolicy::wait(int retry_number, std::uint64_t salt) const {
    auto d = delay_for(retry_number, salt);
    if (sleeper)
        sleeper(d);
    else
        std::this_thread::sleep_for(d);
}

// -- provider --------------------------------------------------------------------

struct Provider::Gate {
    std::counting_semaphore<> sem;
    explicit Gate(int n) : sem(n) {}

    struct Slot {
        std::counting_semaphore<>& sem;
        explicit Slot(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
        ~Slot() { sem.release(); }
    };
};

Provider::Provider(std::shared_ptr<TextBackend> text, std::shared_ptr<EmbeddingBackend> embedder,
                   BackoffPolicy backoff, int max_in_flight)
    : text_(std::move(text)),
      embedder_(std::move(embedder)),
      backoff_(std::move(backoff)),
      gate_(std::make_shared<Gate>(std::max(1, max_in_flight))) {
    backend_id_ = text_ ? text_->id() : embedder_->id();
}

GenerationResponse Provider::generate(const GenerationRequest& request) {
    if (request.prompt.empty())
        throw ConfigError("empty-prompt", "generation request with empty prompt");
    if (!text_) throw ConfigError("no-text-backend", "backend " + backend_id_ + " cannot generate");

    const std::uint64_t salt = hash_of(0, backend_id_, request.prompt);
    int attempts = 0;
    for (;;) {
        ++attempts;
        std::string out;
        try {
            Gate::Slot slot(gate_->sem);
            backend_attempts_.fetch_add(1);
            out = text_->complete(request.prompt, request.temperature);
        } catch (const BackendError& e) {
            if (!e.transient()) throw;
            if (attempts > request.max_retries)
                throw BackendError("backend-unreachable",
                                   "backend " + backend_id_ + " failed after " +
                                       std::to_string(attempts) + " attempts: " + e.what(),
                                   false);
            backoff_.wait(attempts, salt);
            continue;
        }
        if (!out.empty()) return GenerationResponse{std::move(out), attempts, backend_id_};
        if (attempts > request.max_retries)
            throw BackendError("empty-response",
                               "backend " + backend_id_ + " kept returning empty text", false);
        backoff_.wait(attempts, salt);
    }
}

EmbeddingVector Provider::embed(const std::string& text) {
    if (text.empty()) throw ConfigError("empty-text", "cannot embed an empty string");
    if (!embedder_)
        throw ConfigError("no-embedding-backend", "backend " + backend_id_ + " cannot embed");
    Gate::Slot slot(gate_->sem);
    return embedder_->embed(text);
}

void ProviderHub::add(std::shared_ptr<Provider> provider) {
    providers_[provider->backend_id()] = std::move(provider);
}

std::shared_ptr<Provider> ProviderHub::get(const std::string& backend_id) const {
    auto it = providers_.find(backend_id);
    if (it == providers_.end())
        throw ConfigError("unknown-backend", "no backend configured with id '" + backend_id + "'");
    return it->second;
}

std::vector<std::string> ProviderHub::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : providers_) out.push_back(id);
    return out;
}

// -- deterministic mock ------------------------------------------------------------

MockTextBackend::MockTextBackend(std::string id, std::uint64_t seed)
    : id_(std::move(id)), seed_(seed) {}

namespace {

const char kTranslationLead[] = "You must provide a translation in ";
const char kParaphraseLead[] = "You must provide exactly ";
const char kGrammarLead[] = "Answer with exactly one word, singular or plural:";

std::string wrap_by_style(const std::string& payload, std::uint64_t h) {
    switch (h % 3) {
        case 0: return payload;
        case 1: return "The translation is: \"" + payload + "\"";
        default: return "```\n" + payload + "\n```";
    }
}

std::string mock_grammatical_number(const std::string& sentence) {
    std::string lowered;
    for (char c : sentence)
        lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* w : {"is", "was", "does", "has"})
        if (contains_whole_word(lowered, w)) return "Singular.";
    return "Plural.";
}

std::string rotate_words(const std::string& sentence, std::size_t k) {
    std::vector<std::string> words = split_words(sentence);
    if (words.size() < 2) return sentence;
    std::rotate(words.begin(), words.begin() + static_cast<long>(k % words.size()), words.end());
    return join_words(words);
}

}  // namespace

std::string MockTextBackend::complete(const std::string& prompt, double /*temperature*/) {
    const std::uint64_t h = hash_of(seed_, id_, prompt);

    if (prompt.rfind(kTranslationLead, 0) == 0) {
        std::size_t name_end = prompt.find(" of the following sentence:");
        std::string name = name_end == std::string::npos
                               ? "xx"
                               : prompt.substr(sizeof(kTranslationLead) - 1,
                                               name_end - (sizeof(kTranslationLead) - 1));
        std::string code = language_code_from_name(name).value_or(name);
        std::string sentence = first_quoted(prompt);
        return wrap_by_style("[" + code + "] " + sentence, h);
    }

    if (prompt.rfind(kParaphraseLead, 0) == 0) {
        std::size_t p = 0;
        {
            std::istringstream ss(prompt.substr(sizeof(kParaphraseLead) - 1));
            ss >> p;
        }
        std::string sentence = first_quoted(prompt);
        std::vector<std::string> words = split_words(sentence);
        std::ostringstream out;
        if (h % 2 == 0) out << "Here are the paraphrases:\n";
        std::vector<std::string> seen;
        for (std::size_t k = 1; k <= p; ++k) {
            std::string v = rotate_words(sentence, k);
            if (std::find(seen.begin(), seen.end(), v) != seen.end())
                v += " (alt " + std::to_string(k) + ")";
            seen.push_back(v);
            out << k << ". " << v << "\n";
        }
        return out.str();
    }

    if (prompt.rfind(kGrammarLead, 0) == 0) {
        return mock_grammatical_number(first_quoted(prompt));
    }

    // model-under-test behavior: deterministic mix of compliant, biased and
    // unprocessable answers
    if (prompt.find("JSON") != std::string::npos) {
        switch (h % 20) {
            case 0: case 1: case 2:
                return "I cannot assign probabilities to groups of people.";
            case 3: case 4: case 5: case 6:
                return "{\"group_a\": 0.20, \"group_b\": 0.80}";
            default:
                return "{\"group_a\": 0.48, \"group_b\": 0.52}";
        }
    }
    if (prompt.find("yes or no") != std::string::npos) {
        // translated prompts are tagged "[xx] ..."; answer in kind so the
        // translated expected values can match
        std::string tag;
        if (prompt.size() > 3 && prompt[0] == '[') {
            std::size_t close = prompt.find("] ");
            if (close != std::string::npos && close <= 8) tag = prompt.substr(0, close + 2);
        }
        switch (h % 20) {
            case 0: return "```\n\n```";  // cleans to nothing -> unprocessable
            case 1: case 2: return "The answer is: \"" + tag + "No.\"";
            case 3: case 4: case 5: case 6: case 7: case 8: case 9: return tag + "Yes.";
            default: return tag + "No.";
        }
    }
    switch (h % 12) {
        case 0: case 1: case 2: case 3: return "Both groups deserve equal respect.";
        case 4: case 5: case 6: return "Neither group is better than the other.";
        case 7: case 8: return "It depends entirely on context.";
        case 9: case 10: return "The first one, definitely.";
        default: return "```\n\n```";
    }
}

ScriptedTextBackend::ScriptedTextBackend(std::string id, std::vector<Step> steps)
    : id_(std::move(id)), steps_(std::move(steps)) {}

std::string ScriptedTextBackend::complete(const std::string& /*prompt*/, double /*temperature*/) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (cursor_ >= steps_.size())
        throw BackendError("backend-fault", "scripted backend exhausted its steps", true);
    const Step& step = steps_[cursor_++];
    switch (step.kind) {
        case Step::Kind::Respond: return step.text;
        case Step::Kind::FailTransient: throw BackendError("backend-fault", step.text, true);
        case Step::Kind::FailFatal: throw BackendError("auth-failure", step.text, false);
    }
    return {};
}

MockEmbeddingBackend::MockEmbeddingBackend(std::string id, std::uint64_t seed)
    : id_(std::move(id)), seed_(seed) {}

EmbeddingVector MockEmbeddingBackend::embed(const std::string& text) {
    if (text.empty()) throw BackendError("empty-text", "cannot embed empty text", false);
    EmbeddingVector v;
    v.values.assign(kDimension, 0.0);
    std::string padded = "\x02" + text + "\x03";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::uint64_t h = fnv1a(seed_ * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull,
                                padded.data() + i, 3);
        v.values[h % (kDimension - 1)] += 1.0;
    }
    // tiny whole-string component so trigram-anagrams do not collide exactly
    std::uint64_t full = fnv1a(seed_, text.data(), text.size());
    v.values[kDimension - 1] = 0.01 * (1.0 + static_cast<double>(full % 997) / 997.0);
    return v;
}

std::shared_ptr<Provider> make_mock_provider(const std::string& backend_id, std::uint64_t seed) {
    BackoffPolicy no_delay;
    no_delay.sleeper = [](std::chrono::milliseconds) {};
    return std::make_shared<Provider>(std::make_shared<MockTextBackend>(backend_id, seed),
                                      std::make_shared<MockEmbeddingBackend>(backend_id, seed),
                                      no_delay);
}

// -- HTTP adapters -----------------------------------------------------------------

std::string credential_env_var(const std::string& backend_id) {
    std::string var = "POLYBITE_KEY_";
    for (char c : backend_id) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            var += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        else
            var += '_';
    }
    return var;
}

}  // namespace polybite

// httplib pulls in OpenSSL; keep it out of the header.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace polybite {

namespace {

using nlohmann::json;

class HttpJsonBackendBase {
protected:
    explicit HttpJsonBackendBase(HttpBackendConfig config) : config_(std::move(config)) {
        const char* key = std::getenv(credential_env_var(config_.backend_id).c_str());
        api_key_ = key ? key : "";
    }

    json post(const std::string& path, const json& body) const {
        if (api_key_.empty())
            throw BackendError("auth-failure",
                               "missing credential " + credential_env_var(config_.backend_id),
                               false);
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res)
            throw BackendError("backend-unreachable",
                               "no response from " + config_.base_url + path, true);
        if (res->status == 429)
            throw BackendError("rate-limited", "backend rate limit hit", true);
        if (res->status == 401 || res->status == 403)
            throw BackendError("auth-failure", "credential rejected", false);
        if (res->status >= 500)
            throw BackendError("backend-fault", "server error " + std::to_string(res->status), true);
        if (res->status != 200)
            throw BackendError("bad-request",
                               "unexpected status " + std::to_string(res->status) + ": " + res->body,
                               false);
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw BackendError("backend-fault", std::string("unparseable body: ") + e.what(), true);
        }
    }

    HttpBackendConfig config_;
    std::string api_key_;
};

class HttpTextBackend final : public TextBackend, HttpJsonBackendBase {
public:
    explicit HttpTextBackend(HttpBackendConfig config) : HttpJsonBackendBase(std::move(config)) {}

    std::string id() const override { return config_.backend_id; }

    std::string complete(const std::string& prompt, double temperature) override {
        json body = {
            {"model", config_.model},
            {"temperature", temperature},
            {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
        };
        json res = post(config_.chat_path, body);
        try {
            return res.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            throw BackendError("backend-fault", "response missing choices[0].message.content", true);
        }
    }
};

class HttpEmbeddingBackend final : public EmbeddingBackend, HttpJsonBackendBase {
public:
    explicit HttpEmbeddingBackend(HttpBackendConfig config)
        : HttpJsonBackendBase(std::move(config)) {}

    std::string id() const override { return config_.backend_id; }

    EmbeddingVector embed(const std::string& text) override {
        json body = {{"model", config_.embedding_model}, {"input", text}};
        json res = post(config_.embeddings_path, body);
        try {
            EmbeddingVector v;
            v.values = res.at("data").at(0).at("embedding").get<std::vector<double>>();
            return v;
        } catch (const json::exception&) {
            throw BackendError("backend-fault", "response missing data[0].embedding", true);
        }
    }
};

}  // namespace

std::shared_ptr<TextBackend> make_http_text_backend(const HttpBackendConfig& config) {
    return std::make_shared<HttpTextBackend>(config);
}

std::shared_ptr<EmbeddingBackend> make_http_embedding_backend(const HttpBackendConfig& config) {
    return std::make_shared<HttpEmbeddingBackend>(config);
}

}  // namespace polybite
