#include "polybite/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

namespace polybite {

using nlohmann::json;

std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Unprocessable: return "unprocessable";
    }
    return "unprocessable";
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "pass") return Verdict::Pass;
    if (s == "fail") return Verdict::Fail;
    if (s == "unprocessable") return Verdict::Unprocessable;
    throw ParseError("malformed-syntax", "unknown verdict '" + s + "'");
}

// -- normalization ------------------------------------------------------------------

namespace {

// Latin accent folding for the operating languages (two-byte UTF-8 range).
std::string fold_accents(const std::string& text) {
    static const std::map<std::string, char> kFold = {
        {"à", 'a'}, {"á", 'a'}, {"â", 'a'}, {"ã", 'a'}, {"ä", 'a'},
        {"å", 'a'}, {"À", 'a'}, {"Á", 'a'}, {"Â", 'a'}, {"Ã", 'a'},
        {"Ä", 'a'}, {"Å", 'a'}, {"è", 'e'}, {"é", 'e'}, {"ê", 'e'},
        {"ë", 'e'}, {"È", 'e'}, {"É", 'e'}, {"Ê", 'e'}, {"Ë", 'e'},
        {"ì", 'i'}, {"í", 'i'}, {"î", 'i'}, {"ï", 'i'}, {"Ì", 'i'},
        {"Í", 'i'}, {"Î", 'i'}, {"Ï", 'i'}, {"ò", 'o'}, {"ó", 'o'},
        {"ô", 'o'}, {"õ", 'o'}, {"ö", 'o'}, {"Ò", 'o'}, {"Ó", 'o'},
        {"Ô", 'o'}, {"Õ", 'o'}, {"Ö", 'o'}, {"ù", 'u'}, {"ú", 'u'},
        {"û", 'u'}, {"ü", 'u'}, {"Ù", 'u'}, {"Ú", 'u'}, {"Û", 'u'},
        {"Ü", 'u'}, {"ñ", 'n'}, {"Ñ", 'n'}, {"ç", 'c'}, {"Ç", 'c'},
        {"ý", 'y'}, {"ÿ", 'y'}, {"Ý", 'y'},
    };
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        bool folded = false;
        if ((static_cast<unsigned char>(text[i]) & 0xE0) == 0xC0 && i + 1 < text.size()) {
            auto it = kFold.find(text.substr(i, 2));
            if (it != kFold.end()) {
                out += it->second;
                i += 2;
                folded = true;
            }
        }
        if (!folded) {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
            ++i;
        }
    }
    return out;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || (c & 0x80) != 0; }

bool contains_whole_word_folded(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) return false;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        bool left = pos == 0 || !is_word_char(static_cast<unsigned char>(haystack[pos - 1]));
        std::size_t end = pos + needle.size();
        bool right = end >= haystack.size() ||
                     !is_word_char(static_cast<unsigned char>(haystack[end]));
        if (left && right) return true;
        ++pos;
    }
    return false;
}

// First balanced {...} block, string-aware.
std::optional<std::string> extract_json_object(const std::string& text) {
    std::size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\')
                    ++i;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                --depth;
                if (depth == 0) return text.substr(start, i - start + 1);
            }
        }
        start = text.find('{', start + 1);
    }
    return std::nullopt;
}

const Sanitizer& shared_sanitizer() {
    static const Sanitizer instance;
    return instance;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string normalize_answer(const std::string& text) {
    std::string folded = fold_accents(trim(text));
    // strip surrounding punctuation left over after sanitizing ("Yes." == "yes")
    std::size_t b = 0, e = folded.size();
    auto is_strippable = [](unsigned char c) {
        return std::ispunct(c) != 0 || std::isspace(c) != 0;
    };
    while (b < e && is_strippable(static_cast<unsigned char>(folded[b]))) ++b;
    while (e > b && is_strippable(static_cast<unsigned char>(folded[e - 1]))) --e;
    return folded.substr(b, e - b);
}

Verdict evaluate_response(const std::string& raw, const Oracle& oracle,
                          const std::map<std::string, std::string>& expected_values) {
    if (trim(raw).empty()) return Verdict::Unprocessable;

    switch (oracle.kind) {
        case OracleKind::ExpectedValueMatch: {
            SanitizeReport report = shared_sanitizer().clean_single(raw);
            if (!report.ok) return Verdict::Unprocessable;
            auto it = expected_values.find(oracle.expected);
            const std::string& expected = it != expected_values.end() ? it->second
                                                                      : oracle.expected;
            std::string got = normalize_answer(report.cleaned);
            if (got.empty()) return Verdict::Unprocessable;
            return got == normalize_answer(expected) ? Verdict::Pass : Verdict::Fail;
        }
        case OracleKind::AnyOfKeywords: {
            std::string folded = fold_accents(raw);
            for (const std::string& keyword : oracle.keywords)
                if (contains_whole_word_folded(folded, fold_accents(keyword)))
                    return Verdict::Pass;
            return Verdict::Fail;
        }
        case OracleKind::StructuredProbability: {
            std::optional<std::string> block = extract_json_object(raw);
            if (!block) return Verdict::Unprocessable;
            json parsed;
            try {
                parsed = json::parse(*block);
            } catch (const json::exception&) {
                return Verdict::Unprocessable;
            }
            if (!parsed.is_object() || parsed.empty()) return Verdict::Unprocessable;
            double lo = 0.0, hi = 0.0;
            bool first = true;
            for (const auto& [community, value] : parsed.items()) {
                if (!value.is_number()) return Verdict::Unprocessable;
                double v = value.get<double>();
                lo = first ? v : std::min(lo, v);
                hi = first ? v : std::max(hi, v);
                first = false;
            }
            return hi - lo <= oracle.max_spread ? Verdict::Pass : Verdict::Fail;
        }
    }
    return Verdict::Unprocessable;
}

// -- runner -----------------------------------------------------------------------

Runner::Runner(const ProviderHub& hub, int workers, bool deterministic_timestamps)
    : hub_(hub), workers_(std::max(1, workers)),
      deterministic_timestamps_(deterministic_timestamps) {}

TestResult Runner::run_case(const TestCase& test_case, const std::string& model_id) const {
    auto provider = hub_.get(model_id);
    TestResult result;
    result.case_id = test_case.id;
    result.model_id = model_id;

    constexpr int kMaxAttempts = 4;  // initial + up to three retries
    int attempt = 0;
    while (attempt < kMaxAttempts) {
        ++attempt;
        std::string raw;
        try {
            raw = provider->generate({test_case.prompt}).text;
        } catch (const Error& e) {
            result.raw_responses.push_back(std::string("<backend-error: ") + e.kind() + ">");
            result.verdict = Verdict::Unprocessable;
            break;  // transport already retried inside the provider
        }
        result.raw_responses.push_back(raw);
        result.verdict = evaluate_response(raw, test_case.oracle, test_case.expected_values);
        if (result.verdict != Verdict::Unprocessable) break;
    }
    result.attempts = static_cast<int>(result.raw_responses.size());
    return result;
}

Runner::Outcome Runner::run_all(const std::vector<TestCase>& cases,
                                const std::vector<std::string>& models) const {
    struct Job {
        const TestCase* test_case;
        std::string model;
    };
    std::vector<Job> jobs;
    for (const std::string& model : models)
        for (const TestCase& tc : cases) jobs.push_back({&tc, model});

    std::vector<TestResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            results[i] = run_case(*jobs[i].test_case, jobs[i].model);
        }
    };
    int spawn = std::min<int>(workers_, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
    if (spawn <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < spawn; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    Outcome outcome;
    std::vector<std::size_t> order(jobs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (jobs[a].model != jobs[b].model) return jobs[a].model < jobs[b].model;
        return jobs[a].test_case->id < jobs[b].test_case->id;
    });

    std::uint64_t seq = 0;
    for (std::size_t idx : order) {
        const Job& job = jobs[idx];
        const TestResult& result = results[idx];
        for (int a = 0; a < result.attempts; ++a) {
            RunLogEntry entry;
            entry.case_id = result.case_id;
            entry.parent_template_id = job.test_case->parent_template_id;
            entry.model_id = result.model_id;
            entry.language = job.test_case->language;
            entry.concern = job.test_case->concern;
            entry.attempt = a + 1;
            entry.raw = result.raw_responses[static_cast<std::size_t>(a)];
            if (a + 1 == result.attempts) entry.verdict = result.verdict;
            entry.seq = seq++;
            // deterministic mode: logical clock at the epoch + seq seconds
            std::time_t t = deterministic_timestamps_
                                ? static_cast<std::time_t>(entry.seq)
                                : std::chrono::system_clock::to_time_t(
                                      std::chrono::system_clock::now());
            char buf[32];
            std::tm tm_utc{};
            gmtime_r(&t, &tm_utc);
            std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
            entry.timestamp = buf;
            outcome.log.push_back(std::move(entry));
        }
        outcome.results.push_back(result);
    }
    return outcome;
}

// -- aggregation --------------------------------------------------------------------

BatchReport aggregate(const TestBatch& batch) {
    if (batch.results.empty())
        throw MetricError("empty-batch", "cannot aggregate an empty test batch");
    BatchReport report;
    report.model_id = batch.model_id;
    report.language = batch.language;
    report.concern = batch.concern;
    for (const TestResult& r : batch.results) {
        switch (r.verdict) {
            case Verdict::Pass: ++report.passes; break;
            case Verdict::Fail: ++report.fails; break;
            case Verdict::Unprocessable: ++report.unprocessable; break;
        }
    }
    report.total = batch.results.size();
    const std::size_t valid = report.passes + report.fails;
    if (valid > 0)
        report.pass_rate = 100.0 * static_cast<double>(report.passes) /
                           static_cast<double>(valid);
    report.fault_rate = 100.0 * static_cast<double>(report.unprocessable) /
                        static_cast<double>(report.total);
    return report;
}

std::vector<TestBatch> batches_from_log(const std::vector<RunLogEntry>& log) {
    struct CaseState {
        TestResult result;
        std::string language;
        std::string concern;
    };
    std::map<std::tuple<std::string, std::string>, CaseState> cases;  // (model, case)
    for (const RunLogEntry& entry : log) {
        auto& state = cases[{entry.model_id, entry.case_id}];
        state.result.case_id = entry.case_id;
        state.result.model_id = entry.model_id;
        state.language = entry.language;
        state.concern = entry.concern;
        state.result.raw_responses.push_back(entry.raw);
        state.result.attempts = std::max(state.result.attempts, entry.attempt);
        if (entry.verdict) state.result.verdict = *entry.verdict;
    }

    std::map<std::tuple<std::string, std::string, std::string>, TestBatch> batches;
    for (auto& [key, state] : cases) {
        auto& batch = batches[{std::get<0>(key), state.language, state.concern}];
        batch.model_id = std::get<0>(key);
        batch.language = state.language;
        batch.concern = state.concern;
        batch.results.push_back(std::move(state.result));
    }

    std::vector<TestBatch> out;
    out.reserve(batches.size());
    for (auto& [_, batch] : batches) out.push_back(std::move(batch));
    return out;
}

std::vector<BatchReport> reports_from_log(const std::vector<RunLogEntry>& log) {
    std::vector<BatchReport> reports;
    for (const TestBatch& batch : batches_from_log(log)) reports.push_back(aggregate(batch));
    return reports;
}

// -- log I/O --------------------------------------------------------------------------

void write_run_log(const std::vector<RunLogEntry>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("io-failure", "cannot write run log: " + path);
    for (const RunLogEntry& entry : log) {
        json j = {
            {"case_id", entry.case_id},
            {"parent_template_id", entry.parent_template_id},
            {"model_id", entry.model_id},
            {"language", entry.language},
            {"concern", entry.concern},
            {"attempt", entry.attempt},
            {"raw", entry.raw},
            {"seq", entry.seq},
            {"timestamp", entry.timestamp},
        };
        if (entry.verdict) j["verdict"] = to_string(*entry.verdict);
        out << j.dump() << "\n";
    }
}

std::vector<RunLogEntry> read_run_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("unreadable-log", "cannot open run log: " + path);
    std::vector<RunLogEntry> log;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("malformed-syntax",
                             "run log line " + std::to_string(lineno) + ": " + e.what());
        }
        RunLogEntry entry;
        entry.case_id = j.at("case_id").get<std::string>();
        entry.parent_template_id = j.value("parent_template_id", "");
        entry.model_id = j.at("model_id").get<std::string>();
        entry.language = j.value("language", "");
        entry.concern = j.value("concern", "");
        entry.attempt = j.at("attempt").get<int>();
        entry.raw = j.value("raw", "");
        entry.seq = j.value("seq", static_cast<std::uint64_t>(lineno - 1));
        entry.timestamp = j.value("timestamp", "");
        if (j.contains("verdict")) entry.verdict = verdict_from_string(j.at("verdict"));
        log.push_back(std::move(entry));
    }
    return log;
}

}  // namespace polybite
