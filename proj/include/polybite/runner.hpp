#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polybite/provider.hpp"
#include "polybite/sanitizer.hpp"
#include "polybite/template_model.hpp"

namespace polybite {

enum class Verdict { Pass, Fail, Unprocessable };

std::string to_string(Verdict verdict);
Verdict verdict_from_string(const std::string& s);

/// Outcome of one test case against one model. attempts counts generation
/// calls (1 initial + up to 3 retries); unprocessable means no attempt
/// produced an interpretable answer.
struct TestResult {
    std::string case_id;
    std::string model_id;
    Verdict verdict = Verdict::Unprocessable;
    std::vector<std::string> raw_responses;  // one per attempt
    int attempts = 1;
};

/// All results for one (model, language, concern) combination.
struct TestBatch {
    std::string model_id;
    std::string language;
    std::string concern;
    std::vector<TestResult> results;
};

/// pass_rate is a percentage over valid (pass+fail) answers and is absent
/// when a batch produced no valid answers; fault_rate is a percentage over
/// all answers.
struct BatchReport {
    std::string model_id;
    std::string language;
    std::string concern;
    std::size_t passes = 0;
    std::size_t fails = 0;
    std::size_t unprocessable = 0;
    std::size_t total = 0;
    std::optional<double> pass_rate;
    double fault_rate = 0.0;
};

/// One run-log line: a single generation attempt. The verdict is present
/// only on a case's final attempt.
struct RunLogEntry {
    std::string case_id;
    std::string parent_template_id;
    std::string model_id;
    std::string language;
    std::string concern;
    int attempt = 1;
    std::string raw;
    std::optional<Verdict> verdict;
    std::uint64_t seq = 0;
    std::string timestamp;
};

/// Pure verdict function. Expected-value oracles sanitize the response and
/// compare case-insensitively (punctuation and accents folded); keyword
/// oracles match whole words accent-insensitively; structured oracles parse
/// a JSON object of community -> probability and compare the max-min spread
/// against the oracle payload. Uninterpretable responses are Unprocessable.
Verdict evaluate_response(const std::string& raw, const Oracle& oracle,
                          const std::map<std::string, std::string>& expected_values);

/// Lowercase + accent fold + punctuation strip used by the oracles;
/// exposed for tests.
std::string normalize_answer(const std::string& text);

class Runner {
public:
    explicit Runner(const ProviderHub& hub, int workers = 4,
                    bool deterministic_timestamps = false);

    /// Sends the prompt, retrying up to 3 extra times while the verdict is
    /// unprocessable. Backend failures (after the provider's own transport
    /// retries) end the case as unprocessable.
    TestResult run_case(const TestCase& test_case, const std::string& model_id) const;

    struct Outcome {
        std::vector<TestResult> results;  // sorted by (model, case id)
        std::vector<RunLogEntry> log;     // sorted, seq/timestamps assigned
    };

    /// Runs every case against every model; deterministic output order
    /// regardless of worker interleaving.
    Outcome run_all(const std::vector<TestCase>& cases,
                    const std::vector<std::string>& models) const;

private:
    const ProviderHub& hub_;
    int workers_;
    bool deterministic_timestamps_;
};

// -- aggregation -----------------------------------------------------------------

BatchReport aggregate(const TestBatch& batch);

/// Groups final verdicts into (model, language, concern) batches, sorted.
std::vector<TestBatch> batches_from_log(const std::vector<RunLogEntry>& log);

std::vector<BatchReport> reports_from_log(const std::vector<RunLogEntry>& log);

// -- log I/O ----------------------------------------------------------------------

void write_run_log(const std::vector<RunLogEntry>& log, const std::string& path);
std::vector<RunLogEntry> read_run_log(const std::string& path);

}  // namespace polybite
