// Acceptance suite: one pass/fail line per criterion, exit 0 only when all
// criteria hold. Everything runs on the deterministic mock backends.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "polybite/app.hpp"
#include "polybite/config.hpp"
#include "polybite/metrics.hpp"
#include "polybite/pipeline.hpp"
#include "polybite/provider.hpp"
#include "polybite/reporting.hpp"
#include "polybite/runner.hpp"
#include "polybite/sanitizer.hpp"
#include "polybite/template_model.hpp"

using namespace polybite;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void criterion(int number, const std::string& label, const std::function<void()>& body) {
    try {
        body();
        std::printf("[PASS] criterion %2d: %s\n", number, label.c_str());
    } catch (const std::exception& e) {
        ++failures;
        std::printf("[FAIL] criterion %2d: %s\n        %s\n", number, label.c_str(), e.what());
    }
}

void require(bool condition, const std::string& message) {
    if (!condition) throw std::runtime_error(message);
}

std::string fixture_path() {
    return std::string(POLYBITE_FIXTURE_DIR) + "/fixture_library.json";
}

ProviderHub mock_hub(std::uint64_t seed, const std::vector<std::string>& ids = {"mt"}) {
    ProviderHub hub;
    for (const std::string& id : ids) hub.add(make_mock_provider(id, seed));
    return hub;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> tree_digest(const fs::path& root,
                                               const std::set<std::string>& skip) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::string rel = fs::relative(entry.path(), root).string();
        if (skip.count(entry.path().filename().string())) continue;
        files[rel] = slurp(entry.path());
    }
    return files;
}

std::uint64_t brute_force_subsets(unsigned n, unsigned p) {
    std::uint64_t count = 0;
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask)
        if (static_cast<unsigned>(__builtin_popcountll(mask)) == p) ++count;
    return count;
}

TemplateLibrary synthetic_library(std::size_t count) {
    TemplateLibrary lib;
    lib.community_sets["sexism"] = {"sexism", {"men", "women"}};
    lib.community_sets["religion"] = {"religion", {"Christians", "Muslims", "Jews"}};
    lib.community_sets["ageism"] = {"ageism", {"young people", "old people"}};
    for (std::size_t i = 0; i < count; ++i) {
        PromptTemplate t;
        t.id = "SYN" + std::to_string(100 + i);
        t.language = "en";
        t.oracle.kind = OracleKind::AnyOfKeywords;
        t.oracle.keywords = {"equal"};
        switch (i % 3) {
            case 0:
                t.concern = "sexism";
                t.body = "Statement " + std::to_string(i) +
                         " compares {GENDER1} against {GENDER2} carefully.";
                break;
            case 1:
                t.concern = "religion";
                t.body = "Claim " + std::to_string(i) + " about {RELIGION} communities.";
                break;
            default:
                t.concern = "ageism";
                t.body = "Question " + std::to_string(i) + " asks if {AGE1} outwork {AGE2}.";
                break;
        }
        lib.templates.push_back(std::move(t));
    }
    return lib;
}

}  // namespace

int main() {
    const auto suite_start = std::chrono::steady_clock::now();
    std::printf("acceptance suite (deterministic mock backends)\n");

    criterion(1, "identity: L = {} and P = 0 return the input library byte-identically, < 1 s",
              [] {
                  TemplateLibrary lib = load_library_file(fixture_path());
                  ProviderHub hub = mock_hub(1);
                  PipelineConfig config;
                  config.translator_backend = "mt";

                  auto t0 = std::chrono::steady_clock::now();
                  GeneratedLibrary out = run_pipeline(lib, config, hub);
                  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count();

                  require(serialize_generated_library(out) == serialize_library(lib),
                          "serialized output differs from the input library");
                  require(out.library == lib, "in-memory output differs from the input");
                  require(hub.get("mt")->backend_attempts() == 0, "identity run hit the backend");
                  require(elapsed < 1000, "identity run took " + std::to_string(elapsed) + " ms");
              });

    criterion(2, "cardinality: 10 templates x 3 languages x (5+1) = 180, T2P and P2T", [] {
        TemplateLibrary lib = load_library_file(fixture_path());
        require(lib.templates.size() == 10, "fixture must hold 10 templates");
        for (PipelineOrder order : {PipelineOrder::TranslateThenParaphrase,
                                    PipelineOrder::ParaphraseThenTranslate}) {
            ProviderHub hub = mock_hub(2);
            PipelineConfig config;
            config.translator_backend = "mt";
            config.languages = {"es", "ca", "lb"};
            config.paraphrase_count = 5;
            config.include_base_translation = true;
            config.order = order;
            GeneratedLibrary out = run_pipeline(lib, config, hub);
            require(out.diagnostics.empty(), "unexpected skips in " + to_string(order));
            require(out.library.templates.size() == 180,
                    to_string(order) + " produced " +
                        std::to_string(out.library.templates.size()) + " templates, wanted 180");
        }
    });

    criterion(3, "combinatorics: count_instantiations = brute-force subsets for all n <= 8", [] {
        for (unsigned n = 0; n <= 8; ++n)
            for (unsigned p = 0; p <= n; ++p)
                require(count_instantiations(n, p) == brute_force_subsets(n, p),
                        "mismatch at n=" + std::to_string(n) + " p=" + std::to_string(p));
    });

    criterion(4, "placeholder preservation: 100% of 1000+ mock pipeline outputs", [] {
        TemplateLibrary lib = synthetic_library(42);
        ProviderHub hub = mock_hub(4);
        PipelineConfig config;
        config.translator_backend = "mt";
        config.languages = {"es", "ca", "fr", "de", "lb"};
        config.paraphrase_count = 4;
        config.include_base_translation = true;

        GeneratedLibrary out = run_pipeline(lib, config, hub);
        require(out.library.templates.size() >= 1000,
                "only " + std::to_string(out.library.templates.size()) + " outputs generated");

        std::map<std::string, const PromptTemplate*> sources;
        for (const PromptTemplate& t : lib.templates) sources[t.id] = &t;
        std::size_t preserved = 0;
        for (const PromptTemplate& t : out.library.templates) {
            auto prov = out.provenance.find(t.id);
            const std::string& source_body =
                prov == out.provenance.end() ? t.body
                                             : sources.at(prov->second.parent_id)->body;
            if (verify_placeholders(source_body, t.body)) ++preserved;
        }
        require(preserved == out.library.templates.size(),
                std::to_string(out.library.templates.size() - preserved) +
                    " outputs lost placeholders (zero tolerance)");
    });

    criterion(5, "cache economy: 50 templates, 3 prefixes, 4 languages -> exactly 12 affix calls",
              [] {
                  TemplateLibrary lib;
                  lib.community_sets["sexism"] = {"sexism", {"men", "women"}};
                  for (int i = 0; i < 50; ++i) {
                      PromptTemplate t;
                      t.id = "C" + std::to_string(100 + i);
                      t.concern = "sexism";
                      t.language = "en";
                      t.prefix = "Shared prefix " + std::to_string(i % 3) + ".";
                      t.body = "Body " + std::to_string(i) + " has {GENDER1} and {GENDER2}.";
                      t.oracle.kind = OracleKind::AnyOfKeywords;
                      t.oracle.keywords = {"equal"};
                      lib.templates.push_back(std::move(t));
                  }
                  ProviderHub hub = mock_hub(5);
                  PipelineConfig config;
                  config.translator_backend = "mt";
                  config.languages = {"es", "ca", "fr", "de"};
                  config.paraphrase_count = 0;

                  GeneratedLibrary out = run_pipeline(lib, config, hub);
                  require(out.cache_stats.affix_misses == 12,
                          "affix cache misses = " + std::to_string(out.cache_stats.affix_misses) +
                              ", wanted 12");
                  const std::uint64_t body_calls = 50 * 4;
                  const std::uint64_t total = hub.get("mt")->backend_attempts();
                  require(total - body_calls == 12,
                          "affix backend calls = " + std::to_string(total - body_calls) +
                              ", wanted 12");
              });

    criterion(6, "metric oracles: BLEU endpoints + 5 frozen examples, cosine, pearson", [] {
        std::mt19937_64 rng(6);
        const std::vector<std::string> vocab = {"alpha", "beta",  "gamma", "delta", "eps",
                                                "zeta",  "theta", "iota",  "kappa"};
        auto join = [](const std::vector<std::string>& w) {
            std::string s;
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (i) s += ' ';
                s += w[i];
            }
            return s;
        };
        for (int i = 0; i < 100; ++i) {
            std::vector<std::string> words;
            std::size_t len = 1 + rng() % 9;
            for (std::size_t k = 0; k < len; ++k) words.push_back(vocab[rng() % vocab.size()]);
            std::string s = join(words);
            require(bleu(s, {s}) == 1.0, "BLEU(x,[x]) != 1 for: " + s);
        }
        require(bleu("aa bb cc", {"xx yy zz"}) < 0.01, "zero-overlap BLEU not < 0.01");
        require(bleu("strange unrelated words", {"totally different tokens here"}) < 0.01,
                "zero-overlap BLEU not < 0.01");

        struct Frozen {
            const char* cand;
            std::vector<std::string> refs;
            double expected;
        };
        const std::vector<Frozen> frozen = {
            {"the cat sat", {"the cat sat down"}, 0.7165313105737893},
            {"the the the the", {"the cat"}, 1.2574334296829348e-07},
            {"hello, world!", {"hello world !"}, 2.2360679774997884e-05},
            {"a b c d e f", {"a b x d e f", "a b c d y f"}, 0.7071067811865475},
            {"b a", {"a b"}, 3.16227766016838e-05},
        };
        for (const Frozen& f : frozen)
            require(std::abs(bleu(f.cand, f.refs) - f.expected) < 1e-9,
                    std::string("frozen BLEU mismatch for: ") + f.cand);

        EmbeddingVector a{{1.0, 2.0, 3.0}};
        EmbeddingVector anti{{-1.0, -2.0, -3.0}};
        EmbeddingVector ex{{1.0, 0.0}};
        EmbeddingVector ey{{0.0, 1.0}};
        require(std::abs(cosine_similarity(a, a) - 1.0) <= 1e-12, "cosine identity");
        require(std::abs(cosine_similarity(ex, ey)) <= 1e-12, "cosine orthogonality");
        require(std::abs(cosine_similarity(a, anti) + 1.0) <= 1e-12, "cosine antipodal");

        std::uniform_real_distribution<double> dist(-10.0, 10.0);
        for (int trial = 0; trial < 100; ++trial) {
            std::size_t n = 3 + rng() % 30;
            std::vector<double> x, y;
            for (std::size_t i = 0; i < n; ++i) {
                x.push_back(dist(rng));
                y.push_back(dist(rng));
            }
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (std::size_t i = 0; i < n; ++i) {
                sx += x[i];
                sy += y[i];
                sxx += x[i] * x[i];
                syy += y[i] * y[i];
                sxy += x[i] * y[i];
            }
            double nd = static_cast<double>(n);
            double denom =
                std::sqrt(nd * sxx - sx * sx) * std::sqrt(nd * syy - sy * sy);
            double expected = (nd * sxy - sx * sy) / denom;
            require(std::abs(pearson(x, y) - expected) < 1e-10, "pearson brute-force mismatch");
        }
    });

    criterion(7, "paraphrase audit: P in {2,5,10} tables with correct counts", [] {
        TemplateLibrary lib = load_library_file(fixture_path());
        ProviderHub hub = mock_hub(7);
        Paraphraser paraphraser(hub.get("mt"));
        AuditResult audit =
            run_paraphrase_audit(lib, {2, 5, 10}, paraphraser, *hub.get("mt"));

        require(audit.skipped.empty(), "audit skipped templates unexpectedly");
        require(audit.per_count.size() == 3, "expected 3 per-P tables");
        for (const auto& per : audit.per_count) {
            std::size_t expected = lib.templates.size() * per.paraphrase_count;
            require(per.samples == expected,
                    "P=" + std::to_string(per.paraphrase_count) + " has " +
                        std::to_string(per.samples) + " samples, wanted " +
                        std::to_string(expected));
            require(per.cosine.min >= -1.0 && per.cosine.max <= 1.0, "cosine out of range");
            require(per.bleu.min >= 0.0 && per.bleu.max <= 1.0, "bleu out of range");
        }
        require(audit.rows.size() == lib.templates.size() * (2 + 5 + 10),
                "sample rows miscounted");

        fs::path dir = fs::temp_directory_path() / "polybite_acc_audit";
        fs::remove_all(dir);
        write_audit_files(audit, nullptr, dir.string());
        std::string summary = slurp(dir / "audit_summary.csv");
        require(summary.find("paraphrase_count,metric,count,") == 0, "summary header missing");
        require(summary.find("2,bleu,20,") != std::string::npos, "P=2 bleu row missing");
        require(summary.find("10,cosine,100,") != std::string::npos, "P=10 cosine row missing");
        fs::remove_all(dir);
    });

    criterion(8, "retry semantics: attempts = k+1 for k <= 3; unprocessable for k >= 4", [] {
        using Step = ScriptedTextBackend::Step;
        BackoffPolicy no_delay;
        no_delay.sleeper = [](std::chrono::milliseconds) {};

        for (int k = 0; k <= 3; ++k) {
            std::vector<Step> steps(static_cast<std::size_t>(k),
                                    ScriptedTextBackend::fail_transient());
            steps.push_back(ScriptedTextBackend::respond("No."));
            Provider provider(std::make_shared<ScriptedTextBackend>("flaky", steps), nullptr,
                              no_delay);
            GenerationResponse r = provider.generate({"prompt"});
            require(r.attempts_used == k + 1,
                    "k=" + std::to_string(k) + " gave attempts=" + std::to_string(r.attempts_used));
        }

        for (int k = 4; k <= 6; ++k) {
            ProviderHub hub;
            hub.add(std::make_shared<Provider>(
                std::make_shared<ScriptedTextBackend>(
                    "dead", std::vector<Step>(static_cast<std::size_t>(k),
                                              ScriptedTextBackend::fail_transient())),
                nullptr, no_delay));
            Runner runner(hub, 1, true);
            TestCase tc;
            tc.id = "case";
            tc.parent_template_id = "T";
            tc.language = "en";
            tc.concern = "sexism";
            tc.prompt = "prompt";
            tc.oracle.kind = OracleKind::AnyOfKeywords;
            tc.oracle.keywords = {"x"};
            TestResult result = runner.run_case(tc, "dead");
            require(result.verdict == Verdict::Unprocessable,
                    "k=" + std::to_string(k) + " should be unprocessable");
        }
    });

    criterion(9, "aggregation arithmetic incl. the 64.3% zero-fault batch share", [] {
        auto batch_of = [](const std::string& concern, std::size_t passes, std::size_t fails,
                           std::size_t unprocessable) {
            TestBatch batch;
            batch.model_id = "m";
            batch.language = "en";
            batch.concern = concern;
            auto add = [&batch](Verdict v, std::size_t n) {
                for (std::size_t i = 0; i < n; ++i) {
                    TestResult r;
                    r.case_id = "c" + std::to_string(batch.results.size());
                    r.verdict = v;
                    batch.results.push_back(r);
                }
            };
            add(Verdict::Pass, passes);
            add(Verdict::Fail, fails);
            add(Verdict::Unprocessable, unprocessable);
            return batch;
        };

        BatchReport plain = aggregate(batch_of("a", 8, 2, 0));
        require(plain.pass_rate && *plain.pass_rate == 80.0, "8/2/0 pass rate != 80");
        require(plain.fault_rate == 0.0, "8/2/0 fault rate != 0");

        BatchReport faulty = aggregate(batch_of("b", 0, 0, 5));
        require(!faulty.pass_rate.has_value(), "0/0/5 pass rate should be undefined");
        require(faulty.fault_rate == 100.0, "0/0/5 fault rate != 100");

        BatchReport quarter = aggregate(batch_of("c", 2, 1, 1));
        require(quarter.fault_rate == 25.0, "appendix-style 25.0% batch not reproduced");

        std::vector<BatchReport> fixture;
        for (int i = 0; i < 9; ++i)
            fixture.push_back(aggregate(batch_of("z" + std::to_string(i), 9, 1, 0)));
        for (int i = 9; i < 12; ++i)
            fixture.push_back(aggregate(batch_of("z" + std::to_string(i), 8, 1, 1)));
        for (int i = 12; i < 14; ++i)
            fixture.push_back(aggregate(batch_of("z" + std::to_string(i), 5, 2, 3)));
        ReportBundle bundle = build_reports(fixture);
        require(std::abs(bundle.zero_fault_batch_share - 100.0 * 9 / 14) < 1e-12,
                "zero-fault share wrong");
        require(std::round(bundle.zero_fault_batch_share * 10) / 10 == 64.3,
                "zero-fault share does not round to 64.3");
        require(std::round(bundle.low_fault_batch_share * 10) / 10 == 21.4, "le10 share wrong");
        require(std::round(bundle.high_fault_batch_share * 10) / 10 == 14.3, "gt10 share wrong");
    });

    criterion(10, "Pearson report on a 4-model x 7-concern x 6-language log vs recomputation", [] {
        const std::vector<std::string> models = {"m1", "m2", "m3", "m4"};
        const std::vector<std::string> concerns = {"ageism",  "lgbtiqphobia", "politics",
                                                   "racism",  "religion",     "sexism",
                                                   "xenophobia"};
        const std::vector<std::string> languages = {"ca", "de", "en", "es", "fr", "lb"};

        std::map<std::string, std::map<std::string, double>> rates;  // lang -> key -> rate
        std::vector<BatchReport> batches;
        for (std::size_t li = 0; li < languages.size(); ++li)
            for (std::size_t mi = 0; mi < models.size(); ++mi)
                for (std::size_t ci = 0; ci < concerns.size(); ++ci) {
                    std::size_t passes = (5 * mi + 3 * ci + 2 * li * li) % 11 + 1;
                    std::size_t fails = (mi + 2 * ci + li) % 7 + 1;
                    TestBatch batch;
                    batch.model_id = models[mi];
                    batch.language = languages[li];
                    batch.concern = concerns[ci];
                    for (std::size_t i = 0; i < passes; ++i)
                        batch.results.push_back({"p" + std::to_string(i), models[mi],
                                                 Verdict::Pass, {}, 1});
                    for (std::size_t i = 0; i < fails; ++i)
                        batch.results.push_back({"f" + std::to_string(i), models[mi],
                                                 Verdict::Fail, {}, 1});
                    BatchReport report = aggregate(batch);
                    rates[languages[li]][models[mi] + "|" + concerns[ci]] = *report.pass_rate;
                    batches.push_back(report);
                }

        ReportBundle bundle = build_reports(batches);
        const CorrelationMatrix& matrix = bundle.pearson_by_language;
        require(matrix.size() == 6, "matrix size != 6");

        for (std::size_t i = 0; i < 6; ++i) {
            require(matrix.values[i][i] == 1.0, "diagonal != 1");
            for (std::size_t j = 0; j < 6; ++j) {
                require(std::abs(matrix.values[i][j] - matrix.values[j][i]) <= 1e-12,
                        "matrix not symmetric");
                require(matrix.values[i][j] >= -1.0 - 1e-12 && matrix.values[i][j] <= 1.0 + 1e-12,
                        "correlation out of range");
                if (i == j) continue;
                std::vector<double> x, y;
                for (const std::string& model : models)
                    for (const std::string& concern : concerns) {
                        x.push_back(rates[matrix.labels[i]].at(model + "|" + concern));
                        y.push_back(rates[matrix.labels[j]].at(model + "|" + concern));
                    }
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (std::size_t k = 0; k < x.size(); ++k) {
                    sx += x[k];
                    sy += y[k];
                    sxx += x[k] * x[k];
                    syy += y[k] * y[k];
                    sxy += x[k] * y[k];
                }
                double n = static_cast<double>(x.size());
                double expected = (n * sxy - sx * sy) / (std::sqrt(n * sxx - sx * sx) *
                                                         std::sqrt(n * syy - sy * sy));
                require(std::abs(matrix.values[i][j] - expected) < 1e-10,
                        "cell (" + matrix.labels[i] + "," + matrix.labels[j] +
                            ") differs from recomputation");
                require(matrix.n_pairs[i][j] == 28, "n_pairs != 28");
            }
        }
    });

    criterion(11, "determinism: two seeded mock runs produce byte-identical output trees", [] {
        fs::path base = fs::temp_directory_path() / "polybite_acceptance_runs";
        fs::remove_all(base);

        auto full_run = [&](const std::string& name) {
            fs::path out = base / name;
            fs::create_directories(out);

            RunConfig augment;
            augment.library_path = fixture_path();
            augment.mock = true;
            augment.seed = 20250810;
            augment.output_dir = out.string();
            augment.pipeline.translator_backend = "mock-translator";
            augment.pipeline.languages = {"es", "ca"};
            augment.pipeline.paraphrase_count = 1;
            int rc = cmd_augment(augment);
            require(rc == kExitOk, "augment exit " + std::to_string(rc));

            RunConfig run = augment;
            run.library_path = (out / "generated_library.json").string();
            run.models_under_test = {"mock-model-a", "mock-model-b"};
            rc = cmd_run(run);
            require(rc == kExitOk || rc == kExitPartial, "run exit " + std::to_string(rc));

            rc = cmd_report(run);
            require(rc == kExitOk, "report exit " + std::to_string(rc));

            RunConfig audit = augment;
            audit.audit_paraphrase_counts = {2, 5};
            rc = cmd_audit(audit);
            require(rc == kExitOk, "audit exit " + std::to_string(rc));
        };

        full_run("run_a");
        full_run("run_b");

        // manifests carry wall-clock timestamps and are excluded by design
        auto tree_a = tree_digest(base / "run_a", {"manifest.json"});
        auto tree_b = tree_digest(base / "run_b", {"manifest.json"});
        require(!tree_a.empty(), "no output files produced");
        require(tree_a.size() == tree_b.size(), "output trees differ in file count");
        for (const auto& [rel, bytes] : tree_a) {
            auto it = tree_b.find(rel);
            require(it != tree_b.end(), "missing file in second run: " + rel);
            require(it->second == bytes, "file differs between runs: " + rel);
        }
        require(tree_a.count("generated_library.json") == 1, "generated library missing");
        require(tree_a.count("run_log.jsonl") == 1, "run log missing");
        require(tree_a.count("report/bundle.json") == 1, "report bundle missing");
        require(tree_a.count("report/heatmap.svg") == 1, "heatmap SVG missing");
        require(tree_a.count("audit/audit_summary.csv") == 1, "audit summary missing");
        fs::remove_all(base);
    });

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - suite_start)
                             .count();
    std::printf("suite wall time: %lld ms (budget 60000 ms)\n",
                static_cast<long long>(elapsed));
    if (elapsed >= 60000) {
        std::printf("[FAIL] runtime budget exceeded\n");
        ++failures;
    }

    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", failures);
    return 1;
}
