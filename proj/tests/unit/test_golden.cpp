#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "polybite/app.hpp"
#include "polybite/config.hpp"

using namespace polybite;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

// The golden tree was produced once by the seeded mock run below and
// reviewed by hand; any behavioral drift in the pipeline, runner, or report
// writers shows up as a byte diff here.
TEST_CASE("seeded mock run reproduces the reviewed golden file set") {
    const fs::path golden = fs::path(POLYBITE_FIXTURE_DIR) / "golden";
    const fs::path out = fs::temp_directory_path() / "polybite_golden_check";
    fs::remove_all(out);
    fs::create_directories(out);

    RunConfig augment;
    augment.library_path = std::string(POLYBITE_FIXTURE_DIR) + "/fixture_library.json";
    augment.mock = true;
    augment.seed = 1337;
    augment.output_dir = out.string();
    augment.pipeline.translator_backend = "mock-translator";
    augment.pipeline.languages = {"es", "ca"};
    augment.pipeline.paraphrase_count = 1;
    REQUIRE(cmd_augment(augment) == kExitOk);

    RunConfig run = augment;
    run.library_path = (out / "generated_library.json").string();
    run.models_under_test = {"mock-a", "mock-b"};
    int run_rc = cmd_run(run);
    REQUIRE((run_rc == kExitOk || run_rc == kExitPartial));
    REQUIRE(cmd_report(run) == kExitOk);

    CHECK(slurp(out / "generated_library.json") == slurp(golden / "generated_library.json"));
    CHECK(slurp(out / "run_log.jsonl") == slurp(golden / "run_log.jsonl"));
    for (const auto& entry : fs::directory_iterator(golden / "report")) {
        const std::string name = entry.path().filename().string();
        INFO(name);
        CHECK(slurp(out / "report" / name) == slurp(entry.path()));
    }
    fs::remove_all(out);
}
