#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "isearch/influence.hpp"
#include "isearch/microdata.hpp"
#include "isearch/synth.hpp"

using namespace isearch;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Runs the installed command line under a shell; returns its exit code and
// captures the combined output.
int run_cli(const std::string& tail, std::string* output = nullptr) {
    static int counter = 0;
    const auto capture =
        fs::temp_directory_path() / ("isearch_cli_out_" + std::to_string(counter++));
    const std::string cmd =
        std::string(ISEARCH_CLI_PATH) + " " + tail + " > " + capture.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (output) *output = slurp(capture);
    fs::remove(capture);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

int run_shell(const std::string& cmd, std::string* output = nullptr) {
    static int counter = 0;
    const auto capture =
        fs::temp_directory_path() / ("isearch_sh_out_" + std::to_string(counter++));
    const int rc = std::system((cmd + " > " + capture.string() + " 2>&1").c_str());
    if (output) *output = slurp(capture);
    fs::remove(capture);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

}

TEST_CASE("the generator is deterministic in its seed") {
    const auto a = fresh_dir("isearch_synth_a");
    const auto b = fresh_dir("isearch_synth_b");
    const auto c = fresh_dir("isearch_synth_c");
    SynthParams params;
    params.seed = 11;
    params.families_per_blob = 25;
    params.childless = 40;
    params.noise = 15;
    write_synth_dataset(a, params);
    write_synth_dataset(b, params);
    params.seed = 12;
    write_synth_dataset(c, params);

    CHECK(slurp(a / "microdata.dat") == slurp(b / "microdata.dat"));
    CHECK(slurp(a / "schema.json") == slurp(b / "schema.json"));
    CHECK(slurp(a / "config.json") == slurp(b / "config.json"));
    CHECK(slurp(a / "microdata.dat") != slurp(c / "microdata.dat"));
}

TEST_CASE("generated bundles parse under their own schema") {
    const auto dir = fresh_dir("isearch_synth_parse");
    SynthParams params;
    params.seed = 2;
    params.families_per_blob = 20;
    params.childless = 30;
    params.noise = 10;
    write_synth_dataset(dir, params);

    const auto schema = RecordSchema::load((dir / "schema.json").string());
    const auto data = parse_microdata_file((dir / "microdata.dat").string(), schema);
    CHECK(data.households.size() == 3 * 20 + 30 + 10);
    CHECK(data.persons.size() > data.households.size());

    const auto families = derive_families(data);
    CHECK(families.size() >= 3 * 20 + 30); // noise households mostly don't qualify
    for (const auto& f : families) {
        CHECK(f.father.sex == Sex::male);
        CHECK(f.mother.sex == Sex::female);
    }
}

TEST_CASE("an empty bundle is still well-formed") {
    const auto dir = fresh_dir("isearch_synth_empty");
    write_synth_dataset(dir, {7, 0, 0, 0});
    const auto schema = RecordSchema::load((dir / "schema.json").string());
    const auto data = parse_microdata_file((dir / "microdata.dat").string(), schema);
    CHECK(data.households.empty());
    CHECK(data.persons.empty());
}

TEST_CASE("the planted blobs come back as exactly three clusters") {
    const auto dir = fresh_dir("isearch_synth_recover");
    write_synth_dataset(dir, {});
    const auto saved = fs::current_path();
    fs::current_path(dir);
    auto config = PipelineConfig::load("config.json");
    const auto result = run_pipeline(config);
    fs::current_path(saved);

    CHECK(result.clustering.members.size() == 3);
    for (const auto& m : result.clustering.members) CHECK(m.size() >= 50);

    // Feature 0 is the father's age; sorted, the centers should land on the
    // three generated modes.
    std::vector<double> ages;
    const auto& centers = result.clustering.model.centers;
    for (std::size_t c = 0; c < centers.size(); ++c) ages.push_back(centers(c, 0));
    std::sort(ages.begin(), ages.end());
    REQUIRE(ages.size() == 3);
    const double planted[3] = {27.0, 32.0, 36.0};
    for (int i = 0; i < 3; ++i) CHECK(std::abs(ages[i] - planted[i]) <= 2.5);
}

TEST_CASE("command line: usage and version") {
    std::string out;
    CHECK(run_cli("--help", &out) == 0);
    CHECK(out.find("cluster") != std::string::npos);
    CHECK(out.find("influence") != std::string::npos);
    CHECK(out.find("synth") != std::string::npos);

    CHECK(run_cli("--version", &out) == 0);
    CHECK(out.find("isearch 0.1.0") != std::string::npos);

    CHECK(run_cli("frobnicate", &out) == 1);
    CHECK(run_cli("", &out) == 1); // a subcommand is required
}

TEST_CASE("command line: cluster") {
    const auto dir = fresh_dir("isearch_cli_cluster");
    {
        std::ofstream csv(dir / "two.csv");
        csv << "x,y\n";
        csv << "0.10,0.12\n0.12,0.10\n0.11,0.11\n0.09,0.10\n";
        csv << "0.90,0.88\n0.88,0.91\n0.91,0.90\n0.92,0.89\n";
    }
    std::string out;
    const auto input = (dir / "two.csv").string();
    CHECK(run_cli("cluster --input " + input + " --out " + (dir / "r").string(), &out) == 0);
    CHECK(out.find("clusters: 2") != std::string::npos);
    CHECK(fs::exists(dir / "r" / "centers.tsv"));
    CHECK(fs::exists(dir / "r" / "assignment.tsv"));

    SUBCASE("a bad radius is a usage error before any input is read") {
        CHECK(run_cli("cluster --input /no/such/file.csv --radius -0.5", &out) == 1);
        CHECK(run_cli("cluster --input /no/such/file.csv --radius 0", &out) == 1);
    }
    SUBCASE("a missing input file is a data error") {
        CHECK(run_cli("cluster --input /no/such/file.csv", &out) == 2);
        CHECK(out.find("/no/such/file.csv") != std::string::npos);
    }
    SUBCASE("a non-numeric table is a data error naming the cell") {
        std::ofstream bad(dir / "bad.csv");
        bad << "x,y\n1,2\n3,oops\n";
        bad.close();
        CHECK(run_cli("cluster --input " + (dir / "bad.csv").string(), &out) == 2);
        CHECK(out.find("bad.csv:3") != std::string::npos);
        CHECK(out.find("'y'") != std::string::npos);
    }
}

TEST_CASE("command line: synth then influence") {
    const auto dir = fresh_dir("isearch_cli_pipeline");
    std::string out;
    CHECK(run_cli("synth --out " + dir.string() +
                      " --seed 9 --families-per-blob 30 --childless 50 --noise 12",
                  &out) == 0);
    CHECK(fs::exists(dir / "microdata.dat"));

    CHECK(run_shell("cd " + dir.string() + " && " + ISEARCH_CLI_PATH +
                        " influence --config config.json",
                    &out) == 0);
    CHECK(out.find("clusters:") != std::string::npos);
    CHECK(fs::exists(dir / "report" / "manifest.json"));

    SUBCASE("a missing config is a usage error") {
        CHECK(run_cli("influence --config /no/such/config.json", &out) == 1);
        CHECK(out.find("/no/such/config.json") != std::string::npos);
    }
    SUBCASE("a config pointing at missing data is a data error") {
        auto j = nlohmann::json::parse(std::ifstream(dir / "config.json"));
        j["inputs"] = {"vanished.dat"};
        std::ofstream(dir / "broken.json") << j.dump(2);
        CHECK(run_shell("cd " + dir.string() + " && " + ISEARCH_CLI_PATH +
                            " influence --config broken.json",
                        &out) == 2);
        CHECK(out.find("step 0 (ingest)") != std::string::npos);
        CHECK(out.find("vanished.dat") != std::string::npos);
    }
}
