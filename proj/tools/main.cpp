#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "isearch/clustering.hpp"
#include "isearch/error.hpp"
#include "isearch/influence.hpp"
#include "isearch/report.hpp"
#include "isearch/synth.hpp"
#include "isearch/table.hpp"
#include "isearch/version.hpp"

namespace {

// Exit codes: 0 success, 1 usage/config, 2 bad input data, 3 internal.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct ClusterArgs {
    std::string input;
    std::string out = ".";
    std::string delimiter = ",";
    isearch::ClusterParams params;
    unsigned threads = 1;
};

int run_cluster(const ClusterArgs& args) {
    const auto table = isearch::read_numeric_table_file(args.input, args.delimiter[0]);
    auto data = isearch::Dataset::from_rows(table.rows);
    if (data.empty()) throw isearch::DataError(args.input + ": table has no data rows");
    const auto model = isearch::cluster(data, args.params, args.threads);
    isearch::write_cluster_outputs(args.out, table.columns, model);
    std::cout << "clusters: " << model.cluster_count() << "\n";
    std::cout << "sizes:";
    for (const auto s : model.cluster_sizes()) std::cout << " " << s;
    std::cout << "\n";
    std::cout << "wrote " << (std::filesystem::path(args.out) / "centers.tsv").string()
              << " and " << (std::filesystem::path(args.out) / "assignment.tsv").string()
              << "\n";
    return 0;
}

struct InfluenceArgs {
    std::string config;
    std::string out;
    unsigned threads = 0; // 0 = take the config's value
};

int run_influence(const InfluenceArgs& args) {
    auto config = isearch::PipelineConfig::load(args.config);
    if (args.threads > 0) config.threads = args.threads;
    std::string out = args.out.empty() ? config.output_dir : args.out;
    if (out.empty())
        throw isearch::ConfigError(
            "no output directory: pass --out or set output_dir in the config");

    const auto result = isearch::run_pipeline(config);
    isearch::write_report(out, result, config);
    std::string problem;
    if (!isearch::verify_report(out, &problem))
        throw isearch::Error("report verification failed: " + problem);

    std::cout << "families: " << result.families_total
              << "  restricted: " << result.restricted << "  n1: " << result.cohorts.n1.size()
              << "  n2: " << result.cohorts.n2.size() << "\n";
    if (result.father_window)
        std::cout << "father window: [" << result.father_window->lo << ", "
                  << result.father_window->hi << "]  mother window: ["
                  << result.mother_window->lo << ", " << result.mother_window->hi << "]\n";
    std::cout << "clusters: " << result.clustering.members.size() << "  sizes:";
    for (const auto& m : result.clustering.members) std::cout << " " << m.size();
    std::cout << "\n";
    std::cout << "report: " << out << "\n";
    return 0;
}

}

int main(int argc, char** argv) {
    CLI::App app{"subtractive clustering and influence search over census-style microdata"};
    app.set_version_flag("--version",
                         std::string(isearch::kToolName) + " " + isearch::kVersion);
    app.require_subcommand(1);

    ClusterArgs cargs;
    auto* cluster_cmd =
        app.add_subcommand("cluster", "cluster the rows of a delimited numeric table");
    cluster_cmd->add_option("--input", cargs.input, "numeric table with a header row")
        ->required();
    cluster_cmd->add_option("--out", cargs.out, "output directory")
        ->capture_default_str();
    cluster_cmd->add_option("--delimiter", cargs.delimiter, "cell delimiter")
        ->check(CLI::Validator(
            [](std::string& s) {
                return s.size() == 1 ? std::string() : std::string("must be one character");
            },
            "CHAR"))
        ->capture_default_str();
    cluster_cmd
        ->add_option("--radius", cargs.params.cluster_radius,
                     "cluster radius in normalized units")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cluster_cmd->add_option("--quash", cargs.params.quash_factor, "subtraction kernel widening")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cluster_cmd->add_option("--accept", cargs.params.accept_ratio, "acceptance ratio")
        ->capture_default_str();
    cluster_cmd->add_option("--reject", cargs.params.reject_ratio, "rejection ratio")
        ->capture_default_str();
    cluster_cmd->add_option("--max-centers", cargs.params.max_centers,
                            "cap on accepted centers (0 = point count)")
        ->capture_default_str();
    cluster_cmd->add_option("--threads", cargs.threads, "worker threads for the potentials")
        ->capture_default_str();

    InfluenceArgs iargs;
    auto* influence_cmd = app.add_subcommand(
        "influence", "run the full influence search pipeline from a config file");
    influence_cmd->add_option("--config", iargs.config, "pipeline config JSON")->required();
    influence_cmd->add_option("--out", iargs.out,
                              "report directory (overrides the config's output_dir)");
    influence_cmd->add_option("--threads", iargs.threads,
                              "worker threads (overrides the config)");

    isearch::SynthParams sargs;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand(
        "synth", "generate a synthetic microdata bundle with planted structure");
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--seed", sargs.seed, "generator seed")->capture_default_str();
    synth_cmd
        ->add_option("--families-per-blob", sargs.families_per_blob,
                     "families with infants per planted blob")
        ->capture_default_str();
    synth_cmd->add_option("--childless", sargs.childless, "childless couples")
        ->capture_default_str();
    synth_cmd->add_option("--noise", sargs.noise, "filter-fodder households")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (cluster_cmd->parsed()) {
            cargs.params.validate();
            return run_cluster(cargs);
        }
        if (influence_cmd->parsed()) return run_influence(iargs);
        const auto out = isearch::write_synth_dataset(synth_out, sargs);
        std::cout << "wrote " << out.microdata.string() << "\n";
        std::cout << "wrote " << out.schema.string() << "\n";
        std::cout << "wrote " << out.config.string() << "\n";
        return 0;
    } catch (const isearch::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const isearch::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
