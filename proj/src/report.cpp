#include "isearch/report.hpp"

#include <fstream>
#include <sstream>

#include "isearch/error.hpp"
#include "isearch/table.hpp"
#include "isearch/version.hpp"

namespace isearch {

using nlohmann::json;

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string digest_label(std::uint64_t digest) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                  static_cast<unsigned long long>(digest));
    return buf;
}

std::string text_digest(const std::string& text) {
    return digest_label(fnv1a64({reinterpret_cast<const unsigned char*>(text.data()),
                                 text.size()}));
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for digesting: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return text_digest(buf.str());
}

namespace {

// Every report file is created through this collector so the manifest
// cannot miss one.
class ReportFiles {
public:
    explicit ReportFiles(const std::filesystem::path& dir) : dir_(dir) {
        std::filesystem::create_directories(dir);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw DataError("cannot write report file: " + (dir_ / name).string());
        out << content;
        out.close();
        if (!out) throw DataError("failed writing report file: " + (dir_ / name).string());
        files_.push_back({name, text_digest(content)});
    }

    json manifest_outputs() const {
        json out = json::array();
        for (const auto& [name, digest] : files_)
            out.push_back({{"path", name}, {"digest", digest}});
        return out;
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

std::string display_center(const std::string& feature, double value) {
    // Natural display precision: dollars shown in units of 10^4 with one
    // decimal, everything else (years, codes) as whole numbers.
    if (feature.find("income") != std::string::npos)
        return format_fixed(value / 1e4, 1);
    return format_fixed(value, 0);
}

std::string pct(double v) { return format_fixed(v, 2); }

}

json write_report(const std::filesystem::path& dir, const PipelineResult& r,
                  const PipelineConfig& config) {
    ReportFiles files(dir);
    const std::size_t clusters = r.clustering.members.size();

    {
        std::ostringstream s;
        s << "metric\tvalue\n";
        s << "families_total\t" << r.families_total << "\n";
        s << "restricted\t" << r.restricted << "\n";
        s << "n1\t" << r.cohorts.n1.size() << "\n";
        s << "n2\t" << r.cohorts.n2.size() << "\n";
        s << "clusters\t" << clusters << "\n";
        if (r.father_window) {
            s << "father_window_lo\t" << r.father_window->lo << "\n";
            s << "father_window_hi\t" << r.father_window->hi << "\n";
        }
        if (r.mother_window) {
            s << "mother_window_lo\t" << r.mother_window->lo << "\n";
            s << "mother_window_hi\t" << r.mother_window->hi << "\n";
        }
        files.write("cohort_summary.tsv", s.str());
    }

    {
        std::ostringstream s;
        s << "cluster\tfeature\tcenter\tcenter_normalized\tcenter_display\n";
        for (std::size_t c = 0; c < clusters; ++c)
            for (std::size_t k = 0; k < r.clustering.feature_names.size(); ++k) {
                const auto& name = r.clustering.feature_names[k];
                const double v = r.clustering.model.centers(c, k);
                s << (c + 1) << "\t" << name << "\t" << format_full(v) << "\t"
                  << format_full(r.clustering.model.centers_normalized(c, k)) << "\t"
                  << display_center(name, v) << "\n";
            }
        files.write("centers.tsv", s.str());
    }

    {
        std::ostringstream s;
        s << "cluster\tcount\tpercent\n";
        const double n1 = static_cast<double>(r.cohorts.n1.size());
        for (std::size_t c = 0; c < clusters; ++c) {
            const auto count = r.clustering.members[c].size();
            s << (c + 1) << "\t" << count << "\t"
              << pct(n1 > 0 ? 100.0 * static_cast<double>(count) / n1 : 0.0) << "\n";
        }
        files.write("memberships.tsv", s.str());
    }

    {
        std::ostringstream s;
        s << "cluster\tattribute\tvalue\tcount\tpercent\n";
        for (std::size_t c = 0; c < r.cluster_counts.size(); ++c) {
            const double size = static_cast<double>(r.clustering.members[c].size());
            for (const auto& vc : r.cluster_counts[c])
                for (const auto& [value, count] : vc.counts)
                    s << (c + 1) << "\t" << vc.attribute << "\t" << value << "\t" << count
                      << "\t" << pct(100.0 * static_cast<double>(count) / size) << "\n";
        }
        files.write("age_counts.tsv", s.str());
    }

    {
        std::ostringstream s;
        s << "cluster\tattribute\tlo\thi\n";
        for (std::size_t c = 0; c < r.ranges.size(); ++c)
            for (const auto& range : r.ranges[c])
                s << (c + 1) << "\t" << range.attribute << "\t" << range.lo << "\t"
                  << range.hi << "\n";
        files.write("ranges.tsv", s.str());
    }

    {
        std::ostringstream s;
        s << "cluster\tsize\n";
        for (std::size_t c = 0; c < r.prototypes.members.size(); ++c)
            s << (c + 1) << "\t" << r.prototypes.members[c].size() << "\n";
        files.write("prototypes.tsv", s.str());

        std::map<int, std::size_t> overlap;
        for (const int m : r.prototypes.multiplicity) ++overlap[m];
        std::ostringstream o;
        o << "prototypes_containing\tfamilies\n";
        for (const auto& [m, count] : overlap) o << m << "\t" << count << "\n";
        files.write("prototype_overlap.tsv", o.str());
    }

    for (const auto& spec : config.comparisons) {
        std::ostringstream s;
        s << "cluster\tbin\tlabel\tcluster_count\tcluster_pct\tprototype_count"
          << "\tprototype_pct\n";
        for (const auto& e : r.comparisons) {
            if (e.attribute != spec.attribute) continue;
            for (std::size_t b = 0; b < e.bins.size(); ++b) {
                const auto& bin = e.bins[b];
                s << (e.cluster + 1) << "\t" << (b + 1) << "\t" << bin.label << "\t"
                  << bin.cluster_count << "\t" << pct(bin.cluster_pct) << "\t"
                  << bin.prototype_count << "\t" << pct(bin.prototype_pct) << "\n";
            }
        }
        files.write("comparison_" + spec.attribute + ".tsv", s.str());
    }

    {
        std::ostringstream s;
        s << "attribute\tcluster\tdivergence\texceeds_threshold\tempty_side\n";
        for (const auto& e : r.comparisons) {
            s << e.attribute << "\t" << (e.cluster + 1) << "\t";
            if (e.divergence)
                s << format_full(*e.divergence) << "\t" << (e.exceeds_threshold ? 1 : 0)
                  << "\t0\n";
            else
                s << "NA\t0\t1\n";
        }
        files.write("divergence.tsv", s.str());
    }

    json manifest;
    manifest["tool"] = kToolName;
    manifest["version"] = kVersion;
    manifest["config"] = config.snapshot;
    json inputs = json::array();
    for (const auto& path : config.inputs)
        inputs.push_back({{"path", path}, {"digest", file_digest(path)}});
    inputs.push_back({{"path", config.schema_path},
                      {"digest", file_digest(config.schema_path)}});
    manifest["inputs"] = std::move(inputs);
    manifest["outputs"] = files.manifest_outputs();
    json steps = json::array();
    for (const auto& t : r.timings)
        steps.push_back({{"name", t.name}, {"ms", t.ms}});
    manifest["steps"] = std::move(steps);

    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + (dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
    out.close();
    if (!out) throw DataError("failed writing manifest");
    return manifest;
}

bool verify_report(const std::filesystem::path& dir, std::string* problem) {
    std::ifstream in(dir / "manifest.json");
    if (!in) {
        if (problem) *problem = "manifest.json is missing";
        return false;
    }
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        if (problem) *problem = std::string("manifest.json unreadable: ") + e.what();
        return false;
    }
    try {
        for (const auto& entry : manifest.at("outputs")) {
            const auto path = entry.at("path").get<std::string>();
            const auto want = entry.at("digest").get<std::string>();
            const auto got = file_digest(dir / path);
            if (got != want) {
                if (problem)
                    *problem = path + ": digest " + got + " does not match manifest " + want;
                return false;
            }
        }
    } catch (const std::exception& e) {
        if (problem) *problem = e.what();
        return false;
    }
    return true;
}

void write_cluster_outputs(const std::filesystem::path& dir,
                           const std::vector<std::string>& columns,
                           const ClusterModel& model) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "centers.tsv", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "centers.tsv").string());
        out << "cluster";
        for (const auto& c : columns) out << "\t" << c;
        out << "\n";
        for (std::size_t c = 0; c < model.cluster_count(); ++c) {
            out << (c + 1);
            for (std::size_t k = 0; k < model.centers.dim(); ++k)
                out << "\t" << format_full(model.centers(c, k));
            out << "\n";
        }
    }
    {
        std::ofstream out(dir / "assignment.tsv", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "assignment.tsv").string());
        out << "row\tcluster\n";
        for (std::size_t i = 0; i < model.assignment.size(); ++i)
            out << (i + 1) << "\t" << (model.assignment[i] + 1) << "\n";
    }
}

}
