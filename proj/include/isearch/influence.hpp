#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isearch/clustering.hpp"
#include "isearch/microdata.hpp"

namespace isearch {

/// Pure predicate over a family, named for reporting and error messages.
struct FamilyPredicate {
    std::string name;
    std::function<bool(const FamilyUnit&)> test;
};

struct CohortFilter {
    std::vector<FamilyPredicate> predicates;
    bool passes(const FamilyUnit& f) const;
};

namespace predicates {

FamilyPredicate children_count(std::size_t lo, std::size_t hi);
/// Every child's age recorded and inside [lo, hi]; true for childless
/// families.
FamilyPredicate child_ages(long lo, long hi);
FamilyPredicate father_age(long lo, long hi);
FamilyPredicate mother_age(long lo, long hi);
/// Both parents' disability indicator recorded and absent.
FamilyPredicate no_disability();
/// Named attribute recorded and inside [lo, hi] (see find_attribute).
FamilyPredicate attribute_in_range(const std::string& attribute, long lo, long hi);
/// All named attributes recorded.
FamilyPredicate attributes_observed(const std::vector<std::string>& attributes);
FamilyPredicate complete_family();

}

/// Families with the studied feature (n1) vs. without it (n2), both within
/// the restricted population. Disjoint by construction.
struct CohortPair {
    std::vector<FamilyUnit> n1;
    std::vector<FamilyUnit> n2;
};

CohortPair separate_groups(const std::vector<FamilyUnit>& families,
                           const FamilyPredicate& feature,
                           const CohortFilter& restrictions);

/// Named numeric attribute of a family (integer codes, years or dollars).
struct AttributeDef {
    std::string name;
    std::function<std::optional<long>(const FamilyUnit&)> get;
};

/// Registry lookup; throws ConfigError with the known names on a miss.
const AttributeDef& find_attribute(const std::string& name);
std::vector<std::string> attribute_names();

struct ValueWindow {
    long lo = 0;
    long hi = 0;
};

std::map<long, std::size_t> value_counts(const std::vector<FamilyUnit>& families,
                                         const AttributeDef& attr);

/// Convex hull [min, max] of the attribute values whose family count
/// reaches `threshold`. Throws DataError when no value qualifies.
ValueWindow favorable_window(const std::vector<FamilyUnit>& families,
                             const AttributeDef& attr, std::size_t threshold);

struct CohortClustering {
    ClusterModel model;
    std::vector<std::string> feature_names;
    std::vector<std::vector<std::size_t>> members; // per cluster, indices into the cohort
};

/// Feature matrix in raw units (codes/years/dollars); every feature must be
/// recorded on every family, else DataError naming the household.
Dataset extract_features(const std::vector<FamilyUnit>& families,
                         const std::vector<std::string>& features);

CohortClustering cluster_cohort(const std::vector<FamilyUnit>& cohort,
                                const std::vector<std::string>& features,
                                const ClusterParams& params,
                                unsigned threads = 1);

struct AttributeRange {
    std::string attribute;
    long lo = 0;
    long hi = 0;
};
using InvariantRanges = std::vector<AttributeRange>;

std::map<long, std::size_t> member_value_counts(const std::vector<FamilyUnit>& cohort,
                                                const std::vector<std::size_t>& members,
                                                const AttributeDef& attr);

/// Characteristic range per attribute over a cluster's members: the convex
/// hull of the values whose count reaches `fraction` of the most frequent
/// value's count (a count within 1e-9 of the threshold qualifies). Throws
/// DataError on an empty cluster or an attribute with no recorded values.
InvariantRanges extract_ranges(const std::vector<FamilyUnit>& cohort,
                               const std::vector<std::size_t>& members,
                               const std::vector<std::string>& attributes,
                               double fraction);

/// Indices into n2 of the families inside every range of `ranges`.
std::vector<std::size_t> build_prototype(const std::vector<FamilyUnit>& n2,
                                         const InvariantRanges& ranges);

struct PrototypeSet {
    std::vector<std::vector<std::size_t>> members; // per cluster
    std::vector<int> multiplicity;                 // per n2 family: how many prototypes hold it
};

/// Prototype groups may overlap; multiplicity records the overlap.
PrototypeSet build_prototypes(const std::vector<FamilyUnit>& n2,
                              const std::vector<InvariantRanges>& cluster_ranges);

/// How an attribute's values fall into histogram bins. `income` uses the
/// 11 standard income intervals; `codes` is one bin per integer code in
/// [code_min, code_max]. bin_of throws DataError outside the domain.
struct Binning {
    enum class Kind { income, codes };
    Kind kind = Kind::codes;
    long code_min = 0;
    long code_max = 0;

    static Binning income();
    static Binning codes(long lo, long hi);

    int bin_count() const;
    int bin_of(long value) const; // 0-based
    std::string label(int bin) const;
};

struct BinStat {
    std::string label;
    std::size_t cluster_count = 0;
    std::size_t prototype_count = 0;
    double cluster_pct = 0.0;
    double prototype_pct = 0.0;
};

struct ComparisonEntry {
    std::string attribute;
    std::size_t cluster = 0;
    std::vector<BinStat> bins;
    std::size_t cluster_total = 0;   // members with the attribute recorded
    std::size_t prototype_total = 0;
    std::size_t cluster_missing = 0;
    std::size_t prototype_missing = 0;
    std::optional<double> divergence; // absent when either side is empty
    bool exceeds_threshold = false;
};

/// Percentage histograms of one attribute over a cluster and its prototype
/// group, plus their total variation distance (half the absolute mass
/// difference, in [0, 1]). Members without the attribute are counted as
/// missing and excluded from the histogram.
ComparisonEntry compare_distributions(const std::vector<FamilyUnit>& cluster_cohort,
                                      const std::vector<std::size_t>& cluster_members,
                                      const std::vector<FamilyUnit>& prototype_cohort,
                                      const std::vector<std::size_t>& prototype_members,
                                      const AttributeDef& attr,
                                      const Binning& binning);

struct ComparisonSpec {
    std::string attribute;
    Binning binning;
};

/// Auto window: computed from the feature-positive restricted families with
/// the given count threshold. Fixed windows skip the computation.
struct WindowConfig {
    bool enabled = false;
    std::size_t threshold = 400;
    std::optional<ValueWindow> fixed_father;
    std::optional<ValueWindow> fixed_mother;
};

struct PipelineConfig {
    std::vector<std::string> inputs;
    std::string schema_path;
    RecordSchema schema;
    FamilyPredicate feature;
    CohortFilter restrictions;
    WindowConfig window;
    std::vector<std::string> clustering_features;
    ClusterParams params;
    std::vector<std::string> invariant_attributes;
    double range_fraction = 0.8;
    std::vector<ComparisonSpec> comparisons;
    double divergence_threshold = 0.1;
    unsigned threads = 1;
    std::string output_dir;
    nlohmann::json snapshot; // config file as parsed, for the run manifest

    /// Reads a pipeline config JSON (and the schema it references).
    /// Relative paths inside the config resolve against the working
    /// directory. Throws ConfigError on structural problems.
    static PipelineConfig load(const std::filesystem::path& path);
};

struct StepTiming {
    std::string name;
    double ms = 0.0;
};

struct ClusterValueCounts {
    std::string attribute;
    std::map<long, std::size_t> counts;
};

struct PipelineResult {
    std::size_t families_total = 0; // complete families derived from the inputs
    std::size_t restricted = 0;     // families passing every restriction (windows included)
    std::optional<ValueWindow> father_window;
    std::optional<ValueWindow> mother_window;
    CohortPair cohorts;
    CohortClustering clustering;
    std::vector<std::vector<ClusterValueCounts>> cluster_counts; // [cluster][invariant attribute]
    std::vector<InvariantRanges> ranges;                         // per cluster
    PrototypeSet prototypes;
    std::vector<ComparisonEntry> comparisons;
    std::vector<StepTiming> timings;
};

/// Full influence search: ingest -> separate -> cluster -> ranges ->
/// prototypes -> compare. Failures are rethrown with the step name
/// prefixed, e.g. "step 3 (cluster): ...".
PipelineResult run_pipeline(const PipelineConfig& config);

}
