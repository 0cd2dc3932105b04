#include "isearch/influence.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "isearch/error.hpp"

namespace isearch {

using nlohmann::json;

bool CohortFilter::passes(const FamilyUnit& f) const {
    for (const auto& p : predicates)
        if (!p.test(f)) return false;
    return true;
}

namespace predicates {

FamilyPredicate children_count(std::size_t lo, std::size_t hi) {
    return {"children_count[" + std::to_string(lo) + "," + std::to_string(hi) + "]",
            [lo, hi](const FamilyUnit& f) {
                return f.children.size() >= lo && f.children.size() <= hi;
            }};
}

FamilyPredicate child_ages(long lo, long hi) {
    return {"child_ages[" + std::to_string(lo) + "," + std::to_string(hi) + "]",
            [lo, hi](const FamilyUnit& f) {
                for (const auto& c : f.children)
                    if (!c.age || *c.age < lo || *c.age > hi) return false;
                return true;
            }};
}

FamilyPredicate attribute_in_range(const std::string& attribute, long lo, long hi) {
    const AttributeDef& def = find_attribute(attribute);
    return {attribute + "[" + std::to_string(lo) + "," + std::to_string(hi) + "]",
            [&def, lo, hi](const FamilyUnit& f) {
                const auto v = def.get(f);
                return v && *v >= lo && *v <= hi;
            }};
}

FamilyPredicate father_age(long lo, long hi) { return attribute_in_range("father_age", lo, hi); }
FamilyPredicate mother_age(long lo, long hi) { return attribute_in_range("mother_age", lo, hi); }

FamilyPredicate no_disability() {
    return {"no_disability", [](const FamilyUnit& f) {
                return f.father.disability && !*f.father.disability &&
                       f.mother.disability && !*f.mother.disability;
            }};
}

FamilyPredicate attributes_observed(const std::vector<std::string>& attributes) {
    std::vector<const AttributeDef*> defs;
    defs.reserve(attributes.size());
    for (const auto& a : attributes) defs.push_back(&find_attribute(a));
    return {"attributes_observed", [defs](const FamilyUnit& f) {
                for (const auto* d : defs)
                    if (!d->get(f)) return false;
                return true;
            }};
}

FamilyPredicate complete_family() {
    // derive_families only produces complete families; kept so configs can
    // state the requirement explicitly.
    return {"complete_family", [](const FamilyUnit&) { return true; }};
}

}

CohortPair separate_groups(const std::vector<FamilyUnit>& families,
                           const FamilyPredicate& feature,
                           const CohortFilter& restrictions) {
    CohortPair out;
    for (const auto& f : families) {
        if (!restrictions.passes(f)) continue;
        if (feature.test(f))
            out.n1.push_back(f);
        else
            out.n2.push_back(f);
    }
    return out;
}

namespace {

std::vector<AttributeDef> make_registry() {
    using F = FamilyUnit;
    return {
        {"father_age", [](const F& f) { return f.father.age; }},
        {"mother_age", [](const F& f) { return f.mother.age; }},
        {"father_education", [](const F& f) { return f.father.education; }},
        {"mother_education", [](const F& f) { return f.mother.education; }},
        {"father_income", [](const F& f) { return f.father.total_income; }},
        {"home_ownership", [](const F& f) { return f.household.home_ownership; }},
        {"building_type", [](const F& f) { return f.household.building_type; }},
        {"vehicles", [](const F& f) { return f.household.vehicles; }},
        {"commercial_on_property",
         [](const F& f) { return f.household.commercial_on_property; }},
        {"father_class_of_worker", [](const F& f) { return f.father.class_of_worker; }},
        {"mother_class_of_worker", [](const F& f) { return f.mother.class_of_worker; }},
        {"father_ancestry", [](const F& f) { return f.father.ancestry; }},
        {"mother_ancestry", [](const F& f) { return f.mother.ancestry; }},
    };
}

const std::vector<AttributeDef>& registry() {
    static const std::vector<AttributeDef> defs = make_registry();
    return defs;
}

}

const AttributeDef& find_attribute(const std::string& name) {
    for (const auto& d : registry())
        if (d.name == name) return d;
    std::string known;
    for (const auto& d : registry()) {
        if (!known.empty()) known += ", ";
        known += d.name;
    }
    throw ConfigError("unknown attribute '" + name + "' (known: " + known + ")");
}

std::vector<std::string> attribute_names() {
    std::vector<std::string> out;
    for (const auto& d : registry()) out.push_back(d.name);
    return out;
}

std::map<long, std::size_t> value_counts(const std::vector<FamilyUnit>& families,
                                         const AttributeDef& attr) {
    std::map<long, std::size_t> counts;
    for (const auto& f : families)
        if (const auto v = attr.get(f)) ++counts[*v];
    return counts;
}

ValueWindow favorable_window(const std::vector<FamilyUnit>& families,
                             const AttributeDef& attr, std::size_t threshold) {
    const auto counts = value_counts(families, attr);
    bool any = false;
    ValueWindow w{0, 0};
    for (const auto& [value, count] : counts) {
        if (count < threshold) continue;
        if (!any) {
            w.lo = w.hi = value;
            any = true;
        } else {
            w.hi = value; // counts is ordered, so the last qualifying value wins
        }
    }
    if (!any)
        throw DataError("favorable_window: no " + attr.name + " value reaches a count of " +
                        std::to_string(threshold));
    return w;
}

Dataset extract_features(const std::vector<FamilyUnit>& families,
                         const std::vector<std::string>& features) {
    if (features.empty()) throw ConfigError("no clustering features configured");
    std::vector<const AttributeDef*> defs;
    defs.reserve(features.size());
    for (const auto& name : features) defs.push_back(&find_attribute(name));

    Dataset data(features.size());
    std::vector<double> row(features.size());
    for (const auto& f : families) {
        for (std::size_t k = 0; k < defs.size(); ++k) {
            const auto v = defs[k]->get(f);
            if (!v)
                throw DataError("household " + f.household.id +
                                ": clustering feature '" + features[k] + "' is missing");
            row[k] = static_cast<double>(*v);
        }
        data.add_row(row);
    }
    return data;
}

CohortClustering cluster_cohort(const std::vector<FamilyUnit>& cohort,
                                const std::vector<std::string>& features,
                                const ClusterParams& params, unsigned threads) {
    if (cohort.empty()) throw DataError("cohort is empty, nothing to cluster");
    CohortClustering cc;
    cc.feature_names = features;
    cc.model = cluster(extract_features(cohort, features), params, threads);
    cc.members.assign(cc.model.cluster_count(), {});
    for (std::size_t i = 0; i < cc.model.assignment.size(); ++i)
        cc.members[cc.model.assignment[i]].push_back(i);
    return cc;
}

std::map<long, std::size_t> member_value_counts(const std::vector<FamilyUnit>& cohort,
                                                const std::vector<std::size_t>& members,
                                                const AttributeDef& attr) {
    std::map<long, std::size_t> counts;
    for (const std::size_t i : members)
        if (const auto v = attr.get(cohort[i])) ++counts[*v];
    return counts;
}

InvariantRanges extract_ranges(const std::vector<FamilyUnit>& cohort,
                               const std::vector<std::size_t>& members,
                               const std::vector<std::string>& attributes,
                               double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ConfigError("range fraction must lie in (0, 1]");
    if (members.empty()) throw DataError("extract_ranges: empty cluster");

    InvariantRanges out;
    for (const auto& name : attributes) {
        const auto& attr = find_attribute(name);
        const auto counts = member_value_counts(cohort, members, attr);
        if (counts.empty())
            throw DataError("extract_ranges: no recorded '" + name + "' values in the cluster");
        std::size_t max_count = 0;
        for (const auto& [value, count] : counts) max_count = std::max(max_count, count);
        // A count within 1e-9 of fraction*max qualifies, so exact integer
        // thresholds survive binary rounding of the product.
        const double threshold = fraction * static_cast<double>(max_count) - 1e-9;
        AttributeRange r{name, 0, 0};
        bool any = false;
        for (const auto& [value, count] : counts) {
            if (static_cast<double>(count) < threshold) continue;
            if (!any) {
                r.lo = r.hi = value;
                any = true;
            } else {
                r.hi = value;
            }
        }
        out.push_back(r);
    }
    return out;
}

std::vector<std::size_t> build_prototype(const std::vector<FamilyUnit>& n2,
                                         const InvariantRanges& ranges) {
    std::vector<const AttributeDef*> defs;
    defs.reserve(ranges.size());
    for (const auto& r : ranges) defs.push_back(&find_attribute(r.attribute));

    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n2.size(); ++i) {
        bool inside = true;
        for (std::size_t k = 0; k < ranges.size(); ++k) {
            const auto v = defs[k]->get(n2[i]);
            if (!v || *v < ranges[k].lo || *v > ranges[k].hi) {
                inside = false;
                break;
            }
        }
        if (inside) out.push_back(i);
    }
    return out;
}

PrototypeSet build_prototypes(const std::vector<FamilyUnit>& n2,
                              const std::vector<InvariantRanges>& cluster_ranges) {
    PrototypeSet set;
    set.multiplicity.assign(n2.size(), 0);
    for (const auto& ranges : cluster_ranges) {
        auto members = build_prototype(n2, ranges);
        for (const std::size_t i : members) ++set.multiplicity[i];
        set.members.push_back(std::move(members));
    }
    return set;
}

Binning Binning::income() {
    Binning b;
    b.kind = Kind::income;
    return b;
}

Binning Binning::codes(long lo, long hi) {
    if (hi < lo) throw ConfigError("code binning needs min <= max");
    Binning b;
    b.kind = Kind::codes;
    b.code_min = lo;
    b.code_max = hi;
    return b;
}

int Binning::bin_count() const {
    return kind == Kind::income ? kIncomeBinCount
                                : static_cast<int>(code_max - code_min + 1);
}

int Binning::bin_of(long value) const {
    if (kind == Kind::income) return income_bin(value) - 1;
    if (value < code_min || value > code_max)
        throw DataError("code " + std::to_string(value) + " outside the binning domain [" +
                        std::to_string(code_min) + ", " + std::to_string(code_max) + "]");
    return static_cast<int>(value - code_min);
}

std::string Binning::label(int bin) const {
    if (kind == Kind::income) return income_bin_label(bin + 1);
    return std::to_string(code_min + bin);
}

ComparisonEntry compare_distributions(const std::vector<FamilyUnit>& cluster_cohort,
                                      const std::vector<std::size_t>& cluster_members,
                                      const std::vector<FamilyUnit>& prototype_cohort,
                                      const std::vector<std::size_t>& prototype_members,
                                      const AttributeDef& attr,
                                      const Binning& binning) {
    ComparisonEntry e;
    e.attribute = attr.name;
    e.bins.resize(static_cast<std::size_t>(binning.bin_count()));
    for (std::size_t b = 0; b < e.bins.size(); ++b)
        e.bins[b].label = binning.label(static_cast<int>(b));

    auto tally = [&](const std::vector<FamilyUnit>& cohort,
                     const std::vector<std::size_t>& members, bool cluster_side) {
        std::size_t total = 0, missing = 0;
        for (const std::size_t i : members) {
            const auto v = attr.get(cohort[i]);
            if (!v) {
                ++missing;
                continue;
            }
            const auto b = static_cast<std::size_t>(binning.bin_of(*v));
            if (cluster_side)
                ++e.bins[b].cluster_count;
            else
                ++e.bins[b].prototype_count;
            ++total;
        }
        return std::pair{total, missing};
    };
    std::tie(e.cluster_total, e.cluster_missing) = tally(cluster_cohort, cluster_members, true);
    std::tie(e.prototype_total, e.prototype_missing) =
        tally(prototype_cohort, prototype_members, false);

    for (auto& b : e.bins) {
        if (e.cluster_total > 0)
            b.cluster_pct = 100.0 * static_cast<double>(b.cluster_count) /
                            static_cast<double>(e.cluster_total);
        if (e.prototype_total > 0)
            b.prototype_pct = 100.0 * static_cast<double>(b.prototype_count) /
                              static_cast<double>(e.prototype_total);
    }
    if (e.cluster_total > 0 && e.prototype_total > 0) {
        double acc = 0.0;
        for (const auto& b : e.bins)
            acc += std::abs(static_cast<double>(b.cluster_count) / static_cast<double>(e.cluster_total) -
                            static_cast<double>(b.prototype_count) / static_cast<double>(e.prototype_total));
        e.divergence = acc / 2.0;
    }
    return e;
}

namespace {

FamilyPredicate predicate_from_json(const json& j, const std::string& origin) {
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError(origin + ": each predicate needs a 'kind'");
    const auto kind = j.at("kind").get<std::string>();
    auto range = [&](long def_lo, long def_hi) {
        return std::pair<long, long>{j.value("min", def_lo), j.value("max", def_hi)};
    };
    if (kind == "children_count") {
        const auto [lo, hi] = range(0, std::numeric_limits<long>::max());
        if (lo < 0 || hi < lo)
            throw ConfigError(origin + ": children_count needs 0 <= min <= max");
        return predicates::children_count(static_cast<std::size_t>(lo),
                                          static_cast<std::size_t>(hi));
    }
    if (kind == "child_ages") {
        const auto [lo, hi] = range(0, std::numeric_limits<long>::max());
        return predicates::child_ages(lo, hi);
    }
    if (kind == "father_age" || kind == "mother_age") {
        const auto [lo, hi] = range(0, std::numeric_limits<long>::max());
        return kind == "father_age" ? predicates::father_age(lo, hi)
                                    : predicates::mother_age(lo, hi);
    }
    if (kind == "no_disability") return predicates::no_disability();
    if (kind == "complete_family") return predicates::complete_family();
    if (kind == "attribute_range") {
        if (!j.contains("attribute"))
            throw ConfigError(origin + ": attribute_range needs an 'attribute'");
        const auto [lo, hi] = range(std::numeric_limits<long>::min(),
                                    std::numeric_limits<long>::max());
        return predicates::attribute_in_range(j.at("attribute").get<std::string>(), lo, hi);
    }
    throw ConfigError(origin + ": unknown predicate kind '" + kind +
                      "' (known: children_count, child_ages, father_age, mother_age, "
                      "no_disability, complete_family, attribute_range)");
}

Binning binning_from_json(const json& j, const std::string& origin) {
    if (j.is_string()) {
        if (j.get<std::string>() == "income") return Binning::income();
        throw ConfigError(origin + ": unknown binning '" + j.get<std::string>() +
                          "' (use \"income\" or {\"codes\": [min, max]})");
    }
    if (j.is_object() && j.contains("codes")) {
        const auto& c = j.at("codes");
        if (!c.is_array() || c.size() != 2)
            throw ConfigError(origin + ": codes binning must be [min, max]");
        return Binning::codes(c[0].get<long>(), c[1].get<long>());
    }
    throw ConfigError(origin + ": binning must be \"income\" or {\"codes\": [min, max]}");
}

std::vector<ComparisonSpec> default_comparisons() {
    return {
        {"father_income", Binning::income()},
        {"father_education", Binning::codes(kEducationMinCode, kEducationMaxCode)},
        {"mother_education", Binning::codes(kEducationMinCode, kEducationMaxCode)},
        {"home_ownership", Binning::codes(1, 4)},
        {"building_type", Binning::codes(1, 4)},
    };
}

}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    const std::string origin = path.string();
    try {
        PipelineConfig cfg;
        cfg.snapshot = j;

        if (!j.contains("inputs") || !j.at("inputs").is_array() || j.at("inputs").empty())
            throw ConfigError(origin + ": 'inputs' must list at least one data file");
        for (const auto& p : j.at("inputs"))
            cfg.inputs.push_back(p.get<std::string>());
        cfg.schema_path = j.at("schema").get<std::string>();
        cfg.schema = RecordSchema::load(cfg.schema_path);

        const auto& cohort = j.at("cohort");
        cfg.feature = predicate_from_json(cohort.at("feature"), origin);
        if (cohort.contains("restrictions"))
            for (const auto& pj : cohort.at("restrictions"))
                cfg.restrictions.predicates.push_back(predicate_from_json(pj, origin));
        if (cohort.contains("age_window")) {
            const auto& w = cohort.at("age_window");
            cfg.window.enabled = true;
            if (w.contains("father") || w.contains("mother")) {
                auto fixed = [&](const char* key) -> std::optional<ValueWindow> {
                    if (!w.contains(key)) return std::nullopt;
                    const auto& a = w.at(key);
                    if (!a.is_array() || a.size() != 2)
                        throw ConfigError(origin + ": age_window." + key +
                                          " must be [lo, hi]");
                    return ValueWindow{a[0].get<long>(), a[1].get<long>()};
                };
                cfg.window.fixed_father = fixed("father");
                cfg.window.fixed_mother = fixed("mother");
                if (!cfg.window.fixed_father || !cfg.window.fixed_mother)
                    throw ConfigError(origin +
                                      ": fixed age_window needs both father and mother");
            } else {
                cfg.window.threshold = w.value("threshold", std::size_t{400});
                if (cfg.window.threshold == 0)
                    throw ConfigError(origin + ": age_window.threshold must be positive");
            }
        }

        const auto& cl = j.at("clustering");
        cfg.clustering_features.clear();
        if (cl.contains("features"))
            for (const auto& f : cl.at("features"))
                cfg.clustering_features.push_back(f.get<std::string>());
        else
            cfg.clustering_features = {"father_age", "mother_age", "father_education",
                                       "mother_education", "father_income"};
        for (const auto& f : cfg.clustering_features) find_attribute(f);
        cfg.params.cluster_radius = cl.value("radius", 0.5);
        cfg.params.quash_factor = cl.value("quash_factor", 1.25);
        cfg.params.accept_ratio = cl.value("accept_ratio", 0.5);
        cfg.params.reject_ratio = cl.value("reject_ratio", 0.15);
        cfg.params.max_centers = cl.value("max_centers", std::size_t{0});
        cfg.params.validate();

        if (j.contains("ranges")) {
            const auto& r = j.at("ranges");
            if (r.contains("attributes")) {
                cfg.invariant_attributes.clear();
                for (const auto& a : r.at("attributes"))
                    cfg.invariant_attributes.push_back(a.get<std::string>());
            }
            cfg.range_fraction = r.value("fraction", 0.8);
        }
        if (cfg.invariant_attributes.empty())
            cfg.invariant_attributes = {"father_age", "mother_age"};
        for (const auto& a : cfg.invariant_attributes) find_attribute(a);
        if (!(cfg.range_fraction > 0.0 && cfg.range_fraction <= 1.0))
            throw ConfigError(origin + ": ranges.fraction must lie in (0, 1]");

        if (j.contains("comparisons")) {
            for (const auto& cj : j.at("comparisons")) {
                ComparisonSpec spec;
                spec.attribute = cj.at("attribute").get<std::string>();
                find_attribute(spec.attribute);
                spec.binning = binning_from_json(cj.at("binning"), origin);
                cfg.comparisons.push_back(std::move(spec));
            }
        } else {
            cfg.comparisons = default_comparisons();
        }

        cfg.divergence_threshold = j.value("divergence_threshold", 0.1);
        if (!(cfg.divergence_threshold >= 0.0 && cfg.divergence_threshold <= 1.0))
            throw ConfigError(origin + ": divergence_threshold must lie in [0, 1]");
        cfg.threads = j.value("threads", 1u);
        if (cfg.threads == 0) cfg.threads = 1;
        cfg.output_dir = j.value("output_dir", std::string());
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

namespace {

class StepRunner {
public:
    explicit StepRunner(std::vector<StepTiming>& timings) : timings_(timings) {}

    template <typename F>
    void operator()(int number, const std::string& name, F&& body) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body();
        } catch (const ConfigError& e) {
            throw ConfigError(prefix(number, name) + e.what());
        } catch (const DataError& e) {
            throw DataError(prefix(number, name) + e.what());
        } catch (const Error& e) {
            throw Error(prefix(number, name) + e.what());
        }
        const auto t1 = std::chrono::steady_clock::now();
        timings_.push_back({name, std::chrono::duration<double, std::milli>(t1 - t0).count()});
    }

private:
    static std::string prefix(int number, const std::string& name) {
        return "step " + std::to_string(number) + " (" + name + "): ";
    }
    std::vector<StepTiming>& timings_;
};

}

PipelineResult run_pipeline(const PipelineConfig& config) {
    PipelineResult r;
    StepRunner step(r.timings);

    std::vector<FamilyUnit> families;
    step(0, "ingest", [&] {
        Microdata all;
        for (const auto& path : config.inputs) {
            auto part = parse_microdata_file(path, config.schema);
            std::move(part.households.begin(), part.households.end(),
                      std::back_inserter(all.households));
            std::move(part.persons.begin(), part.persons.end(),
                      std::back_inserter(all.persons));
        }
        families = derive_families(all);
        r.families_total = families.size();
    });

    step(1, "separate", [&] {
        CohortFilter restrictions = config.restrictions;
        // The clustering features must be recorded on every family that can
        // reach the clustering step, so requiring them is part of the
        // restricted population's definition (it keeps n1/n2 complements).
        restrictions.predicates.push_back(
            predicates::attributes_observed(config.clustering_features));

        if (config.window.enabled) {
            if (config.window.fixed_father) {
                r.father_window = *config.window.fixed_father;
                r.mother_window = *config.window.fixed_mother;
            } else {
                // The favorable windows come from the feature-positive
                // families before any window restriction.
                std::vector<FamilyUnit> positive;
                for (const auto& f : families)
                    if (restrictions.passes(f) && config.feature.test(f))
                        positive.push_back(f);
                r.father_window = favorable_window(positive, find_attribute("father_age"),
                                                   config.window.threshold);
                r.mother_window = favorable_window(positive, find_attribute("mother_age"),
                                                   config.window.threshold);
            }
            restrictions.predicates.push_back(
                predicates::father_age(r.father_window->lo, r.father_window->hi));
            restrictions.predicates.push_back(
                predicates::mother_age(r.mother_window->lo, r.mother_window->hi));
        }

        r.cohorts = separate_groups(families, config.feature, restrictions);
        r.restricted = r.cohorts.n1.size() + r.cohorts.n2.size();
    });

    step(2, "features", [&] {
        for (const auto& name : config.clustering_features) find_attribute(name);
        for (const auto& name : config.invariant_attributes) find_attribute(name);
        for (const auto& spec : config.comparisons) find_attribute(spec.attribute);
    });

    step(3, "cluster", [&] {
        if (r.cohorts.n1.empty())
            throw DataError("cohort n1 is empty, nothing to cluster");
        r.clustering = cluster_cohort(r.cohorts.n1, config.clustering_features,
                                      config.params, config.threads);
    });

    step(4, "ranges", [&] {
        for (const auto& members : r.clustering.members) {
            r.ranges.push_back(extract_ranges(r.cohorts.n1, members,
                                              config.invariant_attributes,
                                              config.range_fraction));
            std::vector<ClusterValueCounts> counts;
            for (const auto& attr : config.invariant_attributes)
                counts.push_back({attr, member_value_counts(r.cohorts.n1, members,
                                                            find_attribute(attr))});
            r.cluster_counts.push_back(std::move(counts));
        }
    });

    step(5, "prototypes", [&] {
        r.prototypes = build_prototypes(r.cohorts.n2, r.ranges);
    });

    step(6, "compare", [&] {
        std::vector<std::size_t> all_n2(r.cohorts.n2.size());
        for (std::size_t i = 0; i < all_n2.size(); ++i) all_n2[i] = i;
        for (const auto& spec : config.comparisons) {
            const auto& attr = find_attribute(spec.attribute);
            for (std::size_t c = 0; c < r.clustering.members.size(); ++c) {
                auto entry = compare_distributions(r.cohorts.n1, r.clustering.members[c],
                                                   r.cohorts.n2, r.prototypes.members[c],
                                                   attr, spec.binning);
                entry.cluster = c;
                entry.exceeds_threshold =
                    entry.divergence && *entry.divergence > config.divergence_threshold;
                r.comparisons.push_back(std::move(entry));
            }
        }
    });

    return r;
}

}
